#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hi2/error.hpp"

namespace hi2 {

struct log_entry {
  std::uint64_t timestep = 0;
  int label = 0;
  double probability = 0.0;
};

// Prequential (label, probability) record for a whole run.
class evaluation_log {
 public:
  void append(std::uint64_t timestep, int label, double probability) {
    if (!entries_.empty() && timestep <= entries_.back().timestep) {
      throw error("evaluation log timesteps must increase (got " +
                  std::to_string(timestep) + " after " +
                  std::to_string(entries_.back().timestep) + ")");
    }
    if (label != 0 && label != 1) throw error("label must be 0 or 1");
    if (!(probability >= 0.0 && probability <= 1.0)) {
      throw error("probability outside [0, 1]");
    }
    entries_.push_back({timestep, label, probability});
  }

  const std::vector<log_entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  std::size_t positives() const noexcept {
    return static_cast<std::size_t>(std::count_if(
        entries_.begin(), entries_.end(),
        [](const log_entry& e) { return e.label == 1; }));
  }

  // "timestep,label,probability" with six decimals.
  void dump(std::ostream& out) const {
    char buf[64];
    for (const auto& e : entries_) {
      std::snprintf(buf, sizeof(buf), "%llu,%d,%.6f\n",
                    static_cast<unsigned long long>(e.timestep), e.label,
                    e.probability);
      out << buf;
    }
  }

  static evaluation_log load(std::istream& in) {
    evaluation_log log;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::istringstream ls(line);
      unsigned long long t = 0;
      int y = 0;
      double p = 0.0;
      char c1 = 0, c2 = 0;
      if (!(ls >> t >> c1 >> y >> c2 >> p) || c1 != ',' || c2 != ',') {
        throw parse_error("log line " + std::to_string(line_no) + " malformed");
      }
      log.append(t, y, p);
    }
    return log;
  }

 private:
  std::vector<log_entry> entries_;
};

namespace detail {

inline void require_both_classes(const evaluation_log& log,
                                 const char* metric) {
  const std::size_t pos = log.positives();
  if (pos == 0) {
    throw error(std::string(metric) + ": log has no positive (label 1) entries");
  }
  if (pos == log.size()) {
    throw error(std::string(metric) + ": log has no negative (label 0) entries");
  }
}

}  // namespace detail

// Mean of TPR and TNR with prediction = probability >= threshold.
inline double balanced_accuracy(const evaluation_log& log,
                                double threshold = 0.5) {
  detail::require_both_classes(log, "balanced accuracy");
  std::size_t tp = 0, tn = 0, pos = 0, neg = 0;
  for (const auto& e : log.entries()) {
    const bool predicted = e.probability >= threshold;
    if (e.label == 1) {
      ++pos;
      tp += predicted;
    } else {
      ++neg;
      tn += !predicted;
    }
  }
  return 0.5 * (static_cast<double>(tp) / static_cast<double>(pos) +
                static_cast<double>(tn) / static_cast<double>(neg));
}

// Mann-Whitney U with average ranks for tied scores.
inline double auroc(const evaluation_log& log) {
  detail::require_both_classes(log, "AUROC");
  const auto& es = log.entries();
  std::vector<std::size_t> idx(es.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return es[a].probability < es[b].probability;
  });

  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && es[idx[j]].probability == es[idx[i]].probability) ++j;
    // ranks i+1..j share their mean
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (es[idx[k]].label == 1) positive_rank_sum += rank;
    }
    i = j;
  }
  const double npos = static_cast<double>(log.positives());
  const double nneg = static_cast<double>(es.size()) - npos;
  return (positive_rank_sum - npos * (npos + 1.0) / 2.0) / (npos * nneg);
}

// Average precision, sum over distinct descending thresholds of
// (R_n - R_{n-1}) * P_n; tied scores enter as one threshold.
inline double auprc(const evaluation_log& log) {
  const std::size_t npos = log.positives();
  if (npos == 0) throw error("AUPRC: log has no positive (label 1) entries");
  auto es = log.entries();
  std::sort(es.begin(), es.end(), [](const log_entry& a, const log_entry& b) {
    return a.probability > b.probability;
  });

  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0, seen = 0, i = 0;
  while (i < es.size()) {
    std::size_t j = i;
    while (j < es.size() && es[j].probability == es[i].probability) {
      tp += es[j].label == 1;
      ++j;
    }
    seen = j;
    const double recall = static_cast<double>(tp) / static_cast<double>(npos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

}  // namespace hi2
