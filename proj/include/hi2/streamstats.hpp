#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hi2/datasets.hpp"
#include "hi2/error.hpp"

namespace hi2 {

enum class normalization { zscore, minmax };

inline constexpr double zscore_clip = 3.0;

// Knuth/Welford running moments plus running extrema for one feature.
struct feature_stats {
  std::uint64_t k = 0;
  double mu = 0.0;
  double v = 0.0;  // sum of squared deviations from the running mean
  double pmin = std::numeric_limits<double>::infinity();
  double pmax = -std::numeric_limits<double>::infinity();

  void update(double x) {
    if (!std::isfinite(x)) throw error("non-finite feature value");
    ++k;
    const double mu_old = mu;
    mu = mu_old + (x - mu_old) / static_cast<double>(k);
    v += (x - mu_old) * (x - mu);
    pmin = std::min(pmin, x);
    pmax = std::max(pmax, x);
  }

  // Unbiased variance; 0 while fewer than two observations.
  double variance() const noexcept {
    return k < 2 ? 0.0 : v / static_cast<double>(k - 1);
  }

  double stddev() const noexcept { return std::sqrt(variance()); }

  friend bool operator==(const feature_stats&, const feature_stats&) = default;
};

// Expects `s` to already include x. Degenerate sigma maps to the midline 0.
inline double normalize_zscore(const feature_stats& s, double x) {
  if (!std::isfinite(x)) throw error("non-finite feature value");
  const double sigma = s.stddev();
  if (s.k < 2 || !(sigma > 0.0)) return 0.0;
  return std::clamp((x - s.mu) / sigma, -zscore_clip, zscore_clip);
}

// Expects `s` to already include x. A zero-width range maps to 0.5.
inline double normalize_minmax(const feature_stats& s, double x) {
  if (!std::isfinite(x)) throw error("non-finite feature value");
  const double range = s.pmax - s.pmin;
  if (!(range > 0.0)) return 0.5;
  return std::clamp((x - s.pmin) / range, 0.0, 1.0);
}

inline double normalize(normalization mode, const feature_stats& s, double x) {
  return mode == normalization::zscore ? normalize_zscore(s, x)
                                       : normalize_minmax(s, x);
}

// Per-feature statistics for a whole stream, advanced in stream order.
class stats_table {
 public:
  // Folds each observed value into its feature's stats, then normalizes it.
  std::vector<feature_value> update_and_normalize(
      const std::vector<feature_value>& observed, normalization mode) {
    std::vector<feature_value> out;
    out.reserve(observed.size());
    for (const auto& fv : observed) {
      auto& s = stats_[fv.id];
      s.update(fv.value);
      out.push_back({fv.id, normalize(mode, s, fv.value)});
    }
    return out;
  }

  const feature_stats* find(std::uint64_t id) const {
    const auto it = stats_.find(id);
    return it == stats_.end() ? nullptr : &it->second;
  }

  feature_stats& operator[](std::uint64_t id) { return stats_[id]; }

  std::size_t size() const noexcept { return stats_.size(); }

  // "feature_id k mu v pmin pmax" per line, sorted by id. Debug format.
  void dump(std::ostream& out) const {
    std::vector<std::uint64_t> ids;
    ids.reserve(stats_.size());
    for (const auto& [id, _] : stats_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    const auto old_flags = out.flags();
    const auto old_prec = out.precision();
    out << std::setprecision(17);
    for (const auto id : ids) {
      const auto& s = stats_.at(id);
      out << id << ' ' << s.k << ' ' << s.mu << ' ' << s.v << ' ' << s.pmin
          << ' ' << s.pmax << '\n';
    }
    out.flags(old_flags);
    out.precision(old_prec);
  }

 private:
  std::unordered_map<std::uint64_t, feature_stats> stats_;
};

inline std::string to_string(normalization m) {
  return m == normalization::zscore ? "zscore" : "minmax";
}

}  // namespace hi2
