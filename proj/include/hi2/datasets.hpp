#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hi2/error.hpp"
#include "hi2/rng.hpp"

namespace hi2 {

struct feature_value {
  std::uint64_t id = 0;
  double value = 0.0;

  friend bool operator==(const feature_value&, const feature_value&) = default;
};

// Full-feature-space view of one stream record, before masking.
struct raw_record {
  std::uint64_t timestep = 0;
  std::vector<feature_value> values;  // ids strictly increasing
  int label = 0;

  friend bool operator==(const raw_record&, const raw_record&) = default;
};

// What the learner actually sees at one timestep: a subset of the record.
struct instance {
  std::uint64_t timestep = 0;
  std::vector<feature_value> observed;
  int label = 0;

  std::size_t dim() const noexcept { return observed.size(); }

  friend bool operator==(const instance&, const instance&) = default;
};

class record_source {
 public:
  virtual ~record_source() = default;
  virtual std::optional<raw_record> next() = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) noexcept {
  const auto ws = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

inline bool parse_real(std::string_view s, double& out) noexcept {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_index(std::string_view s, std::uint64_t& out) noexcept {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

// Shortest representation that parses back to the same double.
inline std::string format_real(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("cannot open " + path);
  return in;
}

}  // namespace detail

struct dense_options {
  // Negative values count from the end; -1 is the last column.
  long label_column = -1;
  std::string positive_label = "1";
  bool header = false;
  char delimiter = ',';
};

// Comma-separated rows; every non-label column becomes a feature, numbered
// left to right from 0. Rows are pulled one at a time from the file.
class dense_reader final : public record_source {
 public:
  dense_reader(const std::string& path, dense_options opts)
      : in_(detail::open_input(path)), opts_(std::move(opts)) {
    if (opts_.header) {
      std::string skipped;
      std::getline(in_, skipped);
      ++line_no_;
    }
  }

  std::optional<raw_record> next() override {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (detail::trim(line).empty()) continue;
      return parse_row(line);
    }
    return std::nullopt;
  }

  // Columns per row, fixed by the first row read (0 before that).
  std::size_t columns() const noexcept { return columns_; }

 private:
  raw_record parse_row(std::string_view line) {
    cells_.clear();
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(opts_.delimiter, start);
      cells_.push_back(detail::trim(line.substr(start, pos - start)));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }

    const std::string where = "row " + std::to_string(row_) + " (line " +
                              std::to_string(line_no_) + ")";
    if (columns_ == 0) {
      columns_ = cells_.size();
      const long n = static_cast<long>(columns_);
      const long col =
          opts_.label_column < 0 ? n + opts_.label_column : opts_.label_column;
      if (col < 0 || col >= n) {
        throw parse_error(where + ": label column " +
                          std::to_string(opts_.label_column) +
                          " out of range for " + std::to_string(n) +
                          " columns");
      }
      label_col_ = static_cast<std::size_t>(col);
    } else if (cells_.size() != columns_) {
      throw parse_error(where + ": expected " + std::to_string(columns_) +
                        " columns, found " + std::to_string(cells_.size()));
    }

    raw_record rec;
    rec.timestep = row_++;
    rec.values.reserve(columns_ - 1);
    std::uint64_t fid = 0;
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      if (c == label_col_) {
        rec.label = cells_[c] == opts_.positive_label ? 1 : 0;
        continue;
      }
      double v = 0.0;
      if (!detail::parse_real(cells_[c], v)) {
        throw parse_error(where + ", column " + std::to_string(c) +
                          ": cannot parse '" + std::string(cells_[c]) +
                          "' as a finite real");
      }
      rec.values.push_back({fid++, v});
    }
    return rec;
  }

  std::ifstream in_;
  dense_options opts_;
  std::vector<std::string_view> cells_;
  std::size_t columns_ = 0;
  std::size_t label_col_ = 0;
  std::uint64_t row_ = 0;
  std::uint64_t line_no_ = 0;
};

// libsvm/svmlight lines "<label> idx:val ...", 1-based increasing indices.
// Records are densified: every id below the widest index seen so far is
// present, zero-filled where the line is silent.
class sparse_reader final : public record_source {
 public:
  explicit sparse_reader(const std::string& path)
      : in_(detail::open_input(path)) {}

  std::optional<raw_record> next() override {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (detail::trim(line).empty()) continue;
      return parse_line(line);
    }
    return std::nullopt;
  }

  // Dense width after the records read so far.
  std::size_t width() const noexcept { return width_; }

 private:
  raw_record parse_line(std::string_view line) {
    const std::string where = "line " + std::to_string(line_no_);
    tokens_.clear();
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                                 line[i] == '\r'))
        ++i;
      const std::size_t j = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t' &&
             line[i] != '\r')
        ++i;
      if (i > j) tokens_.push_back(line.substr(j, i - j));
    }

    raw_record rec;
    rec.timestep = row_++;
    const std::string_view lab = tokens_.front();
    if (lab == "+1" || lab == "1") {
      rec.label = 1;
    } else if (lab == "-1" || lab == "0") {
      rec.label = 0;
    } else {
      throw parse_error(where + ": label '" + std::string(lab) +
                        "' is not +1/-1");
    }

    pairs_.clear();
    std::uint64_t prev = 0;
    for (std::size_t t = 1; t < tokens_.size(); ++t) {
      const auto tok = tokens_[t];
      const auto colon = tok.find(':');
      std::uint64_t idx = 0;
      double v = 0.0;
      if (colon == std::string_view::npos ||
          !detail::parse_index(tok.substr(0, colon), idx) ||
          !detail::parse_real(tok.substr(colon + 1), v)) {
        throw parse_error(where + ": malformed pair '" + std::string(tok) +
                          "'");
      }
      if (idx == 0) {
        throw parse_error(where + ": index 0 in '" + std::string(tok) +
                          "' (indices are 1-based)");
      }
      if (idx <= prev) {
        throw parse_error(where + ": index " + std::to_string(idx) +
                          " does not increase past " + std::to_string(prev));
      }
      prev = idx;
      pairs_.push_back({idx - 1, v});
    }
    if (prev > width_) width_ = prev;

    rec.values.resize(width_);
    for (std::size_t f = 0; f < width_; ++f) rec.values[f] = {f, 0.0};
    for (const auto& fv : pairs_) rec.values[fv.id].value = fv.value;
    return rec;
  }

  std::ifstream in_;
  std::vector<std::string_view> tokens_;
  std::vector<feature_value> pairs_;
  std::size_t width_ = 0;
  std::uint64_t row_ = 0;
  std::uint64_t line_no_ = 0;
};

// In-memory source, mostly for tests and synthetic streams.
class vector_source final : public record_source {
 public:
  explicit vector_source(std::vector<raw_record> records)
      : records_(std::move(records)) {}

  std::optional<raw_record> next() override {
    if (pos_ >= records_.size()) return std::nullopt;
    return records_[pos_++];
  }

 private:
  std::vector<raw_record> records_;
  std::size_t pos_ = 0;
};

// Label goes in the last column.
inline void write_dense(std::ostream& out, const raw_record& rec,
                        const std::string& positive_label,
                        const std::string& negative_label) {
  for (const auto& fv : rec.values) out << detail::format_real(fv.value) << ',';
  out << (rec.label == 1 ? positive_label : negative_label) << '\n';
}

// Writes nonzeros only. `width` tracks the reader's running width so an
// explicit trailing zero is emitted when the record widened the stream.
inline void write_sparse(std::ostream& out, const raw_record& rec,
                         std::size_t& width) {
  out << (rec.label == 1 ? "+1" : "-1");
  for (std::size_t i = 0; i < rec.values.size(); ++i) {
    const auto& fv = rec.values[i];
    const bool widening = i + 1 == rec.values.size() && rec.values.size() > width;
    if (fv.value != 0.0 || widening) {
      out << ' ' << (fv.id + 1) << ':' << detail::format_real(fv.value);
    }
  }
  out << '\n';
  if (rec.values.size() > width) width = rec.values.size();
}

struct simulator_config {
  double p = 1.0;
  std::uint64_t seed = 0;
};

// Keeps each feature independently with probability p. One uniform draw per
// (record, feature) in feature order; the generator is owned here and nothing
// else advances it.
class haphazard_simulator {
 public:
  explicit haphazard_simulator(simulator_config cfg) : cfg_(cfg), rng_(cfg.seed) {
    if (!(cfg_.p > 0.0 && cfg_.p <= 1.0)) {
      throw error("availability p must lie in (0, 1], got " +
                  detail::format_real(cfg_.p));
    }
  }

  instance apply(const raw_record& rec) {
    instance out;
    out.timestep = rec.timestep;
    out.label = rec.label;
    out.observed.reserve(rec.values.size());
    for (const auto& fv : rec.values) {
      if (rng_.uniform() < cfg_.p) out.observed.push_back(fv);
    }
    return out;
  }

  const simulator_config& config() const noexcept { return cfg_; }

 private:
  simulator_config cfg_;
  rng rng_;
};

}  // namespace hi2
