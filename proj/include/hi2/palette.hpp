#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hi2/error.hpp"
#include "hi2/rng.hpp"

namespace hi2 {

struct rgb {
  std::uint8_t r = 0, g = 0, b = 0;

  std::uint32_t packed() const noexcept {
    return (std::uint32_t{r} << 16) | (std::uint32_t{g} << 8) | b;
  }

  friend bool operator==(const rgb&, const rgb&) = default;
};

inline constexpr rgb background_color{255, 255, 255};

// Candidates this close to the background (Chebyshev, inclusive) are rejected.
inline constexpr int background_margin = 16;

inline int chebyshev(rgb a, rgb b) noexcept {
  return std::max({std::abs(int{a.r} - int{b.r}), std::abs(int{a.g} - int{b.g}),
                   std::abs(int{a.b} - int{b.b})});
}

struct color_entry {
  std::uint64_t feature_id = 0;
  rgb color;

  friend bool operator==(const color_entry&, const color_entry&) = default;
};

// Feature id -> color, append-only. Colors are drawn as three generator bytes
// (r, g, b) and resampled on collision or when too close to the background.
class color_registry {
 public:
  static constexpr std::uint64_t capacity =
      (1u << 24) - (background_margin + 1) * (background_margin + 1) *
                       (background_margin + 1);

  explicit color_registry(std::uint64_t seed) : seed_(seed), rng_(seed) {}

  rgb color_for(std::uint64_t feature_id) {
    if (const auto it = index_.find(feature_id); it != index_.end()) {
      return order_[it->second].color;
    }
    if (order_.size() >= capacity) {
      throw error("palette exhausted after " + std::to_string(order_.size()) +
                  " colors");
    }
    rgb c;
    do {
      c.r = rng_.byte();
      c.g = rng_.byte();
      c.b = rng_.byte();
    } while (chebyshev(c, background_color) <= background_margin ||
             used_.contains(c.packed()));
    used_.insert(c.packed());
    index_.emplace(feature_id, order_.size());
    order_.push_back({feature_id, c});
    return c;
  }

  const rgb* find(std::uint64_t feature_id) const {
    const auto it = index_.find(feature_id);
    return it == index_.end() ? nullptr : &order_[it->second].color;
  }

  bool contains(std::uint64_t feature_id) const {
    return index_.contains(feature_id);
  }

  // Assignment order (first-seen order of features).
  const std::vector<color_entry>& snapshot() const noexcept { return order_; }

  std::size_t size() const noexcept { return order_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }

  // Header "seed=<u64> algo=<name>", then "feature_id r g b" per line.
  void save(std::ostream& out) const {
    out << "seed=" << seed_ << " algo=" << rng::algorithm << '\n';
    for (const auto& e : order_) {
      out << e.feature_id << ' ' << int{e.color.r} << ' ' << int{e.color.g}
          << ' ' << int{e.color.b} << '\n';
    }
  }

  // Rebuilds a registry by replaying the generator from the saved seed, so
  // later assignments continue exactly where the saved run left off. Any
  // listed color that the replay does not reproduce is an error.
  static color_registry load(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw parse_error("palette: missing header");
    std::istringstream hs(header);
    std::string seed_tok, algo_tok;
    hs >> seed_tok >> algo_tok;
    if (seed_tok.rfind("seed=", 0) != 0 || algo_tok.rfind("algo=", 0) != 0) {
      throw parse_error("palette: bad header '" + header + "'");
    }
    if (algo_tok.substr(5) != rng::algorithm) {
      throw parse_error("palette: unsupported generator '" +
                        algo_tok.substr(5) + "'");
    }
    std::uint64_t seed = 0;
    try {
      seed = std::stoull(seed_tok.substr(5));
    } catch (const std::exception&) {
      throw parse_error("palette: bad seed in '" + header + "'");
    }

    color_registry reg(seed);
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::istringstream ls(line);
      std::uint64_t fid = 0;
      int r = -1, g = -1, b = -1;
      if (!(ls >> fid >> r >> g >> b) || r < 0 || r > 255 || g < 0 ||
          g > 255 || b < 0 || b > 255) {
        throw parse_error("palette: malformed line " + std::to_string(line_no));
      }
      const rgb expected{static_cast<std::uint8_t>(r),
                         static_cast<std::uint8_t>(g),
                         static_cast<std::uint8_t>(b)};
      if (reg.contains(fid) || reg.color_for(fid) != expected) {
        throw parse_error("palette: line " + std::to_string(line_no) +
                          " does not match the seeded generator");
      }
    }
    return reg;
  }

 private:
  std::uint64_t seed_;
  rng rng_;
  std::vector<color_entry> order_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::unordered_set<std::uint32_t> used_;
};

}  // namespace hi2
