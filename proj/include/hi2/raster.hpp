#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hi2/datasets.hpp"
#include "hi2/error.hpp"
#include "hi2/palette.hpp"
#include "hi2/streamstats.hpp"

namespace hi2 {

inline constexpr std::size_t frame_side = 224;
inline constexpr std::size_t frame_channels = 3;
inline constexpr std::size_t frame_values =
    frame_channels * frame_side * frame_side;  // 150528

inline constexpr double default_ff = 0.3;

enum class representation { bar, bar_x, pie };

inline std::string to_string(representation r) {
  switch (r) {
    case representation::bar: return "bar";
    case representation::bar_x: return "bar_x";
    case representation::pie: return "pie";
  }
  return "?";
}

// Square 3-channel float raster, channel-major then row-major (R, G, B).
class canvas {
 public:
  explicit canvas(std::size_t side, float fill = 1.0f)
      : side_(side), pixels_(frame_channels * side * side, fill) {}

  std::size_t side() const noexcept { return side_; }

  float& at(std::size_t ch, std::size_t row, std::size_t col) noexcept {
    return pixels_[(ch * side_ + row) * side_ + col];
  }
  float at(std::size_t ch, std::size_t row, std::size_t col) const noexcept {
    return pixels_[(ch * side_ + row) * side_ + col];
  }

  // Rows [r0, r1] inclusive, columns [c0, c1).
  void fill_rect(rgb color, std::size_t r0, std::size_t r1, std::size_t c0,
                 std::size_t c1) noexcept {
    const float ch[3] = {color.r / 255.0f, color.g / 255.0f, color.b / 255.0f};
    for (std::size_t c = 0; c < frame_channels; ++c) {
      for (std::size_t r = r0; r <= r1; ++r) {
        float* row = &pixels_[(c * side_ + r) * side_];
        std::fill(row + c0, row + c1, ch[c]);
      }
    }
  }

  void set(std::size_t row, std::size_t col, rgb color) noexcept {
    at(0, row, col) = color.r / 255.0f;
    at(1, row, col) = color.g / 255.0f;
    at(2, row, col) = color.b / 255.0f;
  }

  std::span<const float> pixels() const noexcept { return pixels_; }
  std::span<float> pixels() noexcept { return pixels_; }

  std::vector<float> release() && noexcept { return std::move(pixels_); }

  friend bool operator==(const canvas&, const canvas&) = default;

 private:
  std::size_t side_;
  std::vector<float> pixels_;
};

// The fixed 3x224x224 model input.
class image_frame {
 public:
  image_frame() : pixels_(frame_values, 1.0f) {}

  explicit image_frame(std::vector<float> pixels) : pixels_(std::move(pixels)) {
    if (pixels_.size() != frame_values) {
      throw error("image frame needs " + std::to_string(frame_values) +
                  " values, got " + std::to_string(pixels_.size()));
    }
  }

  explicit image_frame(canvas c) {
    if (c.side() != frame_side) {
      throw error("canvas side " + std::to_string(c.side()) +
                  " is not the frame side");
    }
    pixels_ = std::move(c).release();
  }

  float at(std::size_t ch, std::size_t row, std::size_t col) const noexcept {
    return pixels_[(ch * frame_side + row) * frame_side + col];
  }

  std::span<const float> pixels() const noexcept { return pixels_; }
  std::span<float> pixels() noexcept { return pixels_; }

  bool valid() const noexcept {
    return pixels_.size() == frame_values &&
           std::all_of(pixels_.begin(), pixels_.end(), [](float v) {
             return std::isfinite(v) && v >= 0.0f && v <= 1.0f;
           });
  }

  friend bool operator==(const image_frame&, const image_frame&) = default;

 private:
  std::vector<float> pixels_;
};

struct layout_spec {
  int bar_width = 0;
  int spacing = 0;
  std::size_t d = 0;
  double ff = default_ff;
  std::size_t canvas_width = frame_side;

  // First column of the bar in slot j.
  std::size_t column(std::size_t j) const noexcept {
    return static_cast<std::size_t>(spacing) +
           j * static_cast<std::size_t>(bar_width + spacing);
  }
};

namespace detail {

inline int truncated_bar_width(std::size_t d, double ff, std::size_t width) {
  const double dd = static_cast<double>(d);
  return static_cast<int>(static_cast<double>(width) / (dd + (dd + 1.0) * ff));
}

}  // namespace detail

// Bar width and spacing for d bars. When bars would vanish the canvas is
// doubled until they are at least 2 pixels wide; the caller then pools back.
inline layout_spec layout(std::size_t d, double ff,
                          std::size_t canvas_width = frame_side) {
  if (d == 0) throw error("layout needs at least one bar");
  if (!(ff > 0.0) || !std::isfinite(ff)) throw error("spacing fraction must be > 0");
  if (canvas_width == 0) throw error("canvas width must be positive");

  layout_spec spec;
  spec.d = d;
  spec.ff = ff;
  spec.canvas_width = canvas_width;
  spec.bar_width = detail::truncated_bar_width(d, ff, canvas_width);
  if (spec.bar_width < 1) {
    while (spec.bar_width < 2) {
      spec.canvas_width *= 2;
      spec.bar_width = detail::truncated_bar_width(d, ff, spec.canvas_width);
    }
  }
  spec.spacing = static_cast<int>(spec.bar_width * ff);
  return spec;
}

// Row for normalized value y on a canvas of the given side. Z-scores span
// [-3, 3] top to bottom with the baseline at 0; min-max spans [0, 1] and
// bars grow up from the bottom row.
inline std::size_t value_row(double y, normalization mode, std::size_t side) {
  const double h = static_cast<double>(side - 1);
  const double r = mode == normalization::zscore
                       ? (zscore_clip - y) / (2.0 * zscore_clip) * h
                       : (1.0 - y) * h;
  return static_cast<std::size_t>(std::lround(r));
}

inline std::size_t baseline_row(normalization mode, std::size_t side) {
  return value_row(0.0, mode, side);
}

namespace detail {

inline void check_range(double y, normalization mode) {
  const bool ok = mode == normalization::zscore
                      ? (y >= -zscore_clip && y <= zscore_clip)
                      : (y >= 0.0 && y <= 1.0);
  if (!ok || !std::isfinite(y)) {
    throw error("normalized value " + format_real(y) + " outside the " +
                to_string(mode) + " range");
  }
}

inline rgb color_of(const color_registry& reg, std::uint64_t id) {
  const rgb* c = reg.find(id);
  if (!c) throw error("feature " + std::to_string(id) + " has no color");
  return *c;
}

inline void draw_bar(canvas& cv, const layout_spec& lay, std::size_t slot,
                     double y, normalization mode, rgb color) {
  const std::size_t side = cv.side();
  const std::size_t r = value_row(y, mode, side);
  const std::size_t base = baseline_row(mode, side);
  const std::size_t c0 = lay.column(slot);
  cv.fill_rect(color, std::min(r, base), std::max(r, base), c0,
               c0 + static_cast<std::size_t>(lay.bar_width));
}

// Both diagonals of a bar_width square centered on the baseline.
inline void draw_x(canvas& cv, const layout_spec& lay, std::size_t slot,
                   normalization mode, rgb color) {
  const long side = static_cast<long>(cv.side());
  const long bw = lay.bar_width;
  const long t = std::max(1L, bw / 8);
  const long top = static_cast<long>(baseline_row(mode, cv.side())) - bw / 2;
  const long c0 = static_cast<long>(lay.column(slot));
  for (long i = 0; i < bw; ++i) {
    const long row = top + i;
    if (row < 0 || row >= side) continue;
    for (long j = 0; j < bw; ++j) {
      const long a = i - j;
      const long b = i + j - (bw - 1);
      if (2 * a * a <= t * t || 2 * b * b <= t * t) {
        cv.set(static_cast<std::size_t>(row), static_cast<std::size_t>(c0 + j),
               color);
      }
    }
  }
}

}  // namespace detail

// Area-average pooling by the integer factor side / target.
inline canvas downscale(const canvas& src, std::size_t target = frame_side) {
  if (target == 0 || src.side() < target || src.side() % target != 0) {
    throw error("cannot pool a " + std::to_string(src.side()) +
                "-wide canvas to " + std::to_string(target));
  }
  const std::size_t f = src.side() / target;
  if (f == 1) return src;
  canvas out(target);
  const double inv = 1.0 / static_cast<double>(f * f);
  std::vector<double> acc(target);
  for (std::size_t ch = 0; ch < frame_channels; ++ch) {
    for (std::size_t r = 0; r < target; ++r) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t dr = 0; dr < f; ++dr) {
        const std::size_t sr = r * f + dr;
        for (std::size_t c = 0; c < target; ++c) {
          double s = 0.0;
          for (std::size_t dc = 0; dc < f; ++dc) s += src.at(ch, sr, c * f + dc);
          acc[c] += s;
        }
      }
      for (std::size_t c = 0; c < target; ++c) {
        out.at(ch, r, c) =
            std::clamp(static_cast<float>(acc[c] * inv), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

// Observed features only, one bar each, left to right in the given order.
inline image_frame render_bar(std::span<const feature_value> observed,
                              const color_registry& reg, normalization mode,
                              double ff = default_ff) {
  if (observed.empty()) return image_frame{};
  for (const auto& fv : observed) detail::check_range(fv.value, mode);
  const layout_spec lay = layout(observed.size(), ff);
  canvas cv(lay.canvas_width);
  for (std::size_t j = 0; j < observed.size(); ++j) {
    detail::draw_bar(cv, lay, j, observed[j].value, mode,
                     detail::color_of(reg, observed[j].id));
  }
  return image_frame(downscale(cv));
}

// Every known feature keeps a fixed slot; unobserved ones get an X glyph.
inline image_frame render_bar_x(std::span<const std::uint64_t> known,
                                std::span<const feature_value> observed,
                                const color_registry& reg, normalization mode,
                                double ff = default_ff) {
  std::unordered_map<std::uint64_t, double> values;
  values.reserve(observed.size());
  for (const auto& fv : observed) {
    detail::check_range(fv.value, mode);
    values.emplace(fv.id, fv.value);
  }
  if (known.empty()) {
    if (!observed.empty()) throw error("observed feature missing from known set");
    return image_frame{};
  }
  const layout_spec lay = layout(known.size(), ff);
  canvas cv(lay.canvas_width);
  std::size_t matched = 0;
  for (std::size_t j = 0; j < known.size(); ++j) {
    const rgb color = detail::color_of(reg, known[j]);
    if (const auto it = values.find(known[j]); it != values.end()) {
      detail::draw_bar(cv, lay, j, it->second, mode, color);
      ++matched;
    } else {
      detail::draw_x(cv, lay, j, mode, color);
    }
  }
  if (matched != values.size()) {
    throw error("observed feature missing from known set");
  }
  return image_frame(downscale(cv));
}

inline constexpr double pie_center = 112.0;
inline constexpr double pie_radius = 100.0;

// Clockwise angle in degrees from 12 o'clock, in [0, 360).
inline double pie_angle(double row, double col) noexcept {
  double a = std::atan2(col - pie_center, pie_center - row) * 180.0 /
             std::numbers::pi;
  if (a < 0.0) a += 360.0;
  return a;
}

// Sector weights: z + 3 for z-scores, the value itself for min-max.
inline std::vector<double> pie_weights(std::span<const feature_value> observed,
                                       normalization mode) {
  std::vector<double> w;
  w.reserve(observed.size());
  for (const auto& fv : observed) {
    detail::check_range(fv.value, mode);
    w.push_back(mode == normalization::zscore ? fv.value + zscore_clip : fv.value);
  }
  return w;
}

// Cumulative sector end angles, clockwise from 12 o'clock; last is 360.
inline std::vector<double> pie_boundaries(std::span<const double> weights) {
  double total = 0.0;
  for (const double w : weights) total += w;
  std::vector<double> ends(weights.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += total > 0.0 ? weights[k] : 1.0;
    ends[k] = 360.0 * acc / (total > 0.0 ? total : double(weights.size()));
  }
  if (!ends.empty()) ends.back() = 360.0;
  return ends;
}

inline image_frame render_pie(std::span<const feature_value> observed,
                              const color_registry& reg, normalization mode,
                              double /*ff*/ = default_ff) {
  const auto weights = pie_weights(observed, mode);
  if (observed.empty()) return image_frame{};
  const auto ends = pie_boundaries(weights);
  std::vector<rgb> colors;
  colors.reserve(observed.size());
  for (const auto& fv : observed) colors.push_back(detail::color_of(reg, fv.id));

  canvas cv(frame_side);
  const double r2 = pie_radius * pie_radius;
  for (std::size_t row = 0; row < frame_side; ++row) {
    const double dy = static_cast<double>(row) - pie_center;
    for (std::size_t col = 0; col < frame_side; ++col) {
      const double dx = static_cast<double>(col) - pie_center;
      if (dx * dx + dy * dy > r2) continue;
      const double a = pie_angle(double(row), double(col));
      auto k = static_cast<std::size_t>(
          std::upper_bound(ends.begin(), ends.end(), a) - ends.begin());
      if (k >= ends.size()) k = ends.size() - 1;
      cv.set(row, col, colors[k]);
    }
  }
  return image_frame(std::move(cv));
}

inline image_frame render(representation rep,
                          std::span<const std::uint64_t> known,
                          std::span<const feature_value> observed,
                          const color_registry& reg, normalization mode,
                          double ff) {
  switch (rep) {
    case representation::bar: return render_bar(observed, reg, mode, ff);
    case representation::bar_x:
      return render_bar_x(known, observed, reg, mode, ff);
    case representation::pie: return render_pie(observed, reg, mode, ff);
  }
  throw error("unknown representation");
}

}  // namespace hi2
