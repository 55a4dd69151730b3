#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hi2/binary_io.hpp"
#include "hi2/error.hpp"
#include "hi2/raster.hpp"
#include "hi2/rng.hpp"

namespace hi2 {

inline constexpr double probability_epsilon = 1e-7;

inline double clamp_probability(double p) noexcept {
  return std::clamp(p, probability_epsilon, 1.0 - probability_epsilon);
}

// Binary cross-entropy on the clamped probability.
inline double bce_loss(int y, double p) noexcept {
  p = clamp_probability(p);
  return -(y == 1 ? std::log(p) : std::log1p(-p));
}

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct step_result {
  double probability = 0.5;  // before the update
  double loss = 0.0;
};

// Anything that maps a frame to P(label = 1) and learns one instance at a time.
class classifier {
 public:
  virtual ~classifier() = default;

  // No parameter mutation.
  virtual double predict(const image_frame& frame) const = 0;

  // Predict, score, then take one gradient step.
  virtual step_result learn(const image_frame& frame, int label,
                            std::uint64_t timestep) = 0;
};

// Geometry of the small scratch CNN. conv1: 8@7x7 pad 3 + ReLU; maxpool
// 2x2/2; conv2: 16@3x3 stride 2 pad 1 + ReLU; head; dense -> 1; sigmoid.
// The flatten head keeps where a bar sits relative to the baseline. A global
// average head is translation invariant, so it cannot tell a bar above the
// baseline from the same bar below it.
enum class desknet_head { global_average, flatten };

struct desknet_config {
  std::size_t input_side = frame_side;
  std::size_t conv1_stride = 4;
  desknet_head head = desknet_head::flatten;

  // 3x32x32 variant used for exhaustive gradient checks.
  static desknet_config reduced() { return {32, 2}; }
};

struct desknet_shapes {
  std::size_t input_side, conv1_side, pool_side, conv2_side;
  static constexpr std::size_t conv1_channels = 8;
  static constexpr std::size_t conv2_channels = 16;

  explicit desknet_shapes(const desknet_config& cfg)
      : input_side(cfg.input_side),
        conv1_side((cfg.input_side + 2 * 3 - 7) / cfg.conv1_stride + 1),
        pool_side(conv1_side / 2),
        conv2_side((pool_side + 2 * 1 - 3) / 2 + 1) {}
};

// Flat parameter layout, in checkpoint order.
struct desknet_layout {
  static constexpr std::size_t conv1_w = 0;                      // [8][3][7][7]
  static constexpr std::size_t conv1_b = conv1_w + 8 * 3 * 49;   // [8]
  static constexpr std::size_t conv2_w = conv1_b + 8;            // [16][8][3][3]
  static constexpr std::size_t conv2_b = conv2_w + 16 * 8 * 9;   // [16]
  static constexpr std::size_t fc_w = conv2_b + 16;              // [head_inputs]
  std::size_t head_inputs = 16;
  std::size_t fc_b = fc_w + 16;                                  // [1]
  std::size_t count = fc_w + 16 + 1;

  desknet_layout(const desknet_config& cfg, const desknet_shapes& sh)
      : head_inputs(cfg.head == desknet_head::flatten
                        ? 16 * sh.conv2_side * sh.conv2_side
                        : 16),
        fc_b(fc_w + head_inputs),
        count(fc_b + 1) {}
};

namespace detail {

// Patch matrix [ch*k*k][out*out] for a square input [ch][side][side].
template <typename T, typename In>
void im2col(std::span<const In> input, std::size_t ch, std::size_t side,
            std::size_t k, std::size_t stride, std::size_t pad,
            std::size_t out_side, std::vector<T>& col) {
  const std::size_t n = out_side * out_side;
  col.assign(ch * k * k * n, T(0));
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* dst = &col[((c * k + ky) * k + kx) * n];
        for (std::size_t oy = 0; oy < out_side; ++oy) {
          const long iy = long(oy * stride + ky) - long(pad);
          if (iy < 0 || iy >= long(side)) continue;
          const In* src = &input[(c * side + std::size_t(iy)) * side];
          for (std::size_t ox = 0; ox < out_side; ++ox) {
            const long ix = long(ox * stride + kx) - long(pad);
            if (ix < 0 || ix >= long(side)) continue;
            dst[oy * out_side + ox] = static_cast<T>(src[ix]);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulate patch gradients back onto the input grid.
template <typename T>
void col2im(const std::vector<T>& col, std::size_t ch, std::size_t side,
            std::size_t k, std::size_t stride, std::size_t pad,
            std::size_t out_side, std::vector<T>& grad) {
  const std::size_t n = out_side * out_side;
  grad.assign(ch * side * side, T(0));
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* src = &col[((c * k + ky) * k + kx) * n];
        for (std::size_t oy = 0; oy < out_side; ++oy) {
          const long iy = long(oy * stride + ky) - long(pad);
          if (iy < 0 || iy >= long(side)) continue;
          T* dst = &grad[(c * side + std::size_t(iy)) * side];
          for (std::size_t ox = 0; ox < out_side; ++ox) {
            const long ix = long(ox * stride + kx) - long(pad);
            if (ix < 0 || ix >= long(side)) continue;
            dst[ix] += src[oy * out_side + ox];
          }
        }
      }
    }
  }
}

// out[m][n] = bias[m] + sum_k w[m][k] * col[k][n]
template <typename T>
void conv_forward(const T* w, const T* bias, const std::vector<T>& col,
                  std::size_t m_out, std::size_t k_in, std::size_t n,
                  std::vector<T>& out) {
  out.resize(m_out * n);
  for (std::size_t m = 0; m < m_out; ++m) {
    T* o = &out[m * n];
    std::fill(o, o + n, bias[m]);
    for (std::size_t k = 0; k < k_in; ++k) {
      const T wk = w[m * k_in + k];
      const T* c = &col[k * n];
      for (std::size_t j = 0; j < n; ++j) o[j] += wk * c[j];
    }
  }
}

}  // namespace detail

// Small convolutional binary classifier trained by per-instance SGD.
// T = float in normal runs, double for gradient verification.
template <typename T = float>
class desknet final : public classifier {
 public:
  using layout = desknet_layout;

  desknet(std::uint64_t seed, double lr, desknet_config cfg = {})
      : cfg_(cfg), shapes_(cfg), lay_(cfg, shapes_), lr_(lr),
        params_(lay_.count, T(0)) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
      throw error("learning rate must be finite and non-negative");
    }
    if (shapes_.conv2_side == 0) throw error("input too small for DeskNet");
    rng gen(seed);
    const auto fill = [&](std::size_t begin, std::size_t n, double fan_in) {
      const double bound = std::sqrt(6.0 / fan_in);
      for (std::size_t i = 0; i < n; ++i) {
        params_[begin + i] = static_cast<T>((2.0 * gen.uniform() - 1.0) * bound);
      }
    };
    fill(layout::conv1_w, 8 * 3 * 49, 3.0 * 49.0);
    fill(layout::conv2_w, 16 * 8 * 9, 8.0 * 9.0);
    fill(layout::fc_w, lay_.head_inputs, double(lay_.head_inputs));
  }

  double predict(const image_frame& frame) const override {
    check_input(frame.pixels());
    scratch s;
    const double z = forward(frame.pixels(), s);
    if (!std::isfinite(z)) throw error("DeskNet produced a non-finite logit");
    return clamp_probability(sigmoid(z));
  }

  step_result learn(const image_frame& frame, int label,
                    std::uint64_t timestep) override {
    std::vector<T> grad;
    scratch s;
    const double p = loss_gradient(frame.pixels(), label, grad, s);
    if (!std::isfinite(p)) throw divergence_error("non-finite activation", timestep);
    for (const T g : grad) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw divergence_error("non-finite gradient", timestep);
      }
    }
    if (lr_ != 0.0) {
      const T step = static_cast<T>(lr_);
      for (std::size_t i = 0; i < params_.size(); ++i) params_[i] -= step * grad[i];
    }
    return {clamp_probability(p), bce_loss(label, p)};
  }

  // Loss at the current parameters, input of any side matching the config.
  template <typename In>
  double loss(std::span<const In> input, int label) const {
    scratch s;
    return bce_loss(label, sigmoid(forward(input, s)));
  }

  // dL/dtheta into `grad`; returns the (unclamped) probability.
  template <typename In>
  double loss_gradient(std::span<const In> input, int label,
                       std::vector<T>& grad) const {
    scratch s;
    return loss_gradient(input, label, grad, s);
  }

  // Element counts of each activation after a forward pass on `input`.
  struct activation_sizes {
    std::size_t conv1, pool, conv2, head;
  };

  template <typename In>
  activation_sizes trace(std::span<const In> input) const {
    scratch s;
    forward(input, s);
    return {s.a1.size(), s.pooled.size(), s.a3.size(), s.head.size()};
  }

  std::span<T> parameters() noexcept { return params_; }
  std::span<const T> parameters() const noexcept { return params_; }

  const desknet_config& config() const noexcept { return cfg_; }
  const desknet_shapes& shapes() const noexcept { return shapes_; }
  const desknet_layout& param_layout() const noexcept { return lay_; }
  double learning_rate() const noexcept { return lr_; }

  // 16-byte header ("HI2W", u32 version, u64 count), then f64 LE values.
  void save(std::ostream& out) const {
    out.write("HI2W", 4);
    detail::put_le<std::uint32_t>(out, 1);
    detail::put_le<std::uint64_t>(out, params_.size());
    for (const T v : params_) detail::put_f64(out, static_cast<double>(v));
    if (!out) throw error("failed writing DeskNet checkpoint");
  }

  void load(std::istream& in) {
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t count = 0;
    if (!in.read(magic, 4) || std::string(magic, 4) != "HI2W") {
      throw parse_error("checkpoint: bad magic");
    }
    if (!detail::get_le(in, version) || version != 1) {
      throw parse_error("checkpoint: unsupported version");
    }
    if (!detail::get_le(in, count) || count != params_.size()) {
      throw parse_error("checkpoint: parameter count mismatch");
    }
    for (auto& p : params_) {
      double v = 0.0;
      if (!detail::get_f64(in, v)) throw parse_error("checkpoint: truncated");
      p = static_cast<T>(v);
    }
  }

 private:
  struct scratch {
    std::vector<T> col1, a1, pooled, col2, a3, head;
    std::vector<std::size_t> argmax;
  };

  template <typename In>
  void check_input(std::span<const In> input) const {
    const std::size_t need = 3 * shapes_.input_side * shapes_.input_side;
    if (input.size() != need) {
      throw error("DeskNet expects " + std::to_string(need) + " inputs, got " +
                  std::to_string(input.size()));
    }
  }

  // Returns the logit; fills the activations needed by backward().
  template <typename In>
  double forward(std::span<const In> input, scratch& s) const {
    check_input(input);
    const auto& sh = shapes_;
    const std::size_t n1 = sh.conv1_side * sh.conv1_side;
    const std::size_t n2 = sh.pool_side * sh.pool_side;
    const std::size_t n3 = sh.conv2_side * sh.conv2_side;

    detail::im2col<T, In>(input, 3, sh.input_side, 7, cfg_.conv1_stride, 3,
                          sh.conv1_side, s.col1);
    detail::conv_forward(&params_[layout::conv1_w], &params_[layout::conv1_b],
                         s.col1, 8, 3 * 49, n1, s.a1);

    // ReLU folded into the pool: max(0, max window).
    s.pooled.assign(8 * n2, T(0));
    s.argmax.assign(8 * n2, 0);
    for (std::size_t c = 0; c < 8; ++c) {
      for (std::size_t py = 0; py < sh.pool_side; ++py) {
        for (std::size_t px = 0; px < sh.pool_side; ++px) {
          std::size_t best = c * n1 + (2 * py) * sh.conv1_side + 2 * px;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t at =
                  c * n1 + (2 * py + dy) * sh.conv1_side + 2 * px + dx;
              if (s.a1[at] > s.a1[best]) best = at;
            }
          }
          const std::size_t o = c * n2 + py * sh.pool_side + px;
          s.argmax[o] = best;
          s.pooled[o] = std::max(T(0), s.a1[best]);
        }
      }
    }

    detail::im2col<T, T>(s.pooled, 8, sh.pool_side, 3, 2, 1, sh.conv2_side,
                         s.col2);
    detail::conv_forward(&params_[layout::conv2_w], &params_[layout::conv2_b],
                         s.col2, 16, 8 * 9, n3, s.a3);

    if (cfg_.head == desknet_head::flatten) {
      s.head.resize(16 * n3);
      for (std::size_t i = 0; i < 16 * n3; ++i) s.head[i] = std::max(T(0), s.a3[i]);
    } else {
      s.head.assign(16, T(0));
      for (std::size_t c = 0; c < 16; ++c) {
        T acc = 0;
        for (std::size_t i = 0; i < n3; ++i) acc += std::max(T(0), s.a3[c * n3 + i]);
        s.head[c] = acc / static_cast<T>(n3);
      }
    }

    T z = params_[lay_.fc_b];
    for (std::size_t i = 0; i < lay_.head_inputs; ++i) {
      z += params_[layout::fc_w + i] * s.head[i];
    }
    return static_cast<double>(z);
  }

  template <typename In>
  double loss_gradient(std::span<const In> input, int label,
                       std::vector<T>& grad, scratch& s) const {
    const double z = forward(input, s);
    const double p = sigmoid(z);
    const auto& sh = shapes_;
    const std::size_t n1 = sh.conv1_side * sh.conv1_side;
    const std::size_t n2 = sh.pool_side * sh.pool_side;
    const std::size_t n3 = sh.conv2_side * sh.conv2_side;
    grad.assign(lay_.count, T(0));

    // d(BCE)/dz of the logit form; the clamp only guards the reported loss.
    const T dz = static_cast<T>(p - static_cast<double>(label));
    grad[lay_.fc_b] = dz;
    for (std::size_t i = 0; i < lay_.head_inputs; ++i) {
      grad[layout::fc_w + i] = dz * s.head[i];
    }
    std::vector<T> da3(16 * n3, T(0));
    if (cfg_.head == desknet_head::flatten) {
      for (std::size_t i = 0; i < 16 * n3; ++i) {
        if (s.a3[i] > T(0)) da3[i] = dz * params_[layout::fc_w + i];
      }
    } else {
      for (std::size_t c = 0; c < 16; ++c) {
        const T dmean = dz * params_[layout::fc_w + c] / static_cast<T>(n3);
        for (std::size_t i = 0; i < n3; ++i) {
          if (s.a3[c * n3 + i] > T(0)) da3[c * n3 + i] = dmean;
        }
      }
    }

    // conv2 weights: dW[m][k] = sum_j da3[m][j] * col2[k][j]
    const std::size_t k2 = 8 * 9;
    for (std::size_t m = 0; m < 16; ++m) {
      const T* d = &da3[m * n3];
      T bsum = 0;
      for (std::size_t j = 0; j < n3; ++j) bsum += d[j];
      grad[layout::conv2_b + m] = bsum;
      for (std::size_t k = 0; k < k2; ++k) {
        const T* c = &s.col2[k * n3];
        T acc = 0;
        for (std::size_t j = 0; j < n3; ++j) acc += d[j] * c[j];
        grad[layout::conv2_w + m * k2 + k] = acc;
      }
    }

    // Back through conv2 to the pooled map.
    std::vector<T> dcol2(k2 * n3, T(0));
    for (std::size_t m = 0; m < 16; ++m) {
      const T* d = &da3[m * n3];
      for (std::size_t k = 0; k < k2; ++k) {
        const T w = params_[layout::conv2_w + m * k2 + k];
        if (w == T(0)) continue;
        T* dc = &dcol2[k * n3];
        for (std::size_t j = 0; j < n3; ++j) dc[j] += w * d[j];
      }
    }
    std::vector<T> dpooled;
    detail::col2im(dcol2, 8, sh.pool_side, 3, 2, 1, sh.conv2_side, dpooled);

    // Max-pool + ReLU routing.
    std::vector<T> da1(8 * n1, T(0));
    for (std::size_t o = 0; o < 8 * n2; ++o) {
      const std::size_t at = s.argmax[o];
      if (s.a1[at] > T(0)) da1[at] += dpooled[o];
    }

    const std::size_t k1 = 3 * 49;
    for (std::size_t m = 0; m < 8; ++m) {
      const T* d = &da1[m * n1];
      T bsum = 0;
      for (std::size_t j = 0; j < n1; ++j) bsum += d[j];
      grad[layout::conv1_b + m] = bsum;
      for (std::size_t k = 0; k < k1; ++k) {
        const T* c = &s.col1[k * n1];
        T acc = 0;
        for (std::size_t j = 0; j < n1; ++j) acc += d[j] * c[j];
        grad[layout::conv1_w + m * k1 + k] = acc;
      }
    }
    return p;
  }

  desknet_config cfg_;
  desknet_shapes shapes_;
  desknet_layout lay_;
  double lr_;
  std::vector<T> params_;
};

}  // namespace hi2
