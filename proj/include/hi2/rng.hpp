#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace hi2 {

// xoshiro256** (Blackman & Vigna), state filled from the seed by four
// successive splitmix64 outputs. The exact recurrence is part of the
// reproducibility contract: any port that follows it draws the same
// random streams.
class rng {
 public:
  using result_type = std::uint64_t;

  static constexpr std::string_view algorithm = "xoshiro256ss-splitmix64";

  explicit rng(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Top 53 bits scaled into [0, 1).
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Top 8 bits, uniform over 0..255.
  std::uint8_t byte() noexcept { return static_cast<std::uint8_t>(next() >> 56); }

  static std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  const std::array<std::uint64_t, 4>& state() const noexcept { return s_; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

// Independent generator streams hanging off one run seed.
enum class stream : std::uint64_t { mask = 1, palette = 2, weights = 3 };

// Seed for one stream of a run: splitmix64 of (run_seed + id * golden gamma).
inline std::uint64_t stream_seed(std::uint64_t run_seed, stream s) noexcept {
  std::uint64_t state =
      run_seed + static_cast<std::uint64_t>(s) * 0xD1B54A32D192ED03ULL;
  return rng::splitmix64(state);
}

}  // namespace hi2
