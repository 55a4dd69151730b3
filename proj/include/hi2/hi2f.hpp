#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "hi2/binary_io.hpp"
#include "hi2/error.hpp"
#include "hi2/raster.hpp"

namespace hi2 {

// HI2F frame stream, little-endian.
//   header (32 bytes): "HI2F", u32 version=1, u32 channels=3, u32 height=224,
//                      u32 width=224, u8 dtype=1 (f32), 11 zero bytes
//   frame: u64 timestep, u8 label, 150528 f32 channel-major row-major
namespace hi2f {

inline constexpr std::uint32_t version = 1;
inline constexpr std::uint8_t dtype_f32 = 1;
inline constexpr std::size_t header_bytes = 32;
inline constexpr std::size_t frame_bytes = 8 + 1 + frame_values * 4;

inline std::uint64_t file_size(std::uint64_t frames) {
  return header_bytes + frames * frame_bytes;
}

struct record {
  std::uint64_t timestep = 0;
  int label = 0;
  image_frame frame;
};

class writer {
 public:
  explicit writer(const std::string& path)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw write_error("cannot open " + path + " for writing", 0);
    out_.write("HI2F", 4);
    detail::put_le<std::uint32_t>(out_, version);
    detail::put_le<std::uint32_t>(out_, frame_channels);
    detail::put_le<std::uint32_t>(out_, frame_side);
    detail::put_le<std::uint32_t>(out_, frame_side);
    detail::put_le<std::uint8_t>(out_, dtype_f32);
    const char reserved[11] = {};
    out_.write(reserved, sizeof(reserved));
    if (!out_) throw write_error("failed writing HI2F header to " + path, 0);
  }

  void write(std::uint64_t timestep, int label, const image_frame& frame) {
    if (label != 0 && label != 1) throw error("HI2F label must be 0 or 1");
    detail::put_le<std::uint64_t>(out_, timestep);
    detail::put_le<std::uint8_t>(out_, static_cast<std::uint8_t>(label));
    const auto px = frame.pixels();
    if (detail::host_is_little_endian()) {
      out_.write(reinterpret_cast<const char*>(px.data()),
                 static_cast<std::streamsize>(px.size() * sizeof(float)));
    } else {
      for (const float v : px) detail::put_f32(out_, v);
    }
    if (!out_) throw write_error("failed writing frame to " + path_, count_);
    ++count_;
  }

  void close() {
    out_.flush();
    if (!out_) throw write_error("failed flushing " + path_, count_);
    out_.close();
  }

  std::uint64_t count() const noexcept { return count_; }

 private:
  std::ofstream out_;
  std::string path_;
  std::uint64_t count_ = 0;
};

class reader {
 public:
  explicit reader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw error("cannot open " + path);
    char magic[4];
    std::uint32_t ver = 0, ch = 0, h = 0, w = 0;
    std::uint8_t dtype = 0;
    char reserved[11];
    if (!in_.read(magic, 4) || std::string(magic, 4) != "HI2F") {
      throw parse_error("HI2F: bad magic");
    }
    if (!detail::get_le(in_, ver) || ver != version) {
      throw parse_error("HI2F: unsupported version " + std::to_string(ver));
    }
    if (!detail::get_le(in_, ch) || !detail::get_le(in_, h) ||
        !detail::get_le(in_, w) || ch != frame_channels || h != frame_side ||
        w != frame_side) {
      throw parse_error("HI2F: unsupported frame geometry");
    }
    if (!detail::get_le(in_, dtype) || dtype != dtype_f32) {
      throw parse_error("HI2F: unsupported dtype");
    }
    if (!in_.read(reserved, sizeof(reserved))) {
      throw parse_error("HI2F: truncated header");
    }
  }

  std::optional<record> next() {
    std::uint64_t ts = 0;
    if (!detail::get_le(in_, ts)) {
      if (in_.gcount() == 0 && in_.eof()) return std::nullopt;
      truncated();
    }
    std::uint8_t label = 0;
    if (!detail::get_le(in_, label)) truncated();
    if (label > 1) {
      throw parse_error("HI2F: frame " + std::to_string(count_) +
                        " has label " + std::to_string(label));
    }
    std::vector<float> px(frame_values);
    if (!in_.read(reinterpret_cast<char*>(px.data()),
                  static_cast<std::streamsize>(px.size() * sizeof(float)))) {
      truncated();
    }
    if (!detail::host_is_little_endian()) {
      for (auto& v : px) {
        auto bits = std::bit_cast<std::uint32_t>(v);
        bits = __builtin_bswap32(bits);
        v = std::bit_cast<float>(bits);
      }
    }
    ++count_;
    return record{ts, label, image_frame(std::move(px))};
  }

  std::uint64_t count() const noexcept { return count_; }

 private:
  [[noreturn]] void truncated() const {
    throw parse_error(
        "HI2F: truncated frame after " + std::to_string(count_) +
        " complete frames" +
        (count_ ? " (last complete frame index " + std::to_string(count_ - 1) + ")"
                : std::string()));
  }

  std::ifstream in_;
  std::uint64_t count_ = 0;
};

}  // namespace hi2f
}  // namespace hi2
