#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hi2 {

class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; message names the row/line and column where known.
class parse_error : public error {
 public:
  using error::error;
};

// Non-finite activations or gradients inside the learner.
class divergence_error : public error {
 public:
  divergence_error(const std::string& what, std::uint64_t timestep)
      : error(what + " at timestep " + std::to_string(timestep)),
        timestep_(timestep) {}

  std::uint64_t timestep() const noexcept { return timestep_; }

 private:
  std::uint64_t timestep_;
};

// Raised by writers; carries how many frames made it out before the failure.
class write_error : public error {
 public:
  write_error(const std::string& what, std::uint64_t frames_written)
      : error(what + " (" + std::to_string(frames_written) +
              " frames written)"),
        frames_written_(frames_written) {}

  std::uint64_t frames_written() const noexcept { return frames_written_; }

 private:
  std::uint64_t frames_written_;
};

}  // namespace hi2
