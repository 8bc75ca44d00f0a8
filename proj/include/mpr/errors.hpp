#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mpr {

/// Corrupt or truncated file; offset is the byte position of the defect.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, uint64_t offset)
      : std::runtime_error(what + " (offset " + std::to_string(offset) + ")"), offset_(offset) {}
  uint64_t offset() const { return offset_; }

 private:
  uint64_t offset_;
};

/// Non-finite loss during training; epoch is where it happened.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace mpr
