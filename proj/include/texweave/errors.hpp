#pragma once

#include <stdexcept>
#include <string>

namespace texweave {

// Numeric values are mirrored by tw_status in texweave.h.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kDatasetLayout = 2,
  kIo = 3,
  kIntegrity = 4,
  kFingerprint = 5,
  kConfig = 6,
  kNumeric = 7,
  kUndefinedMetric = 8,
  kSynthesis = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace texweave
