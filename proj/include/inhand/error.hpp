#pragma once

#include <stdexcept>
#include <string>

namespace inhand {

enum class ErrorCode {
  invalid_argument,
  invalid_depth,
  behind_camera,
  invalid_rotation,
  empty_cloud,
  scale_unavailable,
  no_candidates,
  joint_limit,
  numerical_failure,
  io_error,
  parse_error,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::invalid_depth: return "invalid_depth";
    case ErrorCode::behind_camera: return "behind_camera";
    case ErrorCode::invalid_rotation: return "invalid_rotation";
    case ErrorCode::empty_cloud: return "empty_cloud";
    case ErrorCode::scale_unavailable: return "scale_unavailable";
    case ErrorCode::no_candidates: return "no_candidates";
    case ErrorCode::joint_limit: return "joint_limit";
    case ErrorCode::numerical_failure: return "numerical_failure";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::parse_error: return "parse_error";
  }
  return "unknown";
}

/// Library-wide exception carrying a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace inhand
