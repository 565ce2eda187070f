#pragma once

#include <stdexcept>
#include <string>

namespace steerlab {

enum class ErrorKind {
  kDimension,
  kInput,
  kLength,
  kDegenerate,
  kDoubleBackward,
  kConfig,
  kIo,
  kNumeric,
  kNotFound,
};

// Every error raised by the library carries a kind so the C API can map it
// onto a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error dimension_error(const std::string& what) {
  return Error(ErrorKind::kDimension, what);
}
inline Error input_error(const std::string& what) {
  return Error(ErrorKind::kInput, what);
}
inline Error length_error(const std::string& what) {
  return Error(ErrorKind::kLength, what);
}
inline Error degenerate_error(const std::string& what) {
  return Error(ErrorKind::kDegenerate, what);
}
inline Error config_error(const std::string& what) {
  return Error(ErrorKind::kConfig, what);
}
inline Error io_error(const std::string& what) {
  return Error(ErrorKind::kIo, what);
}
inline Error numeric_error(const std::string& what) {
  return Error(ErrorKind::kNumeric, what);
}
inline Error not_found_error(const std::string& what) {
  return Error(ErrorKind::kNotFound, what);
}

}  // namespace steerlab
