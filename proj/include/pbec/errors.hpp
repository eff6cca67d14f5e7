#pragma once

#include <stdexcept>
#include <string>

namespace pbec {

enum class ErrorKind {
  kValidation,
  kContract,
  kFormat,
  kConvergence,
  kTruncation,
  kVerification,
  kResource,
};

// Base error for everything the library throws on purpose. The kind maps onto
// CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error validation_error(const std::string& what) {
  return Error(ErrorKind::kValidation, what);
}
inline Error contract_error(const std::string& what) {
  return Error(ErrorKind::kContract, what);
}
inline Error format_error(const std::string& what) {
  return Error(ErrorKind::kFormat, what);
}

}  // namespace pbec
