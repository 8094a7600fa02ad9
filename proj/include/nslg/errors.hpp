#pragma once

#include <stdexcept>
#include <string>

namespace nslg {

enum class ErrorKind { vacuum, degenerate_deformation, incompatible_deformation, non_gradient_mean, inconsistent, zero_magnetization };

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::vacuum: return "vacuum";
    case ErrorKind::degenerate_deformation: return "degenerate deformation";
    case ErrorKind::incompatible_deformation: return "incompatible deformation";
    case ErrorKind::non_gradient_mean: return "non-gradient constant part";
    case ErrorKind::inconsistent: return "compressibility link violated";
    case ErrorKind::zero_magnetization: return "zero magnetization";
  }
  return "unknown";
}

class ModelError : public std::runtime_error {
 public:
  ModelError(ErrorKind k, const std::string& detail)
      : std::runtime_error(std::string(to_string(k)) + ": " + detail), kind_(k) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace nslg
