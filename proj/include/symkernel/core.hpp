#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace symkernel {

using Real = double;
using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kPi = std::numbers::pi;

enum class ErrorKind {
  InvalidArgument,
  InvalidOrder,
  UnsupportedGroup,
  Dimension,
  SingularKernel,
  StationarityViolation,
  Size,
  DegenerateNyquist,
  Underdetermined,
  IllConditioned,
  NotPositiveSemidefinite,
  Format,
  Length,
  ZeroNorm,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::InvalidOrder: return "invalid-order";
    case ErrorKind::UnsupportedGroup: return "unsupported-group";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::SingularKernel: return "singular-kernel";
    case ErrorKind::StationarityViolation: return "stationarity-violation";
    case ErrorKind::Size: return "size";
    case ErrorKind::DegenerateNyquist: return "degenerate-nyquist";
    case ErrorKind::Underdetermined: return "underdetermined";
    case ErrorKind::IllConditioned: return "ill-conditioned";
    case ErrorKind::NotPositiveSemidefinite: return "not-psd";
    case ErrorKind::Format: return "format";
    case ErrorKind::Length: return "length";
    case ErrorKind::ZeroNorm: return "zero-norm";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Base error for every failure raised by the library. `kind()` identifies the
/// failure class; `value()` carries the numeric payload some kinds attach
/// (offending irrep index, max deviation, condition estimate).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, double value = 0.0)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), value_(value) {}

  ErrorKind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }

 private:
  ErrorKind kind_;
  double value_;
};

class SingularKernelError : public Error {
 public:
  SingularKernelError(std::size_t irrep_index, double rcond)
      : Error(ErrorKind::SingularKernel,
              "Fourier block of irrep " + std::to_string(irrep_index) +
                  " is singular (rcond=" + std::to_string(rcond) + ")",
              rcond),
        irrep_index_(irrep_index) {}

  std::size_t irrep_index() const noexcept { return irrep_index_; }

 private:
  std::size_t irrep_index_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what, double value = 0.0) {
  if (!cond) throw Error(kind, what, value);
}

/// Max absolute entry of a matrix; 0 for empty.
inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace symkernel
