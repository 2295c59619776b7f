#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace shapeconf {

/// Ordered observations or fitted values on the implicit grid 1..n.
using Sequence = std::vector<double>;

/// Thrown when an argument is outside the operation's domain
/// (non-finite data, alpha outside (0,1), a > b, length mismatch, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative solver fails to terminate.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, std::size_t iterations)
      : std::runtime_error(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}

  std::size_t iterations() const noexcept { return iterations_; }

 private:
  std::size_t iterations_;
};

template <typename Real>
void require_finite(std::span<const Real> values, const char* what) {
  if (values.empty()) {
    throw DomainError(std::string(what) + ": empty sequence");
  }
  for (const Real v : values) {
    if (!std::isfinite(v)) {
      throw DomainError(std::string(what) + ": non-finite entry");
    }
  }
}

/// Tolerance used to decide that two fitted values (or a second difference)
/// are zero: 1e-9 * (1 + max|u_i|).
template <typename Real>
Real tie_tolerance(std::span<const Real> values) {
  Real scale = 0;
  for (const Real v : values) scale = std::max(scale, std::abs(v));
  return Real(1e-9) * (Real(1) + scale);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("squared_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Mean-square distance (1/n) * sum (a_i - b_i)^2.
inline double scaled_squared_distance(std::span<const double> a, std::span<const double> b) {
  return squared_distance(a, b) / static_cast<double>(a.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace shapeconf
