#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shapeconf/sequence.hpp"

namespace shapeconf {

enum class ConeKind {
  MonotoneNondecreasing,
  MonotoneNonincreasing,
  Convex,
  Concave,
};

constexpr bool is_monotone(ConeKind kind) {
  return kind == ConeKind::MonotoneNondecreasing || kind == ConeKind::MonotoneNonincreasing;
}

/// Nonincreasing and Concave are handled as the negation of their partner cone.
constexpr bool is_negated(ConeKind kind) {
  return kind == ConeKind::MonotoneNonincreasing || kind == ConeKind::Concave;
}

inline std::string_view to_string(ConeKind kind) {
  switch (kind) {
    case ConeKind::MonotoneNondecreasing: return "isotonic";
    case ConeKind::MonotoneNonincreasing: return "antitonic";
    case ConeKind::Convex: return "convex";
    case ConeKind::Concave: return "concave";
  }
  return "unknown";
}

inline ConeKind parse_cone(std::string_view name) {
  if (name == "isotonic" || name == "increasing" || name == "nondecreasing") {
    return ConeKind::MonotoneNondecreasing;
  }
  if (name == "antitonic" || name == "decreasing" || name == "nonincreasing") {
    return ConeKind::MonotoneNonincreasing;
  }
  if (name == "convex") return ConeKind::Convex;
  if (name == "concave") return ConeKind::Concave;
  throw DomainError("unknown cone '" + std::string(name) + "'");
}

/// Half-open index range [begin, end) on the 0-based grid.
struct PieceRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const PieceRange&) const = default;
};

/// Ordered, contiguous partition of 0..n-1 into maximal constant (monotone)
/// or affine (convex) runs.
struct PiecewiseStructure {
  std::vector<PieceRange> pieces;

  std::size_t piece_count() const { return pieces.size(); }

  /// First index of every piece after the first.
  std::vector<std::size_t> breakpoints() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 1; j < pieces.size(); ++j) out.push_back(pieces[j].begin);
    return out;
  }
};

struct PieceCount {
  std::size_t count = 0;
  PiecewiseStructure structure;
};

// ---------------------------------------------------------------------------
// Monotone cone
// ---------------------------------------------------------------------------

/// Euclidean projection onto the nondecreasing sequences (pool adjacent
/// violators, one left-to-right pass with a block stack).
template <typename Real>
std::vector<Real> isotonic_projection(std::span<const Real> y) {
  require_finite(y, "isotonic_projection");

  struct Block {
    Real sum;
    std::size_t count;
    Real mean() const { return sum / static_cast<Real>(count); }
  };
  std::vector<Block> stack;
  stack.reserve(y.size());
  for (const Real v : y) {
    stack.push_back({v, 1});
    while (stack.size() > 1 && stack[stack.size() - 2].mean() >= stack.back().mean()) {
      const Block top = stack.back();
      stack.pop_back();
      stack.back().sum += top.sum;
      stack.back().count += top.count;
    }
  }

  std::vector<Real> out;
  out.reserve(y.size());
  for (const Block& b : stack) out.insert(out.end(), b.count, b.mean());
  return out;
}

inline Sequence isotonic_projection(const Sequence& y) {
  return isotonic_projection<double>(std::span<const double>(y));
}

/// Projection onto { v nondecreasing : lower <= v_1, v_n <= upper }. Either
/// bound may be infinite. Computed by clipping the unconstrained isotonic fit,
/// which is exact for this constraint set.
template <typename Real>
std::vector<Real> bounded_isotonic_projection(std::span<const Real> y, Real lower, Real upper) {
  if (std::isnan(lower) || std::isnan(upper)) throw DomainError("bounded_isotonic_projection: NaN bound");
  if (lower > upper) throw DomainError("bounded_isotonic_projection: lower bound exceeds upper bound");
  if (lower == std::numeric_limits<Real>::infinity() || upper == -std::numeric_limits<Real>::infinity()) {
    throw DomainError("bounded_isotonic_projection: empty constraint set");
  }
  require_finite(y, "bounded_isotonic_projection");
  if (lower == upper) return std::vector<Real>(y.size(), lower);

  std::vector<Real> theta = isotonic_projection(y);
  for (Real& v : theta) {
    if (v <= lower) {
      v = lower;
    } else if (v >= upper) {
      v = upper;
    }
  }
  return theta;
}

inline Sequence bounded_isotonic_projection(const Sequence& y, double lower, double upper) {
  return bounded_isotonic_projection<double>(std::span<const double>(y), lower, upper);
}

/// Number of maximal constant runs of a nondecreasing sequence, which is the
/// number of distinct values k(u).
template <typename Real>
PieceCount piece_count_monotone(std::span<const Real> u) {
  require_finite(u, "piece_count_monotone");
  const Real tol = tie_tolerance(u);
  PieceCount result;
  std::size_t start = 0;
  for (std::size_t i = 1; i < u.size(); ++i) {
    const Real step = u[i] - u[i - 1];
    if (step < -tol) throw DomainError("piece_count_monotone: sequence is not nondecreasing");
    if (step > tol) {
      result.structure.pieces.push_back({start, i});
      start = i;
    }
  }
  result.structure.pieces.push_back({start, u.size()});
  result.count = result.structure.piece_count();
  return result;
}

inline PieceCount piece_count_monotone(const Sequence& u) {
  return piece_count_monotone<double>(std::span<const double>(u));
}

// ---------------------------------------------------------------------------
// Convex cone
// ---------------------------------------------------------------------------

struct ConvexSolverOptions {
  /// 0 selects the default cap of 10 * n.
  std::size_t max_iterations = 0;
  /// Interior knots (0-based, in 1..n-2) to start the active set from.
  std::vector<std::size_t> warm_start_knots;
};

template <typename Real>
struct ConvexFit {
  std::vector<Real> fitted;
  /// Knots j with a strictly positive slope increment u_{j+1} - 2u_j + u_{j-1}.
  std::vector<std::size_t> knots;
  std::size_t iterations = 0;
};

namespace detail {

// Least squares in the span of {1, i - center, (i - j)_+ for j in knots}.
// Returns the coefficients (intercept, slope, knot weights...).
template <typename Real>
Eigen::Matrix<Real, Eigen::Dynamic, 1> hinge_least_squares(std::span<const Real> y,
                                                           const std::vector<std::size_t>& knots) {
  using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto p = static_cast<Eigen::Index>(knots.size()) + 2;
  const Real center = static_cast<Real>(y.size() - 1) / 2;
  Matrix design(n, p);
  Vector rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Real t = static_cast<Real>(i);
    design(i, 0) = 1;
    design(i, 1) = t - center;
    for (std::size_t k = 0; k < knots.size(); ++k) {
      design(i, static_cast<Eigen::Index>(k) + 2) = std::max(Real(0), t - static_cast<Real>(knots[k]));
    }
    rhs(i) = y[static_cast<std::size_t>(i)];
  }
  return design.colPivHouseholderQr().solve(rhs);
}

template <typename Real>
std::vector<Real> hinge_evaluate(std::size_t n, const std::vector<std::size_t>& knots,
                                 const Eigen::Matrix<Real, Eigen::Dynamic, 1>& coef) {
  const Real center = static_cast<Real>(n - 1) / 2;
  std::vector<Real> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real t = static_cast<Real>(i);
    Real v = coef(0) + coef(1) * (t - center);
    for (std::size_t k = 0; k < knots.size(); ++k) {
      v += coef(static_cast<Eigen::Index>(k) + 2) * std::max(Real(0), t - static_cast<Real>(knots[k]));
    }
    out[i] = v;
  }
  return out;
}

}  // namespace detail

/// Projection onto the convex sequences (u_{i+1} - 2u_i + u_{i-1} >= 0).
///
/// Every convex sequence is a + b*i + sum_j c_j (i - j)_+ with c_j >= 0, so the
/// projection is a nonnegative least-squares problem over the hinge
/// generators with a free affine part. Solved with the Lawson–Hanson active
/// set method; each outer iteration adds one knot, so the cost is driven by
/// the number of affine pieces of the fit rather than by n.
template <typename Real>
ConvexFit<Real> convex_fit(std::span<const Real> y, const ConvexSolverOptions& options = {}) {
  require_finite(y, "convex_projection");
  const std::size_t n = y.size();
  ConvexFit<Real> fit;
  if (n <= 2) {
    fit.fitted.assign(y.begin(), y.end());
    return fit;
  }
  const std::size_t cap = options.max_iterations == 0 ? 10 * n : options.max_iterations;

  Real y_norm = 0;
  for (const Real v : y) y_norm += v * v;
  const Real grad_tol = Real(1e-10) * (Real(1) + std::sqrt(y_norm));

  std::vector<std::size_t> passive;
  for (const std::size_t j : options.warm_start_knots) {
    if (j >= 1 && j + 1 < n) passive.push_back(j);
  }
  std::sort(passive.begin(), passive.end());
  passive.erase(std::unique(passive.begin(), passive.end()), passive.end());

  auto coef = detail::hinge_least_squares(y, passive);
  std::size_t iterations = 0;

  // Warm start: shed knots until the least-squares solution is feasible.
  for (;;) {
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < passive.size(); ++k) {
      if (coef(static_cast<Eigen::Index>(k) + 2) > 0) kept.push_back(passive[k]);
    }
    if (kept.size() == passive.size()) break;
    passive = std::move(kept);
    coef = detail::hinge_least_squares(y, passive);
    if (++iterations > cap) throw NumericalFailure("convex_projection: warm start did not settle", iterations);
  }

  std::vector<char> in_passive(n, 0);
  for (const std::size_t j : passive) in_passive[j] = 1;

  for (;;) {
    std::vector<Real> u = detail::hinge_evaluate(n, passive, coef);

    // Gradient of the hinge columns: g_j = sum_{i>j} (i - j) r_i, normalised by
    // the column norm. Suffix sums give all of them in O(n).
    std::size_t best = 0;
    Real best_value = grad_tol;
    Real tail_sum = 0;
    Real tail_moment = 0;
    for (std::size_t j = n - 1; j >= 1; --j) {
      const Real r = y[j] - u[j];
      tail_sum += r;
      tail_moment += static_cast<Real>(j) * r;
      const std::size_t knot = j - 1;
      if (knot >= 1 && !in_passive[knot]) {
        const Real g = tail_moment - static_cast<Real>(knot) * tail_sum;
        const Real m = static_cast<Real>(n - 1 - knot);
        const Real col_norm = std::sqrt(m * (m + 1) * (2 * m + 1) / 6);
        if (g / col_norm > best_value) {
          best_value = g / col_norm;
          best = knot;
        }
      }
    }
    if (best == 0) {
      fit.fitted = std::move(u);
      break;
    }

    std::vector<std::size_t> trial = passive;
    trial.insert(std::upper_bound(trial.begin(), trial.end(), best), best);
    // Current coefficients extended with a zero weight on the new knot.
    Eigen::Matrix<Real, Eigen::Dynamic, 1> x(static_cast<Eigen::Index>(trial.size()) + 2);
    x(0) = coef(0);
    x(1) = coef(1);
    for (std::size_t k = 0, src = 0; k < trial.size(); ++k) {
      x(static_cast<Eigen::Index>(k) + 2) = trial[k] == best ? Real(0) : coef(static_cast<Eigen::Index>(src++) + 2);
    }

    auto z = detail::hinge_least_squares(y, trial);
    const auto best_pos = static_cast<Eigen::Index>(std::lower_bound(trial.begin(), trial.end(), best) - trial.begin()) + 2;
    if (!(z(best_pos) > 0)) {
      // The entering gradient was rounding noise; the current point is optimal.
      fit.fitted = std::move(u);
      break;
    }

    // Inner loop: step back toward feasibility until every weight is positive.
    for (;;) {
      if (++iterations > cap) throw NumericalFailure("convex_projection: active set did not converge", iterations);
      Real step = 1;
      Eigen::Index blocking = -1;
      for (Eigen::Index k = 2; k < z.size(); ++k) {
        if (z(k) > 0) continue;
        const Real denom = x(k) - z(k);
        const Real ratio = denom > 0 ? x(k) / denom : Real(0);
        if (blocking < 0 || ratio < step) {
          step = ratio;
          blocking = k;
        }
      }
      if (blocking < 0) break;
      x = x + step * (z - x);
      x(blocking) = 0;

      std::vector<std::size_t> kept;
      std::vector<Real> kept_weights;
      for (std::size_t k = 0; k < trial.size(); ++k) {
        const Real w = x(static_cast<Eigen::Index>(k) + 2);
        if (w > 0) {
          kept.push_back(trial[k]);
          kept_weights.push_back(w);
        }
      }
      Eigen::Matrix<Real, Eigen::Dynamic, 1> shrunk(static_cast<Eigen::Index>(kept.size()) + 2);
      shrunk(0) = x(0);
      shrunk(1) = x(1);
      for (std::size_t k = 0; k < kept.size(); ++k) shrunk(static_cast<Eigen::Index>(k) + 2) = kept_weights[k];
      x = std::move(shrunk);
      trial = std::move(kept);
      z = detail::hinge_least_squares(y, trial);
    }

    passive = std::move(trial);
    coef = std::move(z);
    std::fill(in_passive.begin(), in_passive.end(), 0);
    for (const std::size_t j : passive) in_passive[j] = 1;
    if (++iterations > cap) throw NumericalFailure("convex_projection: active set did not converge", iterations);
  }

  fit.knots = std::move(passive);
  fit.iterations = iterations;
  return fit;
}

template <typename Real>
std::vector<Real> convex_projection(std::span<const Real> y) {
  return convex_fit(y).fitted;
}

inline Sequence convex_projection(const Sequence& y) {
  return convex_projection<double>(std::span<const double>(y));
}

/// q(u): 1 + number of strictly positive second differences, with the
/// structure's pieces closed at each such knot. q = 1 for n <= 2.
template <typename Real>
PieceCount piece_count_convex(std::span<const Real> u) {
  require_finite(u, "piece_count_convex");
  const Real tol = tie_tolerance(u);
  PieceCount result;
  std::size_t start = 0;
  for (std::size_t i = 1; i + 1 < u.size(); ++i) {
    const Real second = u[i + 1] - 2 * u[i] + u[i - 1];
    if (second < -tol) throw DomainError("piece_count_convex: sequence is not convex");
    if (second > tol) {
      result.structure.pieces.push_back({start, i + 1});
      start = i + 1;
    }
  }
  result.structure.pieces.push_back({start, u.size()});
  result.count = result.structure.piece_count();
  return result;
}

inline PieceCount piece_count_convex(const Sequence& u) {
  return piece_count_convex<double>(std::span<const double>(u));
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

template <typename Real>
std::vector<Real> project(ConeKind kind, std::span<const Real> y) {
  if (!is_negated(kind)) {
    return is_monotone(kind) ? isotonic_projection(y) : convex_projection(y);
  }
  std::vector<Real> flipped(y.size());
  std::transform(y.begin(), y.end(), flipped.begin(), [](Real v) { return -v; });
  std::vector<Real> out = is_monotone(kind) ? isotonic_projection(std::span<const Real>(flipped))
                                            : convex_projection(std::span<const Real>(flipped));
  for (Real& v : out) v = -v;
  return out;
}

inline Sequence project(ConeKind kind, const Sequence& y) {
  return project<double>(kind, std::span<const double>(y));
}

/// Piece count of a cone element, with the sign flip applied for the negated cones.
inline PieceCount piece_count(ConeKind kind, const Sequence& u) {
  if (!is_negated(kind)) return is_monotone(kind) ? piece_count_monotone(u) : piece_count_convex(u);
  Sequence flipped(u.size());
  std::transform(u.begin(), u.end(), flipped.begin(), [](double v) { return -v; });
  return is_monotone(kind) ? piece_count_monotone(flipped) : piece_count_convex(flipped);
}

}  // namespace shapeconf
