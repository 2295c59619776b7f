#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "shapeconf/cones.hpp"
#include "shapeconf/sequence.hpp"

namespace shapeconf {

/// Gaussian noise level, assumed known.
struct NoiseModel {
  double sigma = 1.0;

  explicit NoiseModel(double s) : sigma(s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("noise sigma must be positive and finite");
  }
};

/// Risk constant of the isotonic least-squares estimator used by the
/// total-variation radius.
inline constexpr double kDefaultKappa = 3.6;

namespace detail {

inline void check_common(std::size_t n, double sigma, double alpha) {
  if (n == 0) throw DomainError("n must be positive");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be positive and finite");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

}  // namespace detail

/// Squared radius (per-coordinate units) of the isotonic confidence ball:
/// sigma^2 * k_hat * (2 + 22 ln n + 10 ln(1/alpha)) / n.
inline double radius_isotonic(std::size_t k_hat, std::size_t n, double sigma, double alpha) {
  detail::check_common(n, sigma, alpha);
  if (k_hat == 0 || k_hat > n) throw DomainError("radius_isotonic: k_hat must lie in [1, n]");
  const double nd = static_cast<double>(n);
  return sigma * sigma * static_cast<double>(k_hat) * (2.0 + 22.0 * std::log(nd) + 10.0 * std::log(1.0 / alpha)) / nd;
}

/// Squared radius of the convex-regression confidence ball:
/// sigma^2 * q_hat * (20 + 40 ln n + 10 ln(1/alpha)) / n.
inline double radius_convex(std::size_t q_hat, std::size_t n, double sigma, double alpha) {
  detail::check_common(n, sigma, alpha);
  const std::size_t max_q = n >= 3 ? n - 1 : 1;
  if (q_hat == 0 || q_hat > max_q) throw DomainError("radius_convex: q_hat out of range");
  const double nd = static_cast<double>(n);
  return sigma * sigma * static_cast<double>(q_hat) * (20.0 + 40.0 * std::log(nd) + 10.0 * std::log(1.0 / alpha)) / nd;
}

/// Loss bound for isotonic regression driven by the estimated total variation:
///
///   2 k^2 s^2 ((V + 2 s sqrt(ln(1/a))) / (s n))^(2/3) + (2 k^2 s^2 ln(e n) + 4 s^2 ln(1/a)) / n
///
/// with k = kappa, s = sigma, a = alpha. Negative V is treated as 0.
inline double radius_tv(double v_hat, std::size_t n, double sigma, double alpha, double kappa = kDefaultKappa) {
  detail::check_common(n, sigma, alpha);
  if (std::isnan(v_hat)) throw DomainError("radius_tv: v_hat is NaN");
  if (!(kappa > 0.0)) throw DomainError("radius_tv: kappa must be positive");
  const double nd = static_cast<double>(n);
  const double log_inv_alpha = std::log(1.0 / alpha);
  const double k2s2 = kappa * kappa * sigma * sigma;
  const double ratio = (std::max(v_hat, 0.0) + 2.0 * sigma * std::sqrt(log_inv_alpha)) / (sigma * nd);
  return 2.0 * k2s2 * std::cbrt(ratio * ratio) +
         (2.0 * k2s2 * (1.0 + std::log(nd)) + 4.0 * sigma * sigma * log_inv_alpha) / nd;
}

/// y_n - y_1.
inline double estimate_total_variation(std::span<const double> y) {
  if (y.empty()) throw DomainError("estimate_total_variation: empty sequence");
  return y.back() - y.front();
}

/// Closed ball { v : (1/n)||center - v||^2 <= squared_radius } around the
/// least-squares fit.
struct ConfidenceBall {
  Sequence center;
  double squared_radius = 0.0;
  double alpha = 0.05;
  /// 1 - alpha, or 1 - 2 alpha when the total-variation radius is combined in.
  double nominal_coverage = 0.95;
  ConeKind cone = ConeKind::MonotoneNondecreasing;
  /// k_hat or q_hat of the center.
  std::size_t pieces = 0;
  /// Radius from the piece count alone.
  double piece_radius = 0.0;
  /// Set only when the total-variation combination is used.
  std::optional<double> total_variation;
  std::optional<double> tv_radius;
};

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

/// Projects y onto the cone and attaches the data-driven radius. With
/// use_tv_combination (monotone cones only) the radius is the minimum of the
/// piece-count and total-variation radii, each at level alpha, which
/// guarantees coverage 1 - 2 alpha.
inline ConfidenceBall confidence_ball(const Sequence& y, ConeKind cone, const NoiseModel& noise, double alpha,
                                      bool use_tv_combination = false) {
  check_alpha(alpha);
  if (use_tv_combination && !is_monotone(cone)) {
    throw DomainError("total-variation combination is only defined for monotone cones");
  }
  ConfidenceBall ball;
  ball.cone = cone;
  ball.alpha = alpha;
  ball.center = project(cone, y);
  ball.pieces = piece_count(cone, ball.center).count;
  const std::size_t n = y.size();
  ball.piece_radius = is_monotone(cone) ? radius_isotonic(ball.pieces, n, noise.sigma, alpha)
                                        : radius_convex(ball.pieces, n, noise.sigma, alpha);
  ball.squared_radius = ball.piece_radius;
  ball.nominal_coverage = 1.0 - alpha;
  if (use_tv_combination) {
    const double v = estimate_total_variation(y);
    ball.total_variation = is_negated(cone) ? -v : v;
    ball.tv_radius = radius_tv(*ball.total_variation, n, noise.sigma, alpha);
    ball.squared_radius = std::min(ball.piece_radius, *ball.tv_radius);
    ball.nominal_coverage = 1.0 - 2.0 * alpha;
  }
  return ball;
}

inline bool contains(const ConfidenceBall& ball, std::span<const double> mu) {
  if (mu.size() != ball.center.size()) throw DomainError("contains: length mismatch");
  return scaled_squared_distance(ball.center, mu) <= ball.squared_radius;
}

}  // namespace shapeconf
