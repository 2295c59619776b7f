#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "shapeconf/cones.hpp"
#include "shapeconf/parallel.hpp"
#include "shapeconf/sequence.hpp"

namespace shapeconf {

/// Monte Carlo estimate of the statistical dimension E||Pi_K(g)||^2.
struct DimensionEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
};

/// One standard Gaussian draw g pushed through the projection.
struct ProjectionSample {
  double squared_norm = 0.0;  // ||Pi(g)||^2
  double inner = 0.0;         // g^T Pi(g)
  std::size_t face_dimension = 0;
};

/// Face dimensions hit by the projections of independent Gaussian draws, in
/// replicate order.
struct FaceDimensionSample {
  std::vector<std::size_t> dimensions;
  std::size_t n = 0;

  double mean() const {
    double s = 0.0;
    for (const std::size_t d : dimensions) s += static_cast<double>(d);
    return dimensions.empty() ? 0.0 : s / static_cast<double>(dimensions.size());
  }
};

/// The n-th harmonic number, which is the statistical dimension of the
/// monotone cone in R^n.
inline double statistical_dimension_exact_isotonic(std::size_t n) {
  if (n == 0) throw DomainError("statistical_dimension_exact_isotonic: n must be positive");
  double h = 0.0;
  for (std::size_t k = n; k >= 1; --k) h += 1.0 / static_cast<double>(k);
  return h;
}

/// Dimension of the face whose relative interior contains the projection u.
/// Monotone cone: the number of constant pieces. Convex cone: q(u) + 1,
/// capped at n.
inline std::size_t face_dimension(ConeKind kind, const Sequence& u) {
  const std::size_t pieces = piece_count(kind, u).count;
  if (is_monotone(kind)) return pieces;
  return std::min(pieces + 1, u.size());
}

/// Mean and standard error of a list of values.
template <typename Range, typename Proj>
std::pair<double, double> mean_and_se(const Range& values, Proj proj) {
  const auto count = static_cast<double>(std::size(values));
  double mean = 0.0;
  for (const auto& v : values) mean += proj(v);
  mean /= count;
  double ss = 0.0;
  for (const auto& v : values) {
    const double d = proj(v) - mean;
    ss += d * d;
  }
  const double var = count > 1 ? ss / (count - 1) : 0.0;
  return {mean, std::sqrt(var / count)};
}

/// Draws `replicates` standard Gaussian vectors from per-replicate streams,
/// projects them and records the squared norm, g^T Pi(g) and the face
/// dimension. Verifies ||Pi(g)||^2 = g^T Pi(g) on every draw.
inline std::vector<ProjectionSample> sample_gaussian_projections(ConeKind kind, std::size_t n, std::size_t replicates,
                                                                 std::uint64_t seed, unsigned workers = 1) {
  if (n == 0) throw DomainError("n must be positive");
  std::vector<ProjectionSample> samples(replicates);
  parallel_for(replicates, workers, [&](std::size_t r) {
    try {
      auto gen = replicate_stream(seed, StreamTag::Geometry, r);
      Sequence g(n);
      fill_gaussian(gen, g);
      const Sequence p = project(kind, g);
      ProjectionSample& s = samples[r];
      s.squared_norm = dot(p, p);
      s.inner = dot(g, p);
      if (std::abs(s.squared_norm - s.inner) > 1e-8 * (1.0 + dot(g, g))) {
        throw NumericalFailure("projection violates ||Pi(g)||^2 = g'Pi(g)", 0);
      }
      s.face_dimension = face_dimension(kind, p);
    } catch (const NumericalFailure& e) {
      throw ReplicateFailure(r, e.what(), true);
    } catch (const std::exception& e) {
      throw ReplicateFailure(r, e.what(), false);
    }
  });
  return samples;
}

inline DimensionEstimate statistical_dimension_mc(ConeKind kind, std::size_t n, std::size_t replicates,
                                                  std::uint64_t seed, unsigned workers = 1) {
  if (replicates < 2) throw DomainError("statistical_dimension_mc: need at least 2 replicates");
  const auto samples = sample_gaussian_projections(kind, n, replicates, seed, workers);
  const auto [mean, se] = mean_and_se(samples, [](const ProjectionSample& s) { return s.squared_norm; });
  return {mean, se, replicates, seed};
}

inline FaceDimensionSample sample_face_dimensions(ConeKind kind, std::size_t n, std::size_t replicates,
                                                  std::uint64_t seed, unsigned workers = 1) {
  if (replicates < 1) throw DomainError("sample_face_dimensions: need at least 1 replicate");
  const auto samples = sample_gaussian_projections(kind, n, replicates, seed, workers);
  FaceDimensionSample out;
  out.n = n;
  out.dimensions.reserve(replicates);
  for (const auto& s : samples) out.dimensions.push_back(s.face_dimension);
  return out;
}

/// Empirical tail frequency against an exponential-type bound.
struct TailCheck {
  double parameter = 0.0;  // x or alpha
  double threshold = 0.0;  // level the statistic is compared against
  double frequency = 0.0;  // empirical P(statistic exceeds threshold)
  double bound = 0.0;      // claimed upper bound on that probability
  double std_error = 0.0;  // binomial SE at the bound
  bool violated = false;   // frequency > bound + 3 SE
};

inline double binomial_se(double p, std::size_t trials) {
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(trials));
}

/// For each x: frequency of V_K - delta >= 2 sqrt(x delta) + 6x versus e^{-x}.
inline std::vector<TailCheck> check_concentration_vk(const FaceDimensionSample& sample, double delta,
                                                     const std::vector<double>& x_values) {
  if (!(delta > 0.0)) throw DomainError("check_concentration_vk: delta must be positive");
  if (sample.dimensions.empty()) throw DomainError("check_concentration_vk: empty sample");
  std::vector<TailCheck> rows;
  for (const double x : x_values) {
    if (!(x > 0.0)) throw DomainError("check_concentration_vk: x must be positive");
    TailCheck row;
    row.parameter = x;
    row.threshold = delta + 2.0 * std::sqrt(x * delta) + 6.0 * x;
    std::size_t hits = 0;
    for (const std::size_t d : sample.dimensions) hits += static_cast<double>(d) >= row.threshold ? 1 : 0;
    row.frequency = static_cast<double>(hits) / static_cast<double>(sample.dimensions.size());
    row.bound = std::exp(-x);
    row.std_error = binomial_se(row.bound, sample.dimensions.size());
    row.violated = row.frequency > row.bound + 3.0 * row.std_error;
    rows.push_back(row);
  }
  return rows;
}

/// For each alpha: frequency of ||Pi(g)||^2 > 2 delta + 10 ln(1/alpha) versus alpha.
inline std::vector<TailCheck> check_concentration_norm(const std::vector<ProjectionSample>& samples, double delta,
                                                       const std::vector<double>& alphas) {
  if (samples.empty()) throw DomainError("check_concentration_norm: empty sample");
  std::vector<TailCheck> rows;
  for (const double alpha : alphas) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("check_concentration_norm: alpha must lie in (0, 1)");
    TailCheck row;
    row.parameter = alpha;
    row.threshold = 2.0 * delta + 10.0 * std::log(1.0 / alpha);
    std::size_t hits = 0;
    for (const auto& s : samples) hits += s.squared_norm > row.threshold ? 1 : 0;
    row.frequency = static_cast<double>(hits) / static_cast<double>(samples.size());
    row.bound = alpha;
    row.std_error = binomial_se(alpha, samples.size());
    row.violated = row.frequency > row.bound + 3.0 * row.std_error;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Divergence of the convex projection
// ---------------------------------------------------------------------------

struct DivergenceEstimate {
  /// sum_i d[Pi(point)]_i / d point_i, without any sigma^2 factor.
  double value = 0.0;
  /// Where the derivative was taken: y itself, or y plus a small jitter when
  /// y sat on a boundary between faces.
  Sequence point;
  std::size_t jitter_attempts = 0;
};

/// Central finite-difference divergence of the convex projection. step <= 0
/// selects 1e-6 * (1 + ||y||_inf). If some coordinate perturbation changes
/// the set of knots of the fit, y is not generic; it is then moved by a
/// seeded Gaussian jitter of scale 1e-3 and the estimate is retried.
inline DivergenceEstimate divergence_fd(const Sequence& y, double step = 0.0, std::uint64_t jitter_seed = 0x6a177e5,
                                        std::size_t max_attempts = 16) {
  require_finite(std::span<const double>(y), "divergence_fd");
  const std::size_t n = y.size();
  DivergenceEstimate result;
  result.point = y;
  for (std::size_t attempt = 0;; ++attempt) {
    const Sequence& point = result.point;
    double scale = 0.0;
    for (const double v : point) scale = std::max(scale, std::abs(v));
    const double h = step > 0.0 ? step : 1e-6 * (1.0 + scale);

    const auto base = convex_fit(std::span<const double>(point));
    ConvexSolverOptions warm;
    warm.warm_start_knots = base.knots;

    bool stable = true;
    double divergence = 0.0;
    Sequence shifted = point;
    for (std::size_t i = 0; i < n && stable; ++i) {
      shifted[i] = point[i] + h;
      const auto up = convex_fit(std::span<const double>(shifted), warm);
      shifted[i] = point[i] - h;
      const auto down = convex_fit(std::span<const double>(shifted), warm);
      shifted[i] = point[i];
      stable = up.knots == base.knots && down.knots == base.knots;
      divergence += (up.fitted[i] - down.fitted[i]) / (2.0 * h);
    }
    if (stable) {
      result.value = divergence;
      result.jitter_attempts = attempt;
      return result;
    }
    if (attempt + 1 >= max_attempts) {
      throw NumericalFailure("divergence_fd: no generic point found near y", attempt + 1);
    }
    auto gen = replicate_stream(jitter_seed, StreamTag::Jitter, attempt);
    Sequence noise(n);
    fill_gaussian(gen, noise, 1e-3);
    for (std::size_t i = 0; i < n; ++i) result.point[i] = y[i] + noise[i];
  }
}

}  // namespace shapeconf
