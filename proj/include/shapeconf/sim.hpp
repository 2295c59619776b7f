#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shapeconf/cones.hpp"
#include "shapeconf/confidence.hpp"
#include "shapeconf/geometry.hpp"
#include "shapeconf/parallel.hpp"
#include "shapeconf/sequence.hpp"

namespace shapeconf {

enum class SignalFamily {
  PiecewiseConstantMonotone,
  PiecewiseAffineConvex,
  TVBoundedMonotone,
};

inline std::string_view to_string(SignalFamily family) {
  switch (family) {
    case SignalFamily::PiecewiseConstantMonotone: return "monotone";
    case SignalFamily::PiecewiseAffineConvex: return "convex";
    case SignalFamily::TVBoundedMonotone: return "tv";
  }
  return "unknown";
}

inline SignalFamily parse_signal_family(std::string_view name) {
  if (name == "monotone") return SignalFamily::PiecewiseConstantMonotone;
  if (name == "convex") return SignalFamily::PiecewiseAffineConvex;
  if (name == "tv") return SignalFamily::TVBoundedMonotone;
  throw DomainError("unknown signal family '" + std::string(name) + "'");
}

struct SignalSpec {
  SignalFamily family = SignalFamily::PiecewiseConstantMonotone;
  std::size_t n = 100;
  /// Number of constant (monotone, tv) or affine (convex) pieces.
  std::size_t complexity = 1;
  /// Jump between levels, slope increment at each knot, or total variation.
  double amplitude = 1.0;
  std::uint64_t seed = 0;
};

namespace detail {

// Sizes of `pieces` contiguous blocks covering n points, the first n % pieces
// blocks one longer than the rest.
inline std::vector<std::size_t> block_sizes(std::size_t n, std::size_t pieces) {
  std::vector<std::size_t> sizes(pieces, n / pieces);
  for (std::size_t j = 0; j < n % pieces; ++j) ++sizes[j];
  return sizes;
}

}  // namespace detail

/// Builds the true mean sequence of an experiment.
///
/// - monotone: `complexity` near-equal blocks at levels 0, A, 2A, ...
/// - convex: `complexity` affine pieces starting flat at 0, slope rising by A at
///   knots floor(j n / q), j = 1..q-1
/// - tv: `complexity` near-equal blocks with seeded random positive increments,
///   rescaled so the last level minus the first is exactly A
inline Sequence generate_signal(const SignalSpec& spec) {
  const std::size_t n = spec.n;
  const std::size_t k = spec.complexity;
  if (n == 0) throw DomainError("signal: n must be positive");
  if (k == 0) throw DomainError("signal: complexity must be positive");
  if (!(spec.amplitude > 0.0) || !std::isfinite(spec.amplitude)) {
    throw DomainError("signal: amplitude must be positive and finite");
  }

  Sequence mu(n, 0.0);
  switch (spec.family) {
    case SignalFamily::PiecewiseConstantMonotone:
    case SignalFamily::TVBoundedMonotone: {
      if (k > n) throw DomainError("signal: more pieces than points");
      if (spec.family == SignalFamily::TVBoundedMonotone && k == 1) {
        throw DomainError("signal: a tv signal with positive variation needs at least 2 pieces");
      }
      std::vector<double> levels(k, 0.0);
      if (spec.family == SignalFamily::PiecewiseConstantMonotone) {
        for (std::size_t j = 0; j < k; ++j) levels[j] = spec.amplitude * static_cast<double>(j);
      } else {
        auto gen = replicate_stream(spec.seed, StreamTag::Signal, 0);
        std::uniform_real_distribution<double> increment(0.1, 1.0);
        for (std::size_t j = 1; j < k; ++j) levels[j] = levels[j - 1] + increment(gen);
        const double total = levels.back();
        for (std::size_t j = 1; j + 1 < k; ++j) levels[j] *= spec.amplitude / total;
        levels.back() = spec.amplitude;
      }
      std::size_t i = 0;
      const auto sizes = detail::block_sizes(n, k);
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t c = 0; c < sizes[j]; ++c) mu[i++] = levels[j];
      }
      break;
    }
    case SignalFamily::PiecewiseAffineConvex: {
      const std::size_t max_q = n >= 3 ? n - 1 : 1;
      if (k > max_q) throw DomainError("signal: too many affine pieces for n");
      for (std::size_t j = 1; j < k; ++j) {
        const std::size_t knot = j * n / k;
        for (std::size_t i = knot + 1; i < n; ++i) mu[i] += spec.amplitude * static_cast<double>(i - knot);
      }
      break;
    }
  }
  return mu;
}

struct ExperimentConfig {
  SignalSpec signal;
  double sigma = 1.0;
  double alpha = 0.1;
  std::size_t replicates = 1000;
  std::uint64_t master_seed = 1;
  ConeKind cone = ConeKind::MonotoneNondecreasing;
  bool use_tv_combination = false;
};

inline void validate(const ExperimentConfig& config) {
  if (config.replicates < 1) throw DomainError("experiment: replicates must be at least 1");
  (void)NoiseModel(config.sigma);
  check_alpha(config.alpha);
  const bool monotone_signal = config.signal.family != SignalFamily::PiecewiseAffineConvex;
  if (monotone_signal != is_monotone(config.cone)) {
    throw DomainError("experiment: signal family does not belong to the cone");
  }
  if (config.use_tv_combination && !is_monotone(config.cone)) {
    throw DomainError("experiment: tv combination requires a monotone cone");
  }
}

struct ReplicateRecord {
  std::size_t replicate = 0;
  double loss = 0.0;       // (1/n)||center - mu||^2
  double sq_radius = 0.0;  // squared radius of the ball
  std::size_t pieces = 0;  // k_hat or q_hat
  bool covered = false;    // loss <= sq_radius
};

struct CoverageSummary {
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_sq_radius = 0.0;
  double q90_sq_radius = 0.0;
  double mean_pieces = 0.0;
  double pieces_se = 0.0;
  double mean_loss = 0.0;
  /// Coverage guaranteed by the construction (1 - alpha or 1 - 2 alpha).
  double nominal_coverage = 0.0;
  /// k(mu) or q(mu) of the true signal.
  std::size_t true_pieces = 0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::string version = kVersion;
  std::vector<ReplicateRecord> records;
  CoverageSummary summary;
};

/// Linear-interpolation sample quantile (type 7).
inline double quantile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// True mean of the experiment, negated for the decreasing/concave cones.
inline Sequence experiment_signal(const ExperimentConfig& config) {
  Sequence mu = generate_signal(config.signal);
  if (is_negated(config.cone)) {
    for (double& v : mu) v = -v;
  }
  return mu;
}

inline CoverageSummary summarize(const std::vector<ReplicateRecord>& records) {
  CoverageSummary s;
  const auto count = static_cast<double>(records.size());
  std::vector<double> radii;
  radii.reserve(records.size());
  std::size_t covered = 0;
  for (const auto& r : records) {
    covered += r.covered ? 1 : 0;
    s.mean_sq_radius += r.sq_radius;
    s.mean_loss += r.loss;
    radii.push_back(r.sq_radius);
  }
  s.coverage = static_cast<double>(covered) / count;
  s.coverage_se = binomial_se(s.coverage, records.size());
  s.mean_sq_radius /= count;
  s.mean_loss /= count;
  s.q90_sq_radius = quantile(std::move(radii), 0.9);
  const auto [mean_pieces, pieces_se] = mean_and_se(records, [](const ReplicateRecord& r) { return double(r.pieces); });
  s.mean_pieces = mean_pieces;
  s.pieces_se = pieces_se;
  return s;
}

/// Draws y = mu + sigma * xi for every replicate, builds the confidence ball
/// and records whether it covers mu. Any replicate failure aborts the run
/// with a ReplicateFailure naming the lowest failing replicate.
inline ExperimentReport run_coverage(const ExperimentConfig& config, unsigned workers = 1) {
  validate(config);
  const Sequence mu = experiment_signal(config);
  const NoiseModel noise(config.sigma);
  const std::size_t n = mu.size();

  ExperimentReport report;
  report.config = config;
  report.records.resize(config.replicates);
  parallel_for(config.replicates, workers, [&](std::size_t r) {
    try {
      auto gen = replicate_stream(config.master_seed, StreamTag::Noise, r);
      Sequence y(n);
      fill_gaussian(gen, y, config.sigma);
      for (std::size_t i = 0; i < n; ++i) y[i] += mu[i];
      const ConfidenceBall ball = confidence_ball(y, config.cone, noise, config.alpha, config.use_tv_combination);
      ReplicateRecord& rec = report.records[r];
      rec.replicate = r;
      rec.loss = scaled_squared_distance(ball.center, mu);
      rec.sq_radius = ball.squared_radius;
      rec.pieces = ball.pieces;
      rec.covered = rec.loss <= rec.sq_radius;
    } catch (const NumericalFailure& e) {
      throw ReplicateFailure(r, e.what(), true);
    } catch (const std::exception& e) {
      throw ReplicateFailure(r, e.what(), false);
    }
  });

  report.summary = summarize(report.records);
  report.summary.nominal_coverage = config.use_tv_combination ? 1.0 - 2.0 * config.alpha : 1.0 - config.alpha;
  report.summary.true_pieces = piece_count(config.cone, mu).count;
  return report;
}

/// Upper bound on E[k_hat] (monotone) or E[q_hat] (convex) for a signal with
/// `pieces` pieces.
inline double expected_pieces_bound(ConeKind cone, std::size_t n, std::size_t pieces) {
  const double k = static_cast<double>(pieces);
  const double log_term = 1.0 + std::log(static_cast<double>(n) / k);
  return is_monotone(cone) ? k * log_term : 10.0 * k * log_term - 1.0;
}

/// High-probability bound on k_hat: 2k ln(en/k) + 7 ln(1/gamma).
inline double deviation_pieces_bound(std::size_t n, std::size_t pieces, double gamma) {
  const double k = static_cast<double>(pieces);
  return 2.0 * k * (1.0 + std::log(static_cast<double>(n) / k)) + 7.0 * std::log(1.0 / gamma);
}

struct AdaptivityReport {
  ExperimentReport coverage;
  double expectation_bound = 0.0;
  /// mean pieces <= bound + 3 SE
  bool expectation_holds = false;
  /// Empty for the convex cone, which has no deviation bound on q_hat.
  std::vector<TailCheck> deviation;
  /// Mean of n * sq_radius / (sigma^2 * true pieces).
  double mean_radius_ratio = 0.0;
  double radius_ratio_se = 0.0;
};

/// Piece-count adaptivity: compares the mean of k_hat / q_hat with its
/// expectation bound and, for monotone cones, the frequency of
/// k_hat > 2k ln(en/k) + 7 ln(1/gamma) with gamma.
inline AdaptivityReport run_adaptivity(const ExperimentConfig& config, unsigned workers = 1,
                                       const std::vector<double>& gammas = {0.1, 0.05}) {
  AdaptivityReport out;
  out.coverage = run_coverage(config, workers);
  const CoverageSummary& s = out.coverage.summary;
  const std::size_t n = config.signal.n;
  const std::size_t k = s.true_pieces;
  out.expectation_bound = expected_pieces_bound(config.cone, n, k);
  out.expectation_holds = s.mean_pieces <= out.expectation_bound + 3.0 * s.pieces_se;

  const auto& records = out.coverage.records;
  if (is_monotone(config.cone)) {
    for (const double gamma : gammas) {
      if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("adaptivity: gamma must lie in (0, 1)");
      TailCheck row;
      row.parameter = gamma;
      row.threshold = deviation_pieces_bound(n, k, gamma);
      std::size_t hits = 0;
      for (const auto& r : records) hits += static_cast<double>(r.pieces) > row.threshold ? 1 : 0;
      row.frequency = static_cast<double>(hits) / static_cast<double>(records.size());
      row.bound = gamma;
      row.std_error = binomial_se(gamma, records.size());
      row.violated = row.frequency > row.bound + 3.0 * row.std_error;
      out.deviation.push_back(row);
    }
  }

  const double scale = config.sigma * config.sigma * static_cast<double>(k) / static_cast<double>(n);
  const auto [ratio, ratio_se] =
      mean_and_se(records, [scale](const ReplicateRecord& r) { return r.sq_radius / scale; });
  out.mean_radius_ratio = ratio;
  out.radius_ratio_se = ratio_se;
  return out;
}

struct GeometryConfig {
  ConeKind cone = ConeKind::MonotoneNondecreasing;
  std::size_t n = 50;
  std::size_t replicates = 10000;
  std::uint64_t seed = 1;
  std::vector<double> x_values{0.5, 1.0, 2.0};
  std::vector<double> alphas{0.1, 0.05};
};

struct GeometryReport {
  GeometryConfig config;
  std::string version = kVersion;
  std::vector<ProjectionSample> samples;
  DimensionEstimate dimension;
  /// Harmonic number for the monotone cones.
  std::optional<double> exact_dimension;
  double face_mean = 0.0;
  double face_se = 0.0;
  std::size_t zero_dimension_faces = 0;
  /// delta used in the tail checks: exact when known, otherwise the estimate.
  double reference_dimension = 0.0;
  std::vector<TailCheck> face_tail;
  std::vector<TailCheck> norm_tail;
};

/// Statistical dimension, face-dimension distribution and both concentration
/// checks from one shared set of Gaussian draws.
inline GeometryReport run_geometry(const GeometryConfig& config, unsigned workers = 1) {
  if (config.replicates < 2) throw DomainError("geometry: replicates must be at least 2");
  GeometryReport report;
  report.config = config;
  report.samples = sample_gaussian_projections(config.cone, config.n, config.replicates, config.seed, workers);

  const auto [mean, se] = mean_and_se(report.samples, [](const ProjectionSample& s) { return s.squared_norm; });
  report.dimension = {mean, se, config.replicates, config.seed};
  const auto [face_mean, face_se] =
      mean_and_se(report.samples, [](const ProjectionSample& s) { return double(s.face_dimension); });
  report.face_mean = face_mean;
  report.face_se = face_se;

  FaceDimensionSample faces;
  faces.n = config.n;
  for (const auto& s : report.samples) {
    faces.dimensions.push_back(s.face_dimension);
    report.zero_dimension_faces += s.face_dimension == 0 ? 1 : 0;
  }
  if (is_monotone(config.cone)) report.exact_dimension = statistical_dimension_exact_isotonic(config.n);
  report.reference_dimension = report.exact_dimension.value_or(report.dimension.mean);
  report.face_tail = check_concentration_vk(faces, report.reference_dimension, config.x_values);
  report.norm_tail = check_concentration_norm(report.samples, report.reference_dimension, config.alphas);
  return report;
}

}  // namespace shapeconf
