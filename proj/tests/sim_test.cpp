#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "shapeconf/sim.hpp"

namespace shapeconf {
namespace {

SignalSpec Spec(SignalFamily family, std::size_t n, std::size_t k, double amplitude = 1.0, std::uint64_t seed = 0) {
  SignalSpec s;
  s.family = family;
  s.n = n;
  s.complexity = k;
  s.amplitude = amplitude;
  s.seed = seed;
  return s;
}

ExperimentConfig Config(SignalSpec signal, ConeKind cone, double sigma, double alpha, std::size_t reps,
                        std::uint64_t seed = 42) {
  ExperimentConfig c;
  c.signal = signal;
  c.cone = cone;
  c.sigma = sigma;
  c.alpha = alpha;
  c.replicates = reps;
  c.master_seed = seed;
  return c;
}

TEST(GenerateSignal, Examples) {
  EXPECT_EQ(generate_signal(Spec(SignalFamily::PiecewiseConstantMonotone, 4, 2)), (Sequence{0, 0, 1, 1}));
  const Sequence convex = generate_signal(Spec(SignalFamily::PiecewiseAffineConvex, 5, 2));
  EXPECT_EQ(piece_count_convex(convex).count, 2U);
  EXPECT_EQ(piece_count_monotone(generate_signal(Spec(SignalFamily::PiecewiseConstantMonotone, 3, 3))).count, 3U);
}

TEST(GenerateSignal, ComplexityIsExact) {
  for (const std::size_t n : {1U, 2U, 7U, 50U, 200U}) {
    for (std::size_t k = 1; k <= std::min<std::size_t>(n, 12); ++k) {
      const Sequence mono = generate_signal(Spec(SignalFamily::PiecewiseConstantMonotone, n, k, 0.5));
      EXPECT_EQ(piece_count_monotone(mono).count, k) << n << " " << k;
      if (n >= 3 && k <= n - 1) {
        const Sequence convex = generate_signal(Spec(SignalFamily::PiecewiseAffineConvex, n, k, 0.3));
        EXPECT_EQ(piece_count_convex(convex).count, k) << n << " " << k;
      }
      if (k >= 2) {
        const Sequence tv = generate_signal(Spec(SignalFamily::TVBoundedMonotone, n, k, 2.5, 9));
        EXPECT_EQ(piece_count_monotone(tv).count, k);
        EXPECT_LE(tv.back() - tv.front(), 2.5);
        EXPECT_DOUBLE_EQ(tv.back() - tv.front(), 2.5);
      }
    }
  }
}

TEST(GenerateSignal, DeterministicInSeed) {
  const auto spec = Spec(SignalFamily::TVBoundedMonotone, 40, 5, 1.0, 3);
  EXPECT_EQ(generate_signal(spec), generate_signal(spec));
  auto other = spec;
  other.seed = 4;
  EXPECT_NE(generate_signal(spec), generate_signal(other));
}

TEST(GenerateSignal, InfeasibleSpecs) {
  EXPECT_THROW(generate_signal(Spec(SignalFamily::PiecewiseConstantMonotone, 3, 4)), DomainError);
  EXPECT_THROW(generate_signal(Spec(SignalFamily::PiecewiseAffineConvex, 5, 5)), DomainError);
  EXPECT_THROW(generate_signal(Spec(SignalFamily::PiecewiseConstantMonotone, 3, 0)), DomainError);
  EXPECT_THROW(generate_signal(Spec(SignalFamily::PiecewiseConstantMonotone, 3, 1, -1.0)), DomainError);
  EXPECT_THROW(generate_signal(Spec(SignalFamily::TVBoundedMonotone, 3, 1)), DomainError);
}

TEST(RunCoverage, NoiselessLimitMonotone) {
  const auto report = run_coverage(
      Config(Spec(SignalFamily::PiecewiseConstantMonotone, 60, 4), ConeKind::MonotoneNondecreasing, 1e-12, 0.1, 50));
  EXPECT_DOUBLE_EQ(report.summary.coverage, 1.0);
  for (const auto& r : report.records) {
    EXPECT_EQ(r.pieces, 4U);
    EXPECT_LE(r.loss, 1e-20);
  }
}

TEST(RunCoverage, NoiselessLimitConvex) {
  const auto report =
      run_coverage(Config(Spec(SignalFamily::PiecewiseAffineConvex, 60, 3), ConeKind::Convex, 1e-12, 0.1, 50));
  EXPECT_DOUBLE_EQ(report.summary.coverage, 1.0);
  for (const auto& r : report.records) {
    EXPECT_EQ(r.pieces, 3U);
    EXPECT_LE(r.loss, 1e-20);
  }
}

TEST(RunCoverage, NegatedConeUsesNegatedSignal) {
  const auto report = run_coverage(
      Config(Spec(SignalFamily::PiecewiseConstantMonotone, 40, 3), ConeKind::MonotoneNonincreasing, 1e-12, 0.1, 10));
  EXPECT_EQ(report.summary.true_pieces, 3U);
  EXPECT_DOUBLE_EQ(report.summary.coverage, 1.0);
}

TEST(RunCoverage, HonestAtModerateScale) {
  const auto config =
      Config(Spec(SignalFamily::PiecewiseConstantMonotone, 100, 3), ConeKind::MonotoneNondecreasing, 1.0, 0.1, 400);
  const auto report = run_coverage(config);
  EXPECT_GE(report.summary.coverage, 0.9 - 3.0 * std::sqrt(0.09 / 400));
  EXPECT_DOUBLE_EQ(report.summary.nominal_coverage, 0.9);
  EXPECT_EQ(report.summary.true_pieces, 3U);
  EXPECT_EQ(report.version, std::string(kVersion));
}

TEST(RunCoverage, RecordsAreConsistentWithConfidenceBall) {
  auto config = Config(Spec(SignalFamily::TVBoundedMonotone, 50, 4, 2.0, 1), ConeKind::MonotoneNondecreasing, 0.7,
                       0.2, 30);
  config.use_tv_combination = true;
  const auto report = run_coverage(config);
  EXPECT_DOUBLE_EQ(report.summary.nominal_coverage, 0.6);
  const Sequence mu = generate_signal(config.signal);
  for (const auto& rec : report.records) {
    EXPECT_EQ(rec.covered, rec.loss <= rec.sq_radius);
    auto gen = replicate_stream(config.master_seed, StreamTag::Noise, rec.replicate);
    Sequence y(mu.size());
    fill_gaussian(gen, y, config.sigma);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += mu[i];
    const ConfidenceBall ball = confidence_ball(y, config.cone, NoiseModel(config.sigma), config.alpha, true);
    EXPECT_EQ(contains(ball, mu), rec.covered);
    EXPECT_DOUBLE_EQ(ball.squared_radius, rec.sq_radius);
  }
}

TEST(RunCoverage, IdenticalAcrossWorkerCounts) {
  const auto config = Config(Spec(SignalFamily::PiecewiseAffineConvex, 80, 2), ConeKind::Convex, 1.0, 0.1, 120, 7);
  const auto serial = run_coverage(config, 1);
  const auto threaded = run_coverage(config, 4);
  ASSERT_EQ(serial.records.size(), threaded.records.size());
  for (std::size_t r = 0; r < serial.records.size(); ++r) {
    EXPECT_EQ(serial.records[r].loss, threaded.records[r].loss);
    EXPECT_EQ(serial.records[r].sq_radius, threaded.records[r].sq_radius);
    EXPECT_EQ(serial.records[r].pieces, threaded.records[r].pieces);
  }
  EXPECT_EQ(serial.summary.coverage, threaded.summary.coverage);
  EXPECT_EQ(serial.summary.q90_sq_radius, threaded.summary.q90_sq_radius);
}

TEST(RunCoverage, RejectsInvalidConfigs) {
  auto config = Config(Spec(SignalFamily::PiecewiseAffineConvex, 30, 2), ConeKind::MonotoneNondecreasing, 1.0, 0.1, 5);
  EXPECT_THROW(run_coverage(config), DomainError);
  config.cone = ConeKind::Convex;
  config.use_tv_combination = true;
  EXPECT_THROW(run_coverage(config), DomainError);
  config.use_tv_combination = false;
  config.alpha = 0.0;
  EXPECT_THROW(run_coverage(config), DomainError);
  config.alpha = 0.1;
  config.replicates = 0;
  EXPECT_THROW(run_coverage(config), DomainError);
}

TEST(ParallelFor, ReportsLowestFailingIndex) {
  for (const unsigned workers : {1U, 4U}) {
    try {
      parallel_for(100, workers, [](std::size_t i) {
        if (i == 37 || i == 81) throw ReplicateFailure(i, "boom", true);
      });
      FAIL() << "expected failure";
    } catch (const ReplicateFailure& e) {
      EXPECT_EQ(e.replicate(), 37U);
      EXPECT_TRUE(e.numerical());
    }
  }
}

TEST(RunAdaptivity, MonotoneBoundsAndRatio) {
  const auto config =
      Config(Spec(SignalFamily::PiecewiseConstantMonotone, 100, 1), ConeKind::MonotoneNondecreasing, 1.0, 0.1, 400);
  const AdaptivityReport report = run_adaptivity(config);
  EXPECT_NEAR(report.expectation_bound, 1.0 + std::log(100.0), 1e-12);
  EXPECT_TRUE(report.expectation_holds);
  ASSERT_EQ(report.deviation.size(), 2U);
  for (const auto& row : report.deviation) {
    EXPECT_FALSE(row.violated);
    EXPECT_NEAR(row.threshold, 2.0 * (1.0 + std::log(100.0)) + 7.0 * std::log(1.0 / row.parameter), 1e-12);
  }
  // n r / (sigma^2 k) = k_hat (2 + 22 ln n + 10 ln(1/alpha)) / k.
  const double factor = 2.0 + 22.0 * std::log(100.0) + 10.0 * std::log(10.0);
  EXPECT_NEAR(report.mean_radius_ratio, report.coverage.summary.mean_pieces * factor, 1e-9);
}

TEST(RunAdaptivity, ConvexHasNoDeviationTable) {
  const auto config = Config(Spec(SignalFamily::PiecewiseAffineConvex, 100, 2), ConeKind::Convex, 1.0, 0.1, 200);
  const AdaptivityReport report = run_adaptivity(config);
  EXPECT_TRUE(report.deviation.empty());
  EXPECT_NEAR(report.expectation_bound, 20.0 * (1.0 + std::log(50.0)) - 1.0, 1e-12);
  EXPECT_TRUE(report.expectation_holds);
}

TEST(RunGeometry, SinglePointAndSmallCone) {
  GeometryConfig one;
  one.n = 1;
  one.replicates = 200;
  const GeometryReport r1 = run_geometry(one);
  EXPECT_DOUBLE_EQ(r1.face_mean, 1.0);
  EXPECT_EQ(r1.zero_dimension_faces, 0U);

  GeometryConfig three;
  three.n = 3;
  three.replicates = 20000;
  three.seed = 8;
  const GeometryReport r3 = run_geometry(three);
  ASSERT_TRUE(r3.exact_dimension.has_value());
  EXPECT_NEAR(*r3.exact_dimension, 11.0 / 6.0, 1e-15);
  EXPECT_LE(std::abs(r3.dimension.mean - 11.0 / 6.0), 3.0 * r3.dimension.std_error);
  EXPECT_EQ(r3.face_tail.size(), 3U);
  EXPECT_EQ(r3.norm_tail.size(), 2U);
}

TEST(Quantile, Type7) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 5}, 0.9), 4.6);
  EXPECT_DOUBLE_EQ(quantile({7}, 0.9), 7.0);
  EXPECT_DOUBLE_EQ(quantile({3, 1, 2}, 0.5), 2.0);
}

}  // namespace
}  // namespace shapeconf
