// Fits a noisy staircase and a noisy convex curve, then checks whether the
// adaptive confidence balls contain the truth.

#include <cstdio>

#include "shapeconf/confidence.hpp"
#include "shapeconf/sim.hpp"

using namespace shapeconf;

namespace {

void show(const char* label, SignalFamily family, ConeKind cone, std::size_t pieces) {
  SignalSpec spec;
  spec.family = family;
  spec.n = 200;
  spec.complexity = pieces;
  spec.amplitude = family == SignalFamily::PiecewiseAffineConvex ? 0.05 : 1.0;
  const Sequence mu = generate_signal(spec);

  auto gen = replicate_stream(2024, StreamTag::Noise, 0);
  Sequence y(mu.size());
  fill_gaussian(gen, y);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += mu[i];

  const ConfidenceBall ball = confidence_ball(y, cone, NoiseModel(1.0), 0.1);
  const double loss = scaled_squared_distance(ball.center, mu);
  std::printf("%-8s true pieces %zu, fitted %3zu, loss %.4f, squared radius %.4f, covered: %s\n", label, pieces,
              ball.pieces, loss, ball.squared_radius, contains(ball, mu) ? "yes" : "no");
}

}  // namespace

int main() {
  show("isotonic", SignalFamily::PiecewiseConstantMonotone, ConeKind::MonotoneNondecreasing, 3);
  show("convex", SignalFamily::PiecewiseAffineConvex, ConeKind::Convex, 2);
}
