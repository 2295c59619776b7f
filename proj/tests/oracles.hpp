#pragma once

// Reference implementations used only by the tests. They share no code with
// the library's projection routines.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace shapeconf::oracle {

using Vec = std::vector<double>;

// Enumerates every split of 0..n-1 into contiguous blocks (2^(n-1) of them),
// assigns each block clamp(mean, lower, upper), keeps the nondecreasing
// candidates and returns the one closest to y. The projection onto the
// (bounded) monotone cone is always such a candidate and every candidate is
// feasible, so the minimum is the projection.
inline Vec brute_force_bounded_isotonic(const Vec& y, double lower, double upper) {
  const std::size_t n = y.size();
  Vec best;
  double best_sse = std::numeric_limits<double>::infinity();
  Vec candidate(n);
  const std::uint64_t splits = std::uint64_t{1} << (n - 1);
  for (std::uint64_t mask = 0; mask < splits; ++mask) {
    std::size_t start = 0;
    double previous = -std::numeric_limits<double>::infinity();
    bool feasible = true;
    for (std::size_t i = 0; i < n && feasible; ++i) {
      const bool closes = i + 1 == n || ((mask >> i) & 1U);
      if (!closes) continue;
      double sum = 0.0;
      for (std::size_t j = start; j <= i; ++j) sum += y[j];
      double level = sum / static_cast<double>(i + 1 - start);
      level = std::clamp(level, lower, upper);
      if (level < previous) feasible = false;
      previous = level;
      for (std::size_t j = start; j <= i; ++j) candidate[j] = level;
      start = i + 1;
    }
    if (!feasible) continue;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) sse += (y[i] - candidate[i]) * (y[i] - candidate[i]);
    if (sse < best_sse) {
      best_sse = sse;
      best = candidate;
    }
  }
  return best;
}

inline Vec brute_force_isotonic(const Vec& y) {
  const double inf = std::numeric_limits<double>::infinity();
  return brute_force_bounded_isotonic(y, -inf, inf);
}

// Dykstra's alternating projections over the halfspaces
// u_{j-1} - 2u_j + u_{j+1} >= 0. Runs full sweeps until the iterate stops
// moving or the sweep budget is exhausted.
inline Vec dykstra_convex(const Vec& y, std::size_t max_sweeps = 100000, double stop = 1e-15) {
  const std::size_t n = y.size();
  Vec x = y;
  if (n <= 2) return x;
  const std::size_t m = n - 2;
  // Dykstra increments for a halfspace are multiples of its normal.
  Vec increment(m, 0.0);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double moved = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      // z = x + increment_j * a; project z onto {a^T z >= 0}.
      const double c = increment[j];
      double z0 = x[j] + c, z1 = x[j + 1] - 2 * c, z2 = x[j + 2] + c;
      const double slack = z0 - 2 * z1 + z2;
      const double t = slack < 0 ? slack / 6.0 : 0.0;
      const double n0 = z0 - t, n1 = z1 + 2 * t, n2 = z2 - t;
      moved = std::max({moved, std::abs(n0 - x[j]), std::abs(n1 - x[j + 1]), std::abs(n2 - x[j + 2])});
      x[j] = n0;
      x[j + 1] = n1;
      x[j + 2] = n2;
      increment[j] = t;
    }
    if (moved < stop) break;
  }
  return x;
}

inline Vec gaussian_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Vec v(n);
  for (double& x : v) x = normal(gen);
  return v;
}

// Random nondecreasing sequence (cumulative |N(0,1)| increments with some ties).
inline Vec random_monotone(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  std::bernoulli_distribution tie(0.4);
  Vec u(n);
  double level = normal(gen);
  for (double& v : u) {
    if (!tie(gen)) level += std::abs(normal(gen));
    v = level;
  }
  return u;
}

// Random convex sequence a + b*i + sum_j c_j (i - j)_+ with sparse c_j >= 0.
inline Vec random_convex(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  std::bernoulli_distribution knot(0.3);
  const double a = normal(gen), b = normal(gen);
  Vec u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = a + b * static_cast<double>(i);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    if (!knot(gen)) continue;
    const double c = std::abs(normal(gen));
    for (std::size_t i = j + 1; i < n; ++i) u[i] += c * static_cast<double>(i - j);
  }
  return u;
}

inline double harmonic(std::size_t n) {
  double h = 0.0;
  for (std::size_t k = n; k >= 1; --k) h += 1.0 / static_cast<double>(k);
  return h;
}

}  // namespace shapeconf::oracle
