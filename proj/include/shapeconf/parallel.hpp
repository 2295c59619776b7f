#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace shapeconf {

#ifndef SHAPECONF_VERSION
#define SHAPECONF_VERSION "0.1.0"
#endif

inline constexpr const char* kVersion = SHAPECONF_VERSION;

/// Stream tags keep the noise, geometry and jitter draws of one replicate
/// independent of each other.
enum class StreamTag : std::uint64_t {
  Noise = 1,
  Geometry = 2,
  Jitter = 3,
  Signal = 4,
};

/// Generator for one replicate, a pure function of (master seed, tag, index).
/// Results never depend on which worker runs the replicate or in what order.
inline std::mt19937_64 replicate_stream(std::uint64_t master_seed, StreamTag tag, std::uint64_t replicate) {
  const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffU); };
  const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  const auto t = static_cast<std::uint64_t>(tag);
  std::seed_seq seq{lo(master_seed), hi(master_seed), lo(t), hi(t), lo(replicate), hi(replicate)};
  return std::mt19937_64(seq);
}

inline void fill_gaussian(std::mt19937_64& gen, std::span<double> out, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  for (double& v : out) v = normal(gen);
}

/// A replicate threw; carries the replicate index and the original message.
class ReplicateFailure : public std::runtime_error {
 public:
  ReplicateFailure(std::size_t replicate, const std::string& what, bool numerical)
      : std::runtime_error("replicate " + std::to_string(replicate) + ": " + what),
        replicate_(replicate),
        numerical_(numerical) {}

  std::size_t replicate() const noexcept { return replicate_; }
  /// True when the cause was a solver failure rather than bad input.
  bool numerical() const noexcept { return numerical_; }

 private:
  std::size_t replicate_;
  bool numerical_;
};

/// Runs body(i) for i in [0, count) on `workers` threads (0 means hardware
/// concurrency). body must only write to slot i of any shared output.
/// If any call throws, the failure with the smallest index is rethrown after
/// all workers join, so the reported replicate does not depend on scheduling.
template <typename Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
  if (workers == 0) workers = std::max(1U, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> first_failure{std::numeric_limits<std::size_t>::max()};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count || i > first_failure.load(std::memory_order_relaxed)) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (i < first_failure.load()) {
          first_failure.store(i);
          failure = std::current_exception();
        }
      }
    }
  };

  if (workers == 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace shapeconf
