#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace storagessm {

// Named substreams derived from the single top-level seed.
enum class Stream : std::uint64_t {
  kSimulation = 1,
  kFilter = 2,
  kResample = 3,
  kSampler = 4,
  kResidualMc = 5,
  kSmoother = 6,
  kMarginalLik = 7,
  kInit = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Child seed for a sub-computation, e.g. one filter run per MCMC iteration.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(seed ^ splitmix64(a + 0x632BE59BD9B4E019ULL)) ^ b);
}

// Philox4x32-10 counter-based generator. Every draw is a pure function of
// (key, counter), so draws indexed by (period, particle) do not depend on
// the order in which particles are processed.
class CounterRng {
 public:
  using Block = std::array<std::uint32_t, 4>;

  CounterRng(std::uint64_t seed, Stream stream)
      : CounterRng(derive_seed(seed, static_cast<std::uint64_t>(stream))) {}
  explicit CounterRng(std::uint64_t key)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  Block block(std::uint64_t i, std::uint64_t j, std::uint32_t k = 0) const {
    Block ctr{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32),
              static_cast<std::uint32_t>(j), (static_cast<std::uint32_t>(j >> 32) << 8) ^ k};
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0, static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1, static_cast<std::uint32_t>(p0)};
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    return ctr;
  }

  // Two independent uniforms on the open interval (0, 1).
  std::array<double, 2> uniforms(std::uint64_t i, std::uint64_t j, std::uint32_t k = 0) const {
    const Block blk = block(i, j, k);
    return {to_unit(blk[0], blk[1]), to_unit(blk[2], blk[3])};
  }

  double uniform(std::uint64_t i, std::uint64_t j, std::uint32_t k = 0) const {
    return uniforms(i, j, k)[0];
  }

  // Standard normal by Box-Muller.
  double normal(std::uint64_t i, std::uint64_t j, std::uint32_t k = 0) const {
    const auto u = uniforms(i, j, k);
    return std::sqrt(-2.0 * std::log(u[0])) * std::cos(2.0 * std::numbers::pi * u[1]);
  }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_;
};

// Binds a generator to one (period, index) cell.
class DrawSource {
 public:
  DrawSource(const CounterRng& rng, std::uint64_t period, std::uint64_t index)
      : rng_(&rng), period_(period), index_(index) {}

  double uniform(std::uint32_t k = 0) const { return rng_->uniform(period_, index_, k); }
  double normal(std::uint32_t k = 0) const { return rng_->normal(period_, index_, k); }

 private:
  const CounterRng* rng_;
  std::uint64_t period_;
  std::uint64_t index_;
};

// Sequential UniformRandomBitGenerator over a counter stream, for use with
// <random> distributions where order-independence is not needed.
class StreamEngine {
 public:
  using result_type = std::uint32_t;

  StreamEngine(std::uint64_t seed, Stream stream, std::uint64_t lane = 0)
      : rng_(seed, stream), lane_(lane) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) {
      buf_ = rng_.block(counter_++, lane_, 0xFFu);
      pos_ = 0;
    }
    return buf_[pos_++];
  }

 private:
  CounterRng rng_;
  std::uint64_t lane_;
  std::uint64_t counter_ = 0;
  CounterRng::Block buf_{};
  int pos_ = 4;
};

}  // namespace storagessm
