#pragma once

#include <cstdint>

#include "dflbench/numerics.hpp"

namespace dflbench {

// Counter-based generator: draw i of stream (seed, stream_id) is a pure function of
// (seed, stream_id, i), so streams can be split per (problem, method, cell, seed) without
// any shared state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

  // Independent child stream keyed by `tag`; does not advance this stream.
  RngStream derive(std::uint64_t tag) const;

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer on [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  bool bernoulli(double p);
  // Gamma with the given shape and rate (mean shape / rate).
  double gamma(double shape, double rate);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

// n i.i.d. Gumbel(0, scale) draws. kInvalidScale if scale <= 0, kInvalidParam if n == 0.
Vector sample_gumbel(RngStream& rng, std::size_t n, double scale);

// Default truncation of the Sum-of-Gamma series.
inline constexpr int kSumOfGammaTerms = 10;

// n i.i.d. draws of (1/kappa) * (sum_{i=1..terms} Gamma(1/kappa, rate i/kappa) - ln terms).
Vector sample_sum_of_gamma(RngStream& rng, std::size_t n, int kappa, int terms = kSumOfGammaTerms);

Vector sample_normal(RngStream& rng, std::size_t n);

}  // namespace dflbench
