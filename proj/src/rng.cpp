#include "dflbench/rng.hpp"

#include <cmath>
#include <numbers>

namespace dflbench {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), key_(mix64(mix64(seed + kGolden) ^ mix64(~stream_id))) {}

RngStream RngStream::derive(std::uint64_t tag) const {
  return RngStream(seed_, mix64(stream_id_ ^ mix64(tag + 0x632BE59BD9B4E019ULL)));
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  // 53-bit mantissa, shifted by half a ulp so 0 and 1 are never returned.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  require(n > 0, ErrorCode::kInvalidParam, "uniform_index: empty range");
  // Lemire's multiply-shift with rejection keeps the draw unbiased.
  while (true) {
    const std::uint64_t x = next_u64();
    const __uint128_t m = static_cast<__uint128_t>(x) * n;
    const auto low = static_cast<std::uint64_t>(m);
    if (low >= n || low >= (0 - n) % n) return static_cast<std::uint64_t>(m >> 64);
  }
}

double RngStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

double RngStream::gamma(double shape, double rate) {
  require(shape > 0 && rate > 0, ErrorCode::kInvalidParam, "gamma: shape and rate must be positive");
  if (shape == 1.0) return -std::log(uniform()) / rate;
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a + 1) * U^(1/a)
    const double g = gamma(shape + 1.0, 1.0);
    return g * std::pow(uniform(), 1.0 / shape) / rate;
  }
  // Marsaglia-Tsang
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

Vector sample_gumbel(RngStream& rng, std::size_t n, double scale) {
  if (!(scale > 0.0)) fail(ErrorCode::kInvalidScale, "Gumbel scale must be positive");
  require(n >= 1, ErrorCode::kInvalidParam, "sample_gumbel: n must be >= 1");
  Vector out(n);
  for (double& v : out) v = -scale * std::log(-std::log(rng.uniform()));
  return out;
}

Vector sample_sum_of_gamma(RngStream& rng, std::size_t n, int kappa, int terms) {
  require(kappa >= 1, ErrorCode::kInvalidParam, "Sum-of-Gamma: kappa must be >= 1");
  require(terms >= 1, ErrorCode::kInvalidParam, "Sum-of-Gamma: terms must be >= 1");
  const double k = kappa;
  const double shift = std::log(static_cast<double>(terms));
  Vector out(n);
  for (double& v : out) {
    double s = 0.0;
    for (int i = 1; i <= terms; ++i) s += rng.gamma(1.0 / k, i / k);
    v = (s - shift) / k;
  }
  return out;
}

Vector sample_normal(RngStream& rng, std::size_t n) {
  Vector out(n);
  for (double& v : out) v = rng.normal();
  return out;
}

}  // namespace dflbench
