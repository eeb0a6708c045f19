#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dflbench/numerics.hpp"
#include "dflbench/rng.hpp"

using namespace dflbench;

namespace {

Matrix random_well_conditioned(std::size_t n, RngStream& rng) {
  Matrix a(n, n);
  for (double& v : a.values()) v = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  return a;
}

double ks_distance(Vector sample, double (*cdf)(double)) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  return d;
}

double gumbel_cdf(double x) { return std::exp(-std::exp(-x)); }

}  // namespace

TEST_CASE("linear solve: identity and diagonal") {
  CHECK(solve_linear_system(Matrix::identity(3), Vector{1, 2, 3}) == Vector{1, 2, 3});
  Matrix d(2, 2, Vector{2, 0, 0, 4});
  const Vector x = solve_linear_system(d, Vector{2, 8});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));
}

TEST_CASE("linear solve: residual bound on random systems up to 50x50") {
  RngStream rng(7, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(50);
    const Matrix a = random_well_conditioned(n, rng);
    const Vector b = sample_normal(rng, n);
    const Vector x = solve_linear_system(a, b);
    const Vector r = matvec(a, x) - b;
    CHECK(norm_inf(r) <= 1e-9 * (1.0 + norm_inf(b)));
  }
}

TEST_CASE("linear solve: transposed solve and singular pivot") {
  RngStream rng(3, 1);
  const Matrix a = random_well_conditioned(8, rng);
  const Vector b = sample_normal(rng, 8);
  const LuFactorization lu(a);
  const Vector y = lu.solve_transposed(b);
  CHECK(norm_inf(matvec_transposed(a, y) - b) <= 1e-10);
  Matrix s(2, 2, Vector{1, 2, 2, 4});
  CHECK_THROWS_AS(solve_linear_system(s, Vector{1, 1}), Error);
  try {
    solve_linear_system(s, Vector{1, 1});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSingularMatrix);
  }
}

TEST_CASE("cholesky reconstructs and rejects indefinite") {
  Matrix a(2, 2, Vector{4, 2, 2, 3});
  const Matrix l = cholesky(a);
  const Matrix back = matmul(l, l.transpose());
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.values()[i] == doctest::Approx(a.values()[i]));
  CHECK_THROWS_AS(cholesky(Matrix(2, 2, Vector{1, 2, 2, 1})), Error);
}

TEST_CASE("unit sphere projection") {
  auto p = project_unit_sphere(Vector{3, 4});
  CHECK(p.v[0] == doctest::Approx(0.6));
  CHECK(p.v[1] == doctest::Approx(0.8));
  CHECK_FALSE(p.degenerate);
  p = project_unit_sphere(Vector{0, 1, 0});
  CHECK(p.v == Vector{0, 1, 0});
  p = project_unit_sphere(Vector{0, 0});
  CHECK(p.degenerate);
  CHECK(p.v == Vector{0, 0});
  RngStream rng(11, 0);
  for (int i = 0; i < 100; ++i) {
    Vector v = sample_normal(rng, 1 + rng.uniform_index(20));
    for (double& x : v) x *= std::pow(10.0, rng.uniform(-6, 6));
    CHECK(std::abs(norm2(project_unit_sphere(v).v) - 1.0) <= 1e-12);
  }
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(42, 5), b(42, 5), c(42, 6);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
  RngStream d1 = a.derive(3), d2 = b.derive(3);
  CHECK(d1.next_u64() == d2.next_u64());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("gumbel sampler: mean and determinism") {
  const double eps = 0.7;
  RngStream rng(1, 2);
  const std::size_t n = 1'000'000;
  const Vector g = sample_gumbel(rng, n, eps);
  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= n;
  const double sigma = eps * std::numbers::pi / std::sqrt(6.0) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean - eps * std::numbers::egamma) <= 3.0 * sigma);

  RngStream r1(9, 9), r2(9, 9);
  CHECK(sample_gumbel(r1, 10, 1.0) == sample_gumbel(r2, 10, 1.0));
  CHECK_THROWS_AS(sample_gumbel(r1, 0, 1.0), Error);
  try {
    sample_gumbel(r1, 3, 0.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidScale);
  }
}

TEST_CASE("sum of gamma: converges to Gumbel for kappa 1") {
  RngStream rng(5, 0);
  const Vector s = sample_sum_of_gamma(rng, 100'000, 1, 10'000);
  CHECK(ks_distance(s, gumbel_cdf) < 0.02);
}

TEST_CASE("sum of gamma: kappa 5 mean matches the series") {
  // E = (1/k) (sum_i (1/k)/(i/k) - ln s) = (1/k)(H_s - ln s).
  const int kappa = 5, terms = kSumOfGammaTerms;
  double harmonic = 0.0;
  for (int i = 1; i <= terms; ++i) harmonic += 1.0 / i;
  const double expected = (harmonic - std::log(terms)) / kappa;
  // Var = (1/k^2) sum_i (1/k)/(i/k)^2 = (1/k^2) sum_i k / i^2.
  double var = 0.0;
  for (int i = 1; i <= terms; ++i) var += kappa / (static_cast<double>(i) * i);
  var /= kappa * kappa;
  RngStream rng(6, 0);
  const std::size_t n = 1'000'000;
  const Vector s = sample_sum_of_gamma(rng, n, kappa, terms);
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= n;
  CHECK(std::abs(mean - expected) <= 3.0 * std::sqrt(var / n));

  RngStream r1(1, 1), r2(1, 1);
  CHECK(sample_sum_of_gamma(r1, 5, 3) == sample_sum_of_gamma(r2, 5, 3));
  CHECK_THROWS_AS(sample_sum_of_gamma(r1, 5, 0), Error);
  CHECK_THROWS_AS(sample_sum_of_gamma(r1, 5, 1, 0), Error);
}
