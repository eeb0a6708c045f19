#include <chrono>
#include <cmath>

#include "doctest.h"
#include "dflbench/qptl.hpp"

using namespace dflbench;

namespace {

double rel_err(const Vector& a, const Vector& b) {
  const double scale = std::max({norm_inf(a), norm_inf(b), 1e-4});
  return norm_inf(a - b) / scale;
}

// Central differences of upstream . v(c_hat).
Vector fd_gradient(const QptlLayer& layer, const Vector& c_hat, const Vector& upstream, double h) {
  Vector out(c_hat.size());
  for (std::size_t j = 0; j < c_hat.size(); ++j) {
    Vector cp = c_hat, cm = c_hat;
    cp[j] += h;
    cm[j] -= h;
    out[j] = (dot(upstream, layer.forward(cp).v) - dot(upstream, layer.forward(cm).v)) / (2.0 * h);
  }
  return out;
}

}  // namespace

TEST_CASE("QPTL: symmetric top-k point and large-mu limit") {
  const TopKSpec spec{10, 3};
  const auto oracle = make_topk_oracle(spec);
  const QptlLayer layer(*oracle, 1.0);
  const auto f = layer.forward(Vector(10, 0.0));
  for (double v : f.v) CHECK(v == doctest::Approx(0.3).epsilon(1e-10));

  RngStream rng(1, 0);
  const Vector c = sample_normal(rng, 10);
  const QptlLayer big(*oracle, 1e6);
  CHECK(norm_inf(big.forward(c).v - big.forward(Vector(10, 0.0)).v) <= 1e-3);

  double prev = kInf;
  for (double mu : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    const QptlLayer l(*oracle, mu);
    const double d = norm2(l.forward(c).v - l.forward(Vector(10, 0.0)).v);
    CHECK(d <= prev + 1e-12);
    prev = d;
  }
  CHECK_THROWS_AS(QptlLayer(*oracle, 0.0), Error);
  CHECK_THROWS_AS(QptlLayer(*make_portfolio_oracle(PortfolioSpec{Matrix::identity(2), 1.0, false}), 1.0), Error);
}

TEST_CASE("QPTL: residuals on random top-k and shortest path instances") {
  RngStream rng(2, 0);
  const auto tk = make_topk_oracle({20, 4});
  const auto sp = make_shortest_path_oracle(GridSpec{5});
  for (const Oracle* o : {tk.get(), sp.get()}) {
    for (double mu : {0.1, 1.0, 10.0}) {
      const QptlLayer layer(*o, mu);
      for (int t = 0; t < 50; ++t) {
        Vector c = sample_normal(rng, o->cost_dim());
        for (double& v : c) v *= 3.0;
        const Vector c_min = sense_sign(o->sense()) * c;
        const auto f = layer.forward(c);
        CHECK(f.qp.kkt_residual <= 1e-8);
        CHECK(layer.qp().residual(layer.qp().relaxation().from_cost_space(c_min), f.qp) <= 1e-8);
      }
    }
  }
}

TEST_CASE("QPTL: backward agrees with finite differences") {
  RngStream rng(3, 0);
  const auto tk = make_topk_oracle({20, 4});
  const auto sp = make_shortest_path_oracle(GridSpec{5});
  KnapsackSpec ks;
  for (int i = 0; i < 12; ++i) ks.weights.push_back(3 + 2 * static_cast<int>(rng.uniform_index(3)));
  ks.capacity = 20;
  const auto kn = make_knapsack_oracle(ks);
  for (const Oracle* o : {tk.get(), sp.get(), kn.get()}) {
    for (double mu : {0.1, 1.0, 10.0}) {
      const QptlLayer layer(*o, mu);
      for (int t = 0; t < 10; ++t) {
        Vector c = sample_normal(rng, o->cost_dim());
        for (double& v : c) v *= 2.0;
        const Vector up = sample_normal(rng, o->cost_dim());
        const Vector grad = layer.backward(layer.forward(c), up);
        CHECK(rel_err(grad, fd_gradient(layer, c, up, 1e-5)) <= 1e-3);
      }
      const auto f = layer.forward(sample_normal(rng, o->cost_dim()));
      CHECK(norm_inf(layer.backward(f, Vector(o->cost_dim(), 0.0))) == 0.0);
    }
  }
}

TEST_CASE("QPTL: permutation equivariance at the symmetric point") {
  const auto oracle = make_topk_oracle({6, 2});
  const QptlLayer layer(*oracle, 1.0);
  const auto f = layer.forward(Vector(6, 0.0));
  const Vector up{0.3, -1.0, 2.0, 0.5, 0.0, -0.7};
  const Vector g = layer.backward(f, up);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  Vector up_p(6);
  for (std::size_t i = 0; i < 6; ++i) up_p[i] = up[perm[i]];
  const Vector g_p = layer.backward(f, up_p);
  for (std::size_t i = 0; i < 6; ++i) CHECK(g_p[i] == doctest::Approx(g[perm[i]]).epsilon(1e-10));
}

TEST_CASE("QPTL: scheduling relaxation with a cost map") {
  RngStream rng(4, 0);
  const SchedulingSpec spec = gen_scheduling_instance(2, 4, 8, rng);
  const auto oracle = make_scheduling_oracle(spec);
  const QptlLayer layer(*oracle, 1.0);
  Vector c(8);
  for (double& v : c) v = rng.uniform(1.0, 5.0);
  const auto f = layer.forward(c);
  CHECK(f.qp.kkt_residual <= 1e-8);
  const Vector up = sample_normal(rng, 8);
  CHECK(rel_err(layer.backward(f, up), fd_gradient(layer, c, up, 1e-5)) <= 1e-3);
}

TEST_CASE("QPTL: solve time on the 40-edge grid") {
  RngStream rng(5, 0);
  const auto sp = make_shortest_path_oracle(GridSpec{5});
  const QptlLayer layer(*sp, 1.0);
  const auto t0 = std::chrono::steady_clock::now();
  for (int t = 0; t < 200; ++t) layer.forward(sample_normal(rng, 40));
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / 200;
  MESSAGE("QPTL forward on 40 edges: " << ms << " ms");
  CHECK(ms < 50.0);
}
