#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "dflbench/predictors.hpp"

using namespace dflbench;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, RngStream& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

// Central differences of upstream . forward(z) with respect to every parameter.
void check_fd(PredictorModel model, const Matrix& z, const Vector& up) {
  const GradientBundle g = model.backward(z, up);
  const double h = 1e-6;
  for (std::size_t p = 0; p < model.params().size(); ++p) {
    auto& vals = model.params()[p].values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double fp = dot(up, model.forward(z));
      vals[i] = keep - h;
      const double fm = dot(up, model.forward(z));
      vals[i] = keep;
      const double fd = (fp - fm) / (2 * h);
      const double an = g.grads[p].values()[i];
      CHECK(std::abs(an - fd) <= 1e-5 * std::max({std::abs(an), std::abs(fd), 1.0}));
    }
  }
}

}  // namespace

TEST_CASE("linear forward: bias only, identity, recomputation") {
  ModelConfig cfg{ModelKind::kLinear, 3, 3, false};
  PredictorModel m(cfg, {Matrix(3, 3), Matrix(1, 3, Vector{1, 2, 3})});
  CHECK(m.forward(Matrix(1, 3, Vector{5, 6, 7})) == Vector{1, 2, 3});
  PredictorModel id(cfg, {Matrix::identity(3), Matrix(1, 3)});
  CHECK(id.forward(Matrix(1, 3, Vector{5, 6, 7})) == Vector{5, 6, 7});

  RngStream rng(1, 0);
  ModelConfig slot{ModelKind::kLinear, 8, 1, true};
  const PredictorModel s = PredictorModel::init(slot, rng);
  const Matrix z = random_matrix(48, 8, rng);
  const Vector c = s.forward(z);
  REQUIRE(c.size() == 48);
  for (std::size_t r = 0; r < 48; ++r) {
    double acc = s.params()[1](0, 0);
    for (std::size_t j = 0; j < 8; ++j) acc += s.params()[0](0, j) * z(r, j);
    CHECK(c[r] == doctest::Approx(acc).epsilon(1e-14));
  }
  CHECK_THROWS_AS(s.forward(random_matrix(48, 7, rng)), Error);
}

TEST_CASE("linear backward: outer product and zero upstream") {
  RngStream rng(2, 0);
  ModelConfig cfg{ModelKind::kLinear, 4, 3, false};
  const PredictorModel m = PredictorModel::init(cfg, rng);
  const Matrix z = random_matrix(1, 4, rng);
  const Vector up{0.5, -1.0, 2.0};
  const GradientBundle g = m.backward(z, up);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(g.grads[0](k, j) == doctest::Approx(up[k] * z(0, j)));
    CHECK(g.grads[1](0, k) == up[k]);
  }
  CHECK(m.backward(z, Vector(3, 0.0)).max_abs() == 0.0);
}

TEST_CASE("backward matches finite differences") {
  RngStream rng(3, 0);
  for (bool sig : {false, true}) {
    for (bool per_slot : {false, true}) {
      for (auto kind : {ModelKind::kLinear, ModelKind::kMlp}) {
        ModelConfig cfg{kind, 5, per_slot ? 1u : 4u, per_slot, 7, sig};
        const PredictorModel m = PredictorModel::init(cfg, rng);
        const Matrix z = per_slot ? random_matrix(6, 5, rng) : random_matrix(1, 5, rng);
        check_fd(m, z, sample_normal(rng, m.output_size(z)));
      }
    }
  }
}

TEST_CASE("init: determinism, variance, zero bias") {
  ModelConfig cfg{ModelKind::kMlp, 20, 3, false, 16};
  RngStream a(5, 1), b(5, 1);
  const auto ma = PredictorModel::init(cfg, a), mb = PredictorModel::init(cfg, b);
  for (std::size_t i = 0; i < 4; ++i) CHECK(ma.params()[i] == mb.params()[i]);
  CHECK(ma.params()[1].values() == Vector(16, 0.0));
  CHECK(ma.params()[3].values() == Vector(3, 0.0));

  ModelConfig lin{ModelKind::kLinear, 10, 1, false};
  RngStream rng(6, 0);
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (int t = 0; t < 10000; ++t) {
    const PredictorModel m = PredictorModel::init(lin, rng);
    for (double v : m.params()[0].values()) {
      sum += v;
      sum2 += v * v;
      ++n;
    }
  }
  const double var = sum2 / n - (sum / n) * (sum / n);
  CHECK(std::abs(var - 0.1) <= 0.01);
  CHECK_THROWS_AS(PredictorModel::init(ModelConfig{ModelKind::kLinear, 0, 1}, rng), Error);
}

TEST_CASE("checkpoint round trip is exact") {
  RngStream rng(7, 0);
  ModelConfig cfg{ModelKind::kMlp, 6, 2, true, 5, true};
  const PredictorModel m = PredictorModel::init(cfg, rng);
  const auto path = std::filesystem::temp_directory_path() / "dflbench_ckpt.txt";
  save_checkpoint(path, m);
  const PredictorModel back = load_checkpoint(path);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.params()[i] == m.params()[i]);
  CHECK(back.config().per_slot);
  CHECK(back.config().sigmoid_output);
  CHECK_THROWS_AS(checkpoint_from_text("garbage"), Error);
}
