#include "dflbench/dflgrad.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace dflbench {
namespace {

struct MethodName {
  Method method;
  const char* name;
};

constexpr MethodName kMethodNames[] = {
    {Method::kPF, "PF"},
    {Method::kSPO, "SPO"},
    {Method::kDBB, "DBB"},
    {Method::kNegIdentity, "NegIdentity"},
    {Method::kIMLE, "IMLE"},
    {Method::kFY, "FY"},
    {Method::kDPO, "DPO"},
    {Method::kQPTL, "QPTL"},
    {Method::kNCE, "NCE"},
    {Method::kMAP, "MAP"},
    {Method::kPairwise, "Pairwise"},
    {Method::kPairwiseDiff, "PairwiseDiff"},
    {Method::kListwise, "Listwise"},
};

std::string lower(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

void check_dims(std::span<const double> a, std::span<const double> b, const char* what) {
  require(a.size() == b.size(), ErrorCode::kDimMismatch, std::string(what) + ": dimension mismatch");
}

void require_cache(const SolutionCache& cache, const char* what) {
  require(!cache.empty(), ErrorCode::kEmptyCache, std::string(what) + ": solution cache is empty");
}

bool same(std::span<const double> a, std::span<const double> b) { return std::equal(a.begin(), a.end(), b.begin(), b.end()); }

Vector axpy(std::span<const double> x, double a, std::span<const double> y) {
  Vector out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * y[i];
  return out;
}

// Objective vector of the cache losses: c_hat, or c_hat - c for the difference variant.
Vector objective_vector(std::span<const double> c_hat, std::span<const double> c, bool cost_difference,
                        const char* what) {
  if (!cost_difference) return Vector(c_hat.begin(), c_hat.end());
  check_dims(c_hat, c, what);
  return axpy(c_hat, -1.0, c);
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& e : kMethodNames)
    if (e.method == m) return e.name;
  return "unknown";
}

Method method_from_string(const std::string& s) {
  const std::string key = lower(s);
  for (const auto& e : kMethodNames)
    if (lower(e.name) == key) return e.method;
  if (key == "i-mle") return Method::kIMLE;
  if (key == "spo+") return Method::kSPO;
  fail(ErrorCode::kConfigError, "unknown method '" + s + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> out;
    for (const auto& e : kMethodNames) out.push_back(e.method);
    return out;
  }();
  return methods;
}

std::vector<std::string> method_hyperparams(Method m) {
  switch (m) {
    case Method::kDBB: return {"delta"};
    case Method::kIMLE: return {"delta", "epsilon", "kappa"};
    case Method::kFY:
    case Method::kDPO: return {"epsilon", "mc_samples"};
    case Method::kQPTL: return {"mu"};
    case Method::kNCE:
    case Method::kMAP:
    case Method::kPairwiseDiff: return {"p_solve"};
    case Method::kPairwise: return {"theta", "p_solve"};
    case Method::kListwise: return {"tau", "p_solve"};
    default: return {};
  }
}

bool uses_cache(Method m) {
  return m == Method::kNCE || m == Method::kMAP || m == Method::kPairwise || m == Method::kPairwiseDiff ||
         m == Method::kListwise;
}

bool needs_true_cost(const StrategyConfig& cfg) {
  switch (cfg.method) {
    case Method::kPF:
    case Method::kSPO:
    case Method::kPairwiseDiff:
    case Method::kListwise: return true;
    case Method::kNCE:
    case Method::kMAP: return cfg.cost_difference;
    default: return false;
  }
}

void StrategyConfig::validate() const {
  const auto params = method_hyperparams(method);
  auto used = [&](const char* name) { return std::find(params.begin(), params.end(), name) != params.end(); };
  auto check = [](bool ok, const char* field, const char* reason) {
    require(ok, ErrorCode::kInvalidParam, std::string(field) + " " + reason);
  };
  if (used("delta")) check(delta > 0.0, "delta", "must be > 0");
  if (used("epsilon")) check(epsilon > 0.0, "epsilon", "must be > 0");
  if (used("kappa")) check(kappa >= 1, "kappa", "must be >= 1");
  if (used("tau")) check(tau > 0.0, "tau", "must be > 0");
  if (used("theta")) check(theta >= 0.0, "theta", "must be >= 0");
  if (used("mu")) check(mu > 0.0, "mu", "must be > 0");
  if (used("mc_samples")) check(mc_samples >= 1, "mc_samples", "must be >= 1");
  if (used("p_solve")) check(p_solve >= 0.0 && p_solve <= 1.0, "p_solve", "must lie in [0, 1]");
}

bool SolutionCache::insert(Vector x) {
  if (!index_.insert(x).second) return false;
  items_.push_back(std::move(x));
  return true;
}

bool SolutionCache::contains(std::span<const double> x) const {
  return index_.count(Vector(x.begin(), x.end())) > 0;
}

LossEval mse_loss(std::span<const double> c_hat, std::span<const double> c) {
  check_dims(c_hat, c, "mse");
  LossEval out;
  const double m = static_cast<double>(c.size());
  out.grad_c.resize(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double d = c_hat[j] - c[j];
    out.loss += d * d / m;
    out.grad_c[j] = 2.0 * d / m;
  }
  return out;
}

LossEval spo_plus(std::span<const double> c_hat, std::span<const double> c, std::span<const double> x_star_c,
                  const Oracle& oracle) {
  check_dims(c_hat, c, "spo+");
  check_dims(c, x_star_c, "spo+");
  Vector q(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) q[j] = 2.0 * c_hat[j] - c[j];
  const Vector x_q = oracle.solve_min(q).x;
  LossEval out;
  out.solver_calls = 1;
  out.loss = 2.0 * dot(c_hat, x_star_c) - dot(c, x_star_c) - dot(q, x_q);
  out.grad_c = Vector(x_star_c.begin(), x_star_c.end()) - x_q;
  return out;
}

LossEval dbb_grad(std::span<const double> c_hat, std::span<const double> upstream, double delta,
                  const Oracle& oracle, std::span<const double> x_hat) {
  check_dims(c_hat, upstream, "dbb");
  require(delta > 0.0, ErrorCode::kInvalidParam, "dbb: delta must be > 0");
  LossEval out;
  if (x_hat.empty()) {
    out.x_hat = oracle.solve_min(c_hat).x;
    ++out.solver_calls;
  } else {
    out.x_hat.assign(x_hat.begin(), x_hat.end());
  }
  const Vector x_pert = oracle.solve_min(axpy(c_hat, delta, upstream)).x;
  ++out.solver_calls;
  out.grad_c = x_pert - out.x_hat;
  return out;
}

Vector neg_identity_grad(std::span<const double> upstream) {
  Vector out(upstream.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = -upstream[j];
  return out;
}

LossEval imle_grad(std::span<const double> c_hat, std::span<const double> upstream, double delta,
                   double epsilon, int kappa, RngStream& rng, const Oracle& oracle) {
  check_dims(c_hat, upstream, "imle");
  require(delta > 0.0, ErrorCode::kInvalidParam, "imle: delta must be > 0");
  require(epsilon >= 0.0, ErrorCode::kInvalidParam, "imle: epsilon must be >= 0");
  require(kappa >= 1, ErrorCode::kInvalidParam, "imle: kappa must be >= 1");
  Vector base(c_hat.begin(), c_hat.end());
  if (epsilon > 0.0) {
    const Vector eta = sample_sum_of_gamma(rng, c_hat.size(), kappa);
    base = axpy(base, epsilon, eta);
  }
  LossEval out;
  out.x_hat = oracle.solve_min(base).x;
  const Vector x_pert = oracle.solve_min(axpy(base, delta, upstream)).x;
  out.solver_calls = 2;
  out.grad_c = x_pert - out.x_hat;
  return out;
}

Vector perturbed_mean(std::span<const double> c_hat, double epsilon, int mc_samples, RngStream& rng,
                      const Oracle& oracle) {
  require(mc_samples >= 1, ErrorCode::kInvalidParam, "perturbed mean: M must be >= 1");
  require(epsilon >= 0.0, ErrorCode::kInvalidParam, "perturbed mean: epsilon must be >= 0");
  Vector mean(c_hat.size(), 0.0);
  for (int m = 0; m < mc_samples; ++m) {
    const Vector eta = sample_normal(rng, c_hat.size());
    const Vector x = oracle.solve_min(axpy(c_hat, epsilon, eta)).x;
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += x[j];
  }
  for (double& v : mean) v /= static_cast<double>(mc_samples);
  return mean;
}

LossEval fy_grad(std::span<const double> c_hat, std::span<const double> x_star_c, double epsilon,
                 int mc_samples, RngStream& rng, const Oracle& oracle) {
  check_dims(c_hat, x_star_c, "fy");
  require(epsilon > 0.0, ErrorCode::kInvalidParam, "fy: epsilon must be > 0");
  const Vector x_bar = perturbed_mean(c_hat, epsilon, mc_samples, rng, oracle);
  LossEval out;
  out.solver_calls = static_cast<std::size_t>(mc_samples);
  out.grad_c = Vector(x_star_c.begin(), x_star_c.end()) - x_bar;
  out.loss = dot(c_hat, out.grad_c);
  out.x_hat = x_bar;
  return out;
}

Matrix dpo_jacobian(std::span<const double> c_hat, double epsilon, int mc_samples, RngStream& rng,
                    const Oracle& oracle, Vector* x_bar) {
  require(mc_samples >= 1, ErrorCode::kInvalidParam, "dpo: M must be >= 1");
  require(epsilon > 0.0, ErrorCode::kInvalidParam, "dpo: epsilon must be > 0");
  const std::size_t n = c_hat.size();
  Matrix jac(n, n, 0.0);
  Vector mean(n, 0.0);
  for (int m = 0; m < mc_samples; ++m) {
    const Vector eta = sample_normal(rng, n);
    const Vector x = oracle.solve_min(axpy(c_hat, epsilon, eta)).x;
    for (std::size_t i = 0; i < n; ++i) {
      mean[i] += x[i];
      if (x[i] == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) jac(i, j) += x[i] * eta[j];
    }
  }
  const double scale = 1.0 / (epsilon * static_cast<double>(mc_samples));
  for (double& v : jac.values()) v *= scale;
  if (x_bar != nullptr) {
    for (double& v : mean) v /= static_cast<double>(mc_samples);
    *x_bar = std::move(mean);
  }
  return jac;
}

LossEval nce_loss(std::span<const double> c_hat, std::span<const double> c, std::span<const double> x_star_c,
                  const SolutionCache& cache, bool cost_difference) {
  require_cache(cache, "nce");
  check_dims(c_hat, x_star_c, "nce");
  const Vector w = objective_vector(c_hat, c, cost_difference, "nce");
  LossEval out;
  out.grad_c.assign(c_hat.size(), 0.0);
  for (const Vector& x : cache.solutions()) {
    check_dims(x, x_star_c, "nce cache");
    if (same(x, x_star_c)) continue;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = x_star_c[j] - x[j];
      out.loss += w[j] * d;
      out.grad_c[j] += d;
    }
  }
  return out;
}

LossEval map_loss(std::span<const double> c_hat, std::span<const double> c, std::span<const double> x_star_c,
                  const SolutionCache& cache, bool cost_difference) {
  require_cache(cache, "map");
  check_dims(c_hat, x_star_c, "map");
  const Vector w = objective_vector(c_hat, c, cost_difference, "map");
  const Vector* best = nullptr;
  double best_value = 0.0;
  for (const Vector& x : cache.solutions()) {
    check_dims(x, x_star_c, "map cache");
    const double v = dot(w, x);
    if (best == nullptr || v < best_value) {
      best = &x;
      best_value = v;
    }
  }
  LossEval out;
  out.grad_c = Vector(x_star_c.begin(), x_star_c.end()) - *best;
  out.loss = dot(w, out.grad_c);
  return out;
}

LossEval pairwise_loss(std::span<const double> c_hat, std::span<const double> x_star_c,
                       const SolutionCache& cache, double theta) {
  require_cache(cache, "pairwise");
  check_dims(c_hat, x_star_c, "pairwise");
  require(theta >= 0.0, ErrorCode::kInvalidParam, "pairwise: theta must be >= 0");
  LossEval out;
  out.grad_c.assign(c_hat.size(), 0.0);
  const double star = dot(c_hat, x_star_c);
  for (const Vector& x : cache.solutions()) {
    check_dims(x, x_star_c, "pairwise cache");
    if (same(x, x_star_c)) continue;
    const double hinge = theta + star - dot(c_hat, x);
    if (!(hinge > 0.0)) continue;
    out.loss += hinge;
    for (std::size_t j = 0; j < x.size(); ++j) out.grad_c[j] += x_star_c[j] - x[j];
  }
  return out;
}

LossEval pairwise_diff_loss(std::span<const double> c_hat, std::span<const double> c,
                            std::span<const double> x_star_c, const SolutionCache& cache) {
  require_cache(cache, "pairwise diff");
  check_dims(c_hat, c, "pairwise diff");
  check_dims(c_hat, x_star_c, "pairwise diff");
  LossEval out;
  out.grad_c.assign(c_hat.size(), 0.0);
  Vector d(c_hat.size());
  for (const Vector& x : cache.solutions()) {
    check_dims(x, x_star_c, "pairwise diff cache");
    if (same(x, x_star_c)) continue;
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = x_star_c[j] - x[j];
    const double r = dot(c_hat, d) - dot(c, d);
    out.loss += r * r;
    for (std::size_t j = 0; j < d.size(); ++j) out.grad_c[j] += 2.0 * r * d[j];
  }
  return out;
}

LossEval listwise_loss(std::span<const double> c_hat, std::span<const double> c, const SolutionCache& cache,
                       double tau) {
  require_cache(cache, "listwise");
  check_dims(c_hat, c, "listwise");
  require(tau > 0.0, ErrorCode::kInvalidParam, "listwise: tau must be > 0");
  const auto& sols = cache.solutions();
  const std::size_t s = sols.size();
  // Tempered softmax of -objective / tau over the cache, log-sum-exp stabilized.
  auto log_probs = [&](std::span<const double> w) {
    Vector z(s);
    for (std::size_t k = 0; k < s; ++k) {
      check_dims(sols[k], w, "listwise cache");
      z[k] = -dot(w, sols[k]) / tau;
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    for (double& v : z) v -= lse;
    return z;
  };
  const Vector log_p = log_probs(c_hat);
  const Vector log_q = log_probs(c);
  LossEval out;
  out.grad_c.assign(c_hat.size(), 0.0);
  const double inv_s = 1.0 / static_cast<double>(s);
  for (std::size_t k = 0; k < s; ++k) {
    const double q = std::exp(log_q[k]);
    const double p = std::exp(log_p[k]);
    out.loss -= inv_s * q * log_p[k];
    for (std::size_t j = 0; j < c_hat.size(); ++j) out.grad_c[j] += inv_s / tau * (q - p) * sols[k][j];
  }
  return out;
}

bool cache_update(SolutionCache& cache, std::span<const double> c_hat, double p_solve, RngStream& rng,
                  const Oracle& oracle) {
  require(p_solve >= 0.0 && p_solve <= 1.0, ErrorCode::kInvalidParam, "cache update: p_solve must lie in [0, 1]");
  if (!rng.bernoulli(p_solve)) return false;
  cache.count_solver_call();
  cache.insert(oracle.solve_min(c_hat).x);
  return true;
}

Strategy::Strategy(StrategyConfig cfg, const Oracle& oracle, TaskLoss task)
    : cfg_(cfg), oracle_(oracle), task_(task), sign_(sense_sign(oracle.sense())) {
  cfg_.validate();
  if (cfg_.method == Method::kQPTL) qptl_.emplace(oracle, cfg_.mu);
}

void Strategy::init_cache(const std::vector<Vector>& solutions) {
  for (const Vector& x : solutions) {
    require(x.size() == oracle_.cost_dim() && oracle_.is_feasible(x), ErrorCode::kInvalidParam,
            "cache init: infeasible solution");
    cache_.insert(x);
  }
}

Vector Strategy::upstream(std::span<const double> c_min, std::span<const double> x_star) const {
  if (task_ == TaskLoss::kNegInnerProduct) return neg_identity_grad(x_star);
  require(c_min.size() == oracle_.cost_dim(), ErrorCode::kMissingTargets,
          to_string(cfg_.method) + ": regret task loss needs the true cost vector");
  return Vector(c_min.begin(), c_min.end());
}

double Strategy::task_loss(std::span<const double> c_min, std::span<const double> x_star,
                           std::span<const double> x) const {
  if (task_ == TaskLoss::kNegInnerProduct) return -dot(x_star, x);
  return dot(c_min, x) - dot(c_min, x_star);
}

LossEval Strategy::step(std::span<const double> c_hat, std::span<const double> c, std::span<const double> x_star,
                        RngStream& rng) {
  const std::size_t n = oracle_.cost_dim();
  require(c_hat.size() == n, ErrorCode::kDimMismatch, "strategy: prediction size does not match the oracle");
  require(x_star.size() == n, ErrorCode::kMissingTargets, "strategy: true solution missing");
  if (needs_true_cost(cfg_))
    require(c.size() == n, ErrorCode::kMissingTargets, to_string(cfg_.method) + " needs the true cost vector");
  Vector c_hat_min(c_hat.begin(), c_hat.end());
  for (double& v : c_hat_min) v *= sign_;
  Vector c_min(c.begin(), c.end());
  for (double& v : c_min) v *= sign_;

  LossEval out;
  bool native = false;
  switch (cfg_.method) {
    case Method::kPF:
      out = mse_loss(c_hat, c);
      native = true;
      break;
    case Method::kSPO: {
      Vector x_hat = oracle_.solve_min(c_hat_min).x;
      out = spo_plus(c_hat_min, c_min, x_star, oracle_);
      out.x_hat = std::move(x_hat);
      ++out.solver_calls;
      break;
    }
    case Method::kDBB:
      out = dbb_grad(c_hat_min, upstream(c_min, x_star), cfg_.delta, oracle_);
      out.loss = task_loss(c_min, x_star, out.x_hat);
      break;
    case Method::kNegIdentity: {
      const Vector up = upstream(c_min, x_star);
      const SphereProjection proj = project_unit_sphere(c_hat_min);
      out.x_hat = oracle_.solve_min(proj.v).x;
      out.solver_calls = 1;
      out.grad_c = neg_identity_grad(up);
      out.loss = task_loss(c_min, x_star, out.x_hat);
      break;
    }
    case Method::kIMLE:
      out = imle_grad(c_hat_min, upstream(c_min, x_star), cfg_.delta, cfg_.epsilon, cfg_.kappa, rng, oracle_);
      out.loss = task_loss(c_min, x_star, out.x_hat);
      break;
    case Method::kFY:
      out = fy_grad(c_hat_min, x_star, cfg_.epsilon, cfg_.mc_samples, rng, oracle_);
      break;
    case Method::kDPO: {
      const Vector up = upstream(c_min, x_star);
      Vector x_bar;
      const Matrix jac = dpo_jacobian(c_hat_min, cfg_.epsilon, cfg_.mc_samples, rng, oracle_, &x_bar);
      out.grad_c = matvec_transposed(jac, up);
      out.loss = task_loss(c_min, x_star, x_bar);
      out.x_hat = std::move(x_bar);
      out.solver_calls = static_cast<std::size_t>(cfg_.mc_samples);
      break;
    }
    case Method::kQPTL: {
      const Vector up = upstream(c_min, x_star);
      const QptlForward fwd = qptl_->forward(c_hat);
      out.grad_c = qptl_->backward(fwd, up);
      out.loss = task_loss(c_min, x_star, fwd.v);
      out.x_hat = fwd.v;
      out.solver_calls = 1;
      native = true;
      break;
    }
    case Method::kNCE:
    case Method::kMAP:
    case Method::kPairwise:
    case Method::kPairwiseDiff:
    case Method::kListwise: {
      const bool solved = cache_update(cache_, c_hat_min, cfg_.p_solve, rng, oracle_);
      if (cfg_.method == Method::kNCE) out = nce_loss(c_hat_min, c_min, x_star, cache_, cfg_.cost_difference);
      if (cfg_.method == Method::kMAP) out = map_loss(c_hat_min, c_min, x_star, cache_, cfg_.cost_difference);
      if (cfg_.method == Method::kPairwise) out = pairwise_loss(c_hat_min, x_star, cache_, cfg_.theta);
      if (cfg_.method == Method::kPairwiseDiff) out = pairwise_diff_loss(c_hat_min, c_min, x_star, cache_);
      if (cfg_.method == Method::kListwise) out = listwise_loss(c_hat_min, c_min, cache_, cfg_.tau);
      out.solver_calls = solved ? 1 : 0;
      break;
    }
  }
  if (!native)
    for (double& g : out.grad_c) g *= sign_;
  require(all_finite(out.grad_c), ErrorCode::kInvalidParam, to_string(cfg_.method) + ": non-finite gradient");
  solver_calls_ += out.solver_calls;
  return out;
}

}  // namespace dflbench
