#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dflbench/numerics.hpp"
#include "dflbench/qptl.hpp"
#include "dflbench/rng.hpp"
#include "dflbench/solvers.hpp"

namespace dflbench {

enum class Method {
  kPF,
  kSPO,
  kDBB,
  kNegIdentity,
  kIMLE,
  kFY,
  kDPO,
  kQPTL,
  kNCE,
  kMAP,
  kPairwise,
  kPairwiseDiff,
  kListwise,
};

std::string to_string(Method m);
// Accepts the names produced by to_string, case-insensitively. kConfigError otherwise.
Method method_from_string(const std::string& s);
const std::vector<Method>& all_methods();

struct StrategyConfig {
  Method method = Method::kPF;
  double delta = 1.0;    // DBB / I-MLE interpolation step
  double epsilon = 1.0;  // perturbation temperature (I-MLE, FY, DPO)
  int kappa = 5;         // Sum-of-Gamma shape (I-MLE)
  double tau = 1.0;      // listwise temperature
  double theta = 0.1;    // pairwise margin
  double mu = 1.0;       // QPTL quadratic weight
  int mc_samples = 16;   // M for FY / DPO
  double p_solve = 0.05;
  bool cost_difference = false;  // (c_hat - c) variant of NCE / MAP

  // kInvalidParam naming the offending field.
  void validate() const;
};

// Hyperparameter names a method reads from its config, in canonical order.
std::vector<std::string> method_hyperparams(Method m);
bool uses_cache(Method m);
// True when the method needs the true cost vector c (not only the true solution).
bool needs_true_cost(const StrategyConfig& cfg);

// Feasible solutions seen so far, deduplicated by exact vector equality.
class SolutionCache {
 public:
  // Returns true when x was not already present.
  bool insert(Vector x);
  bool contains(std::span<const double> x) const;
  const std::vector<Vector>& solutions() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }

  std::size_t solver_calls() const noexcept { return solver_calls_; }
  void count_solver_call() noexcept { ++solver_calls_; }

 private:
  std::vector<Vector> items_;
  std::set<Vector> index_;
  std::size_t solver_calls_ = 0;
};

struct LossEval {
  double loss = 0.0;
  Vector grad_c;  // dL/dc_hat
  std::size_t solver_calls = 0;
  Vector x_hat;   // decision used on the forward pass, when one was computed
};

// The functions below work in minimization-canonical form: c_hat and c are c_min = sign * c,
// oracle calls go through Oracle::solve_min, gradients are with respect to c_hat_min.
// `upstream` is dL/dx for a task loss defined on the decision x.

LossEval mse_loss(std::span<const double> c_hat, std::span<const double> c);

LossEval spo_plus(std::span<const double> c_hat, std::span<const double> c,
                  std::span<const double> x_star_c, const Oracle& oracle);

// x*(c_hat + delta * upstream) - x*(c_hat). x_hat, when given, is x*(c_hat) from the forward pass.
LossEval dbb_grad(std::span<const double> c_hat, std::span<const double> upstream, double delta,
                  const Oracle& oracle, std::span<const double> x_hat = {});

Vector neg_identity_grad(std::span<const double> upstream);

// x*(c_hat + delta * upstream + eps * eta) - x*(c_hat + eps * eta) with one Sum-of-Gamma draw eta
// shared by both solves. epsilon == 0 skips the draw and reduces to dbb_grad.
LossEval imle_grad(std::span<const double> c_hat, std::span<const double> upstream, double delta,
                   double epsilon, int kappa, RngStream& rng, const Oracle& oracle);

// Mean of M solves at c_hat + epsilon * eta, eta standard normal.
Vector perturbed_mean(std::span<const double> c_hat, double epsilon, int mc_samples, RngStream& rng,
                      const Oracle& oracle);

// Gradient x*(c) - x_bar; the loss is the monitoring value c_hat . (x*(c) - x_bar).
LossEval fy_grad(std::span<const double> c_hat, std::span<const double> x_star_c, double epsilon,
                 int mc_samples, RngStream& rng, const Oracle& oracle);

// J[i][j] = d x_bar_i / d c_hat_j estimated as (1/(eps M)) sum_m x*(c_hat + eps eta_m) eta_m^T.
// Also returns the perturbed mean when x_bar is non-null.
Matrix dpo_jacobian(std::span<const double> c_hat, double epsilon, int mc_samples, RngStream& rng,
                    const Oracle& oracle, Vector* x_bar = nullptr);

// Cache losses make no oracle calls. Cache entries equal to x*(c) contribute nothing.
// With cost_difference the objective vector in the loss is (c_hat - c); c may be empty otherwise.
LossEval nce_loss(std::span<const double> c_hat, std::span<const double> c,
                  std::span<const double> x_star_c, const SolutionCache& cache, bool cost_difference);
LossEval map_loss(std::span<const double> c_hat, std::span<const double> c,
                  std::span<const double> x_star_c, const SolutionCache& cache, bool cost_difference);
LossEval pairwise_loss(std::span<const double> c_hat, std::span<const double> x_star_c,
                       const SolutionCache& cache, double theta);
LossEval pairwise_diff_loss(std::span<const double> c_hat, std::span<const double> c,
                            std::span<const double> x_star_c, const SolutionCache& cache);
LossEval listwise_loss(std::span<const double> c_hat, std::span<const double> c,
                       const SolutionCache& cache, double tau);

// With probability p_solve solves at c_hat and inserts the solution. Returns whether it solved.
bool cache_update(SolutionCache& cache, std::span<const double> c_hat, double p_solve, RngStream& rng,
                  const Oracle& oracle);

// Task loss on a decision: regret-style c_min . x, or the negated inner product with the
// true solution when only true solutions are available.
enum class TaskLoss { kRegret, kNegInnerProduct };

// Per-instance dispatch: takes c_hat in the oracle's native sense and returns the gradient in
// that sense, so the predictor never sees the canonicalization.
class Strategy {
 public:
  Strategy(StrategyConfig cfg, const Oracle& oracle, TaskLoss task = TaskLoss::kRegret);

  // Seeds the cache with training solutions (infeasible ones are rejected with kInvalidParam).
  void init_cache(const std::vector<Vector>& solutions);

  // c may be empty for methods that do not need it.
  LossEval step(std::span<const double> c_hat, std::span<const double> c, std::span<const double> x_star,
                RngStream& rng);

  const StrategyConfig& config() const noexcept { return cfg_; }
  const SolutionCache& cache() const noexcept { return cache_; }
  std::size_t solver_calls() const noexcept { return solver_calls_; }

 private:
  Vector upstream(std::span<const double> c_min, std::span<const double> x_star) const;
  double task_loss(std::span<const double> c_min, std::span<const double> x_star,
                   std::span<const double> x) const;

  StrategyConfig cfg_;
  const Oracle& oracle_;
  TaskLoss task_;
  double sign_;
  std::optional<QptlLayer> qptl_;
  SolutionCache cache_;
  std::size_t solver_calls_ = 0;
};

}  // namespace dflbench
