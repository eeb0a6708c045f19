#pragma once

#include <optional>
#include <span>

#include "dflbench/numerics.hpp"
#include "dflbench/solvers.hpp"

namespace dflbench {

struct QpOptions {
  double tol = 1e-10;       // primal and complementarity tolerance (relative)
  double dual_tol = 1e-8;   // stationarity tolerance; the active-set polish removes the remainder
  int max_iterations = 100;
  double active_tol = 1e-8;  // strict complementarity threshold for active-set classification
};

// Factors of the active-set KKT system at a solved point: an orthonormal basis of the span
// of the active constraint rows. Reusable for any number of upstream vectors.
// When classification is ambiguous, `full` instead holds the LU of the full KKT matrix with
// the complementarity block eliminated (damped), and the basis is unused.
struct KktFactors {
  Matrix basis;  // n x k, orthonormal columns
  std::optional<LuFactorization> full;
};

struct QpSolution {
  Vector x;       // decision space
  Vector y_eq;    // equality multipliers
  Vector z_ineq;  // inequality multipliers (general rows, then finite lower, then finite upper bounds)
  Vector slack;
  int iterations = 0;
  bool polished = false;
  double kkt_residual = 0.0;
  KktFactors factors;
};

// min q.x + mu ||x||^2 over an LP relaxation's feasible polytope.
class SmoothedQp {
 public:
  SmoothedQp(LpRelaxation relax, double mu, QpOptions opts = {});

  QpSolution solve(std::span<const double> q) const;
  // dL/dq for upstream dL/dx at a solution of this QP.
  Vector backward(const QpSolution& sol, std::span<const double> upstream) const;

  const LpRelaxation& relaxation() const noexcept { return relax_; }
  double mu() const noexcept { return mu_; }
  std::size_t num_vars() const noexcept { return relax_.num_vars(); }

  // Largest residual of stationarity, primal feasibility and complementarity.
  double residual(std::span<const double> q, const QpSolution& sol) const;

 private:
  LpRelaxation relax_;
  double mu_;
  QpOptions opts_;
  std::vector<std::size_t> lower_idx_;
  std::vector<std::size_t> upper_idx_;
};

// Forward and backward passes in the cost space of an oracle, in its native sense.
// Forward returns the cost-space image of the smoothed solution.
struct QptlForward {
  QpSolution qp;
  Vector v;  // cost-space solution, v = cost_map x
};

class QptlLayer {
 public:
  QptlLayer(const Oracle& oracle, double mu, QpOptions opts = {});

  QptlForward forward(std::span<const double> c_hat) const;
  // dL/dc_hat (native sense) for upstream dL/dv in cost space.
  Vector backward(const QptlForward& fwd, std::span<const double> upstream_v) const;

  const SmoothedQp& qp() const noexcept { return qp_; }

 private:
  SmoothedQp qp_;
  double sign_;
};

}  // namespace dflbench
