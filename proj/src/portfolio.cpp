#include <algorithm>
#include <cmath>

#include "dflbench/solvers.hpp"

namespace dflbench {
namespace {

struct BarrierState {
  double risk_slack;  // gamma - x' Sigma x
  double sum_slack;   // 1 - 1'x
  Vector sigma_x;
};

bool strictly_feasible(const PortfolioSpec& spec, bool use_risk, std::span<const double> x, BarrierState* st) {
  double s = 0.0;
  for (double v : x) {
    if (!(v > 0.0)) return false;
    s += v;
  }
  st->sum_slack = 1.0 - s;
  if (!(st->sum_slack > 0.0)) return false;
  if (use_risk) {
    st->sigma_x = matvec(spec.sigma, x);
    st->risk_slack = spec.gamma - dot(x, st->sigma_x);
    if (!(st->risk_slack > 0.0)) return false;
  }
  return true;
}

double barrier_value(std::span<const double> c, double t, bool use_risk, std::span<const double> x,
                     const BarrierState& st) {
  double f = -t * dot(c, x) - std::log(st.sum_slack);
  if (use_risk) f -= std::log(st.risk_slack);
  for (double v : x) f -= std::log(v);
  return f;
}

// KKT residual of the original problem at x: the smallest violation over a few candidate
// multiplier pairs (nu for 1'x <= 1, mu for the risk bound), with the bound multipliers
// implied by stationarity. Combines stationarity sign, complementarity and dual feasibility.
// The barrier-implied multipliers lose precision once slacks approach rounding level, so
// least-squares fits on the free coordinates are tried as well.
double kkt_residual(const PortfolioSpec& spec, bool use_risk, std::span<const double> c, double t,
                    std::span<const double> x, const BarrierState& st) {
  const std::size_t d = x.size();
  auto violation = [&](double nu, double mu) {
    double res = std::max(nu * std::abs(st.sum_slack), use_risk ? mu * std::abs(st.risk_slack) : 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      double r = -c[i] + nu;
      if (use_risk) r += 2.0 * mu * st.sigma_x[i];
      res = std::max({res, -r, std::abs(r) * x[i]});
    }
    return res;
  };
  double best = violation(1.0 / (t * st.sum_slack), use_risk ? 1.0 / (t * st.risk_slack) : 0.0);

  const double x_max = norm_inf(x);
  double s11 = 0.0, s12 = 0.0, s22 = 0.0, b1 = 0.0, b2 = 0.0;
  std::size_t n_free = 0;
  for (std::size_t i = 0; i < d; ++i) {
    if (x[i] <= 1e-6 * x_max) continue;
    const double a2 = use_risk ? 2.0 * st.sigma_x[i] : 0.0;
    s11 += 1.0;
    s12 += a2;
    s22 += a2 * a2;
    b1 += c[i];
    b2 += a2 * c[i];
    ++n_free;
  }
  if (n_free == 0) return best;
  best = std::min(best, violation(std::max(0.0, b1 / s11), 0.0));
  if (use_risk && s22 > 0.0) {
    best = std::min(best, violation(0.0, std::max(0.0, b2 / s22)));
    const double det = s11 * s22 - s12 * s12;
    if (std::abs(det) > 1e-14 * s11 * s22) {
      const double nu = (b1 * s22 - b2 * s12) / det;
      const double mu = (s11 * b2 - s12 * b1) / det;
      best = std::min(best, violation(std::max(0.0, nu), std::max(0.0, mu)));
    }
  }
  return best;
}

}  // namespace

PortfolioSolution solve_portfolio_detailed(const PortfolioSpec& spec, std::span<const double> c,
                                           const PortfolioOptions& opts) {
  const std::size_t d = spec.assets();
  require(d >= 1 && spec.sigma.cols() == d, ErrorCode::kDimMismatch, "portfolio: Sigma must be square");
  require(c.size() == d, ErrorCode::kDimMismatch, "portfolio: return vector size");
  const bool use_risk = !spec.degenerate;
  if (use_risk) require(spec.gamma > 0.0, ErrorCode::kInvalidParam, "portfolio: gamma must be positive");
  const double n_constraints = static_cast<double>(d + 1 + (use_risk ? 1 : 0));

  Vector x(d, 0.5 / static_cast<double>(d));
  BarrierState st;
  while (!strictly_feasible(spec, use_risk, x, &st)) {
    for (double& v : x) v *= 0.5;
    if (x[0] < 1e-300) fail(ErrorCode::kInfeasible, "portfolio: no strictly feasible start");
  }

  const double scale = std::max(1.0, norm_inf(c));
  double t = 1.0 / scale;
  int steps = 0;
  PortfolioSolution out;
  while (true) {
    // Centering by damped Newton.
    while (true) {
      Vector grad(d);
      Matrix hess(d, d);
      const double inv_sum = 1.0 / st.sum_slack;
      for (std::size_t i = 0; i < d; ++i) {
        grad[i] = -t * c[i] + inv_sum - 1.0 / x[i];
        hess(i, i) += 1.0 / (x[i] * x[i]);
        for (std::size_t j = 0; j < d; ++j) hess(i, j) += inv_sum * inv_sum;
      }
      if (use_risk) {
        const double inv_risk = 1.0 / st.risk_slack;
        for (std::size_t i = 0; i < d; ++i) {
          grad[i] += 2.0 * st.sigma_x[i] * inv_risk;
          for (std::size_t j = 0; j < d; ++j)
            hess(i, j) += 2.0 * spec.sigma(i, j) * inv_risk +
                          4.0 * st.sigma_x[i] * st.sigma_x[j] * inv_risk * inv_risk;
        }
      }
      // Diagonal scaling keeps the Newton system well conditioned near the boundary.
      Vector dscale(d);
      for (std::size_t i = 0; i < d; ++i) dscale[i] = x[i];
      Matrix scaled(d, d);
      Vector rhs(d);
      for (std::size_t i = 0; i < d; ++i) {
        rhs[i] = -grad[i] * dscale[i];
        for (std::size_t j = 0; j < d; ++j) scaled(i, j) = hess(i, j) * dscale[i] * dscale[j];
      }
      Vector step = LuFactorization(std::move(scaled), 1e-300).solve(rhs);
      for (std::size_t i = 0; i < d; ++i) step[i] *= dscale[i];
      const double decrement = -dot(grad, step);
      out.kkt_residual = kkt_residual(spec, use_risk, c, t, x, st);
      if (decrement / 2.0 <= 1e-10) break;
      if (++steps > opts.max_newton_steps)
        fail(ErrorCode::kMaxIterations, "portfolio barrier exceeded Newton step budget");
      const double f0 = barrier_value(c, t, use_risk, x, st);
      double alpha = 1.0, f_trial = f0;
      Vector trial(d);
      BarrierState trial_st;
      while (true) {
        for (std::size_t i = 0; i < d; ++i) trial[i] = x[i] + alpha * step[i];
        if (strictly_feasible(spec, use_risk, trial, &trial_st)) {
          f_trial = barrier_value(c, t, use_risk, trial, trial_st);
          if (f_trial <= f0 - 0.25 * alpha * decrement) break;
        }
        alpha *= 0.5;
        if (alpha < 1e-14) break;
      }
      // No representable progress left at this barrier weight.
      if (alpha < 1e-14 || !(f_trial < f0)) break;
      x = trial;
      st = trial_st;
    }
    if (1.0 / t <= opts.barrier_tol && out.kkt_residual <= opts.kkt_tol) break;
    if (n_constraints / t <= opts.barrier_tol * 1e-3) break;
    t *= 20.0;
  }
  out.newton_steps = steps;
  out.solution.x = x;
  out.solution.objective = dot(c, x);
  out.solution.status = SolveStatus::kOptimal;
  return out;
}

Solution solve_portfolio(const PortfolioSpec& spec, std::span<const double> c) {
  return solve_portfolio_detailed(spec, c).solution;
}

}  // namespace dflbench
