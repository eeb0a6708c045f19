#include "dflbench/qptl.hpp"

#include <algorithm>
#include <cmath>

namespace dflbench {
namespace {

// Modified Gram-Schmidt over rows (with one reorthogonalization pass). Row i of the input
// equals sum_l coeff(i, l) * basis_l; `pivots[l]` is the row that introduced basis_l, so the
// pivot rows of coeff form a lower-triangular, invertible system.
struct RowBasis {
  std::vector<Vector> basis;
  std::vector<std::size_t> pivots;
  Matrix coeff;
};

RowBasis orthonormalize_rows(const std::vector<Vector>& rows, std::size_t n) {
  RowBasis rb;
  rb.coeff = Matrix(rows.size(), std::min(rows.size(), n));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Vector v = rows[i];
    const double norm0 = norm2(v);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t l = 0; l < rb.basis.size(); ++l) {
        const double p = dot(rb.basis[l], v);
        rb.coeff(i, l) += p;
        for (std::size_t j = 0; j < n; ++j) v[j] -= p * rb.basis[l][j];
      }
    }
    const double nv = norm2(v);
    if (nv > 1e-10 * std::max(1.0, norm0) && rb.basis.size() < n) {
      rb.coeff(i, rb.basis.size()) = nv;
      for (double& e : v) e /= nv;
      rb.basis.push_back(std::move(v));
      rb.pivots.push_back(i);
    }
  }
  return rb;
}

// w with rows(pivots) . (basis w) = rhs(pivots): forward substitution on the pivot rows.
Vector solve_pivot_rows(const RowBasis& rb, std::span<const double> rhs) {
  const std::size_t k = rb.basis.size();
  Vector w(k, 0.0);
  for (std::size_t l = 0; l < k; ++l) {
    const std::size_t r = rb.pivots[l];
    double acc = rhs[r];
    for (std::size_t m = 0; m < l; ++m) acc -= rb.coeff(r, m) * w[m];
    w[l] = acc / rb.coeff(r, l);
  }
  return w;
}

// Multipliers lambda with sum_i lambda_i row_i = target (target in the row span), taken as
// the minimum-norm correction of `guess`. With dependent rows the multipliers are not unique
// and the correction keeps them close to the interior-point duals.
Vector refine_multipliers(const RowBasis& rb, std::span<const double> target, const Vector& guess) {
  const std::size_t k = rb.basis.size(), rows = guess.size();
  Vector t(k);
  for (std::size_t l = 0; l < k; ++l) {
    t[l] = dot(rb.basis[l], target);
    for (std::size_t i = 0; i < rows; ++i) t[l] -= rb.coeff(i, l) * guess[i];
  }
  if (k == 0) return guess;
  Matrix ctc(k, k);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      const double cil = rb.coeff(i, l);
      if (cil == 0.0) continue;
      for (std::size_t m = 0; m < k; ++m) ctc(l, m) += cil * rb.coeff(i, m);
    }
  const Vector w = solve_linear_system(ctc, t);
  Vector lambda = guess;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t l = 0; l < k; ++l) lambda[i] += rb.coeff(i, l) * w[l];
  return lambda;
}

}  // namespace

SmoothedQp::SmoothedQp(LpRelaxation relax, double mu, QpOptions opts)
    : relax_(std::move(relax)), mu_(mu), opts_(opts) {
  require(mu > 0.0 && std::isfinite(mu), ErrorCode::kInvalidParam, "QPTL mu must be positive");
  const std::size_t n = relax_.num_vars();
  require(relax_.upper.size() == n, ErrorCode::kDimMismatch, "QPTL bounds size mismatch");
  require(relax_.a_eq.rows() == 0 || relax_.a_eq.cols() == n, ErrorCode::kDimMismatch, "QPTL equality width");
  require(relax_.g.rows() == 0 || relax_.g.cols() == n, ErrorCode::kDimMismatch, "QPTL inequality width");
  require(relax_.b_eq.size() == relax_.a_eq.rows() && relax_.h.size() == relax_.g.rows(), ErrorCode::kDimMismatch,
          "QPTL right-hand side sizes");
  if (relax_.a_eq.cols() != n) relax_.a_eq = Matrix(0, n);
  if (relax_.g.cols() != n) relax_.g = Matrix(0, n);

  // Drop linearly dependent equality rows so the KKT matrix stays nonsingular.
  if (relax_.a_eq.rows() > 0) {
    std::vector<Vector> rows;
    for (std::size_t i = 0; i < relax_.a_eq.rows(); ++i)
      rows.emplace_back(relax_.a_eq.row(i).begin(), relax_.a_eq.row(i).end());
    const RowBasis rb = orthonormalize_rows(rows, n);
    if (rb.pivots.size() < rows.size()) {
      const Vector w = solve_pivot_rows(rb, relax_.b_eq);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        double implied = 0.0;
        for (std::size_t l = 0; l < w.size(); ++l) implied += rb.coeff(i, l) * w[l];
        require(std::abs(implied - relax_.b_eq[i]) <= 1e-9 * (1.0 + std::abs(relax_.b_eq[i])),
                ErrorCode::kInfeasible, "QPTL equality rows are inconsistent");
      }
      Matrix a(rb.pivots.size(), n);
      Vector b(rb.pivots.size());
      for (std::size_t l = 0; l < rb.pivots.size(); ++l) {
        std::copy(rows[rb.pivots[l]].begin(), rows[rb.pivots[l]].end(), a.row(l).begin());
        b[l] = relax_.b_eq[rb.pivots[l]];
      }
      relax_.a_eq = std::move(a);
      relax_.b_eq = std::move(b);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (std::isfinite(relax_.lower[j])) lower_idx_.push_back(j);
    if (std::isfinite(relax_.upper[j])) upper_idx_.push_back(j);
  }
}

QpSolution SmoothedQp::solve(std::span<const double> q) const {
  const std::size_t n = num_vars();
  require(q.size() == n, ErrorCode::kDimMismatch, "QPTL cost size mismatch");
  require(all_finite(q), ErrorCode::kInvalidParam, "QPTL cost is not finite");
  const Matrix& a = relax_.a_eq;
  const Matrix& g = relax_.g;
  const std::size_t me = a.rows(), mg = g.rows(), nl = lower_idx_.size();
  const std::size_t mi = mg + nl + upper_idx_.size();

  // Stacked inequalities G^ x <= h^: general rows, then -x_j <= -l_j, then x_j <= u_j.
  auto ineq_apply = [&](std::span<const double> x) {
    Vector out(mi);
    const Vector gx = matvec(g, x);
    std::copy(gx.begin(), gx.end(), out.begin());
    for (std::size_t k = 0; k < nl; ++k) out[mg + k] = -x[lower_idx_[k]];
    for (std::size_t k = 0; k < upper_idx_.size(); ++k) out[mg + nl + k] = x[upper_idx_[k]];
    return out;
  };
  auto ineq_apply_t = [&](std::span<const double> v) {
    Vector out = matvec_transposed(g, v.subspan(0, mg));
    if (out.empty()) out.assign(n, 0.0);
    for (std::size_t k = 0; k < nl; ++k) out[lower_idx_[k]] -= v[mg + k];
    for (std::size_t k = 0; k < upper_idx_.size(); ++k) out[upper_idx_[k]] += v[mg + nl + k];
    return out;
  };
  Vector h_hat(mi);
  std::copy(relax_.h.begin(), relax_.h.end(), h_hat.begin());
  for (std::size_t k = 0; k < nl; ++k) h_hat[mg + k] = -relax_.lower[lower_idx_[k]];
  for (std::size_t k = 0; k < upper_idx_.size(); ++k) h_hat[mg + nl + k] = relax_.upper[upper_idx_[k]];

  Vector x(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double lo = relax_.lower[j], hi = relax_.upper[j];
    if (std::isfinite(lo) && std::isfinite(hi)) x[j] = 0.5 * (lo + hi);
    else if (std::isfinite(lo)) x[j] = lo + 1.0;
    else if (std::isfinite(hi)) x[j] = hi - 1.0;
  }
  Vector y(me, 0.0), z(mi, 1.0), s(mi);
  {
    const Vector gx = ineq_apply(x);
    for (std::size_t k = 0; k < mi; ++k) s[k] = std::max(h_hat[k] - gx[k], 1.0);
  }

  const double q_scale = 1.0 + norm_inf(q);
  const double b_scale = 1.0 + norm_inf(relax_.b_eq);
  const double h_scale = 1.0 + norm_inf(h_hat);
  QpSolution sol;
  const std::size_t dim = n + me;
  struct Iterate {
    double merit = kInf;
    Vector x, y, z, s;
  } best;
  for (int iter = 0;; ++iter) {
    Vector r_d = 2.0 * mu_ * x;
    for (std::size_t j = 0; j < n; ++j) r_d[j] += q[j];
    if (me > 0) r_d = r_d + matvec_transposed(a, y);
    if (mi > 0) r_d = r_d + ineq_apply_t(z);
    const Vector r_p = me > 0 ? matvec(a, x) - relax_.b_eq : Vector{};
    Vector r_i(mi);
    const Vector gx = ineq_apply(x);
    for (std::size_t k = 0; k < mi; ++k) r_i[k] = gx[k] + s[k] - h_hat[k];
    const double gap = mi > 0 ? dot(s, z) / static_cast<double>(mi) : 0.0;
    if (norm_inf(r_d) <= opts_.dual_tol * q_scale && norm_inf(r_p) <= opts_.tol * b_scale &&
        norm_inf(r_i) <= opts_.tol * h_scale && gap <= opts_.tol) {
      sol.iterations = iter;
      break;
    }
    // Near-degenerate problems can stall at the precision floor and then drift; remember the
    // best iterate so that a stall close to the optimum still yields a usable point.
    const double merit = std::max({norm_inf(r_d) / q_scale, norm_inf(r_p) / b_scale, norm_inf(r_i) / h_scale, gap});
    if (merit < best.merit) best = {merit, x, y, z, s};
    if (iter >= opts_.max_iterations) {
      if (best.merit <= 1e-6) {
        x = best.x;
        y = best.y;
        z = best.z;
        s = best.s;
        sol.iterations = iter;
        break;
      }
      const bool primal_bad = norm_inf(r_p) > 1e-6 * b_scale || norm_inf(r_i) > 1e-6 * h_scale;
      fail(primal_bad ? ErrorCode::kInfeasible : ErrorCode::kMaxIterations,
           primal_bad ? "QPTL relaxation appears infeasible" : "QPTL interior point did not converge");
    }

    Vector w(mi);
    for (std::size_t k = 0; k < mi; ++k) w[k] = z[k] / s[k];
    // Bound multipliers are eliminated (diagonal terms); general rows stay in augmented form with
    // -s/z on the diagonal, since eliminating them adds w g g^T, which swamps the rest of the
    // matrix once a row becomes active.
    Matrix kkt(dim + mg, dim + mg);
    for (std::size_t j = 0; j < n; ++j) kkt(j, j) = 2.0 * mu_;
    for (std::size_t k = 0; k < nl; ++k) kkt(lower_idx_[k], lower_idx_[k]) += w[mg + k];
    for (std::size_t k = 0; k < upper_idx_.size(); ++k) kkt(upper_idx_[k], upper_idx_[k]) += w[mg + nl + k];
    for (std::size_t r = 0; r < me; ++r) {
      for (std::size_t j = 0; j < n; ++j) {
        kkt(n + r, j) = a(r, j);
        kkt(j, n + r) = a(r, j);
      }
    }
    for (std::size_t r = 0; r < mg; ++r) {
      for (std::size_t j = 0; j < n; ++j) {
        kkt(dim + r, j) = g(r, j);
        kkt(j, dim + r) = g(r, j);
      }
      kkt(dim + r, dim + r) = -s[r] / std::max(z[r], 1e-300);
    }
    const LuFactorization lu(std::move(kkt), 1e-300);

    auto newton = [&](const Vector& r_c, Vector& dx, Vector& dy, Vector& ds, Vector& dz) {
      Vector t(mi);
      for (std::size_t k = 0; k < mi; ++k) t[k] = (r_c[k] - z[k] * r_i[k]) / s[k];
      Vector rhs(dim + mg);
      Vector t_bounds = t;
      for (std::size_t r = 0; r < mg; ++r) {
        t_bounds[r] = 0.0;
        rhs[dim + r] = t[r] * s[r] / std::max(z[r], 1e-300);
      }
      const Vector gt = mi > 0 ? ineq_apply_t(t_bounds) : Vector(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) rhs[j] = -r_d[j] + gt[j];
      for (std::size_t r = 0; r < me; ++r) rhs[n + r] = -r_p[r];
      const Vector sol_v = lu.solve(rhs);
      dx.assign(sol_v.begin(), sol_v.begin() + static_cast<std::ptrdiff_t>(n));
      dy.assign(sol_v.begin() + static_cast<std::ptrdiff_t>(n), sol_v.begin() + static_cast<std::ptrdiff_t>(dim));
      const Vector gdx = ineq_apply(dx);
      ds.resize(mi);
      dz.resize(mi);
      for (std::size_t k = 0; k < mi; ++k) {
        ds[k] = -r_i[k] - gdx[k];
        dz[k] = (-r_c[k] - z[k] * ds[k]) / s[k];
      }
    };
    auto max_step = [&](const Vector& ds, const Vector& dz) {
      double alpha = 1.0;
      for (std::size_t k = 0; k < mi; ++k) {
        if (ds[k] < 0.0) alpha = std::min(alpha, -s[k] / ds[k]);
        if (dz[k] < 0.0) alpha = std::min(alpha, -z[k] / dz[k]);
      }
      return alpha;
    };

    Vector dx, dy, ds, dz;
    Vector r_c(mi);
    for (std::size_t k = 0; k < mi; ++k) r_c[k] = s[k] * z[k];
    newton(r_c, dx, dy, ds, dz);
    if (mi > 0) {
      const double a_aff = max_step(ds, dz);
      double gap_aff = 0.0;
      for (std::size_t k = 0; k < mi; ++k) gap_aff += (s[k] + a_aff * ds[k]) * (z[k] + a_aff * dz[k]);
      gap_aff /= static_cast<double>(mi);
      const double sigma = std::pow(gap_aff / gap, 3);
      for (std::size_t k = 0; k < mi; ++k) r_c[k] = s[k] * z[k] + ds[k] * dz[k] - sigma * gap;
      newton(r_c, dx, dy, ds, dz);
    }
    const double alpha = mi > 0 ? std::min(1.0, 0.99 * max_step(ds, dz)) : 1.0;
    for (std::size_t j = 0; j < n; ++j) x[j] += alpha * dx[j];
    for (std::size_t r = 0; r < me; ++r) y[r] += alpha * dy[r];
    for (std::size_t k = 0; k < mi; ++k) {
      s[k] += alpha * ds[k];
      z[k] += alpha * dz[k];
    }
  }

  // Active-set polish: project -q/(2 mu) onto the affine hull of the active constraints.
  const double z_scale = 1.0 + norm_inf(z);
  std::vector<std::size_t> active;
  bool ambiguous = false;
  for (std::size_t k = 0; k < mi; ++k) {
    if (s[k] < z[k]) active.push_back(k);
    if (std::max(s[k], z[k] / z_scale) < opts_.active_tol) ambiguous = true;
  }
  std::vector<Vector> rows;
  Vector rhs;
  for (std::size_t r = 0; r < me; ++r) {
    rows.emplace_back(a.row(r).begin(), a.row(r).end());
    rhs.push_back(relax_.b_eq[r]);
  }
  for (std::size_t k : active) {
    Vector row(n, 0.0);
    if (k < mg) {
      std::copy(g.row(k).begin(), g.row(k).end(), row.begin());
    } else if (k < mg + nl) {
      row[lower_idx_[k - mg]] = -1.0;
    } else {
      row[upper_idx_[k - mg - nl]] = 1.0;
    }
    rows.push_back(std::move(row));
    rhs.push_back(h_hat[k]);
  }
  RowBasis rb = orthonormalize_rows(rows, n);
  Vector xp(n, 0.0);
  {
    const Vector wv = solve_pivot_rows(rb, rhs);
    for (std::size_t l = 0; l < wv.size(); ++l)
      for (std::size_t j = 0; j < n; ++j) xp[j] += wv[l] * rb.basis[l][j];
  }
  Vector x_free(n);
  for (std::size_t j = 0; j < n; ++j) x_free[j] = -q[j] / (2.0 * mu_);
  Vector x_pol = x_free;
  for (const auto& u : rb.basis) {
    const double p = dot(u, x_free);
    for (std::size_t j = 0; j < n; ++j) x_pol[j] -= p * u[j];
  }
  for (std::size_t j = 0; j < n; ++j) x_pol[j] += xp[j];

  bool ok = true;
  {
    const Vector gx = ineq_apply(x_pol);
    for (std::size_t k = 0; k < mi && ok; ++k) ok = gx[k] <= h_hat[k] + 1e-9 * h_scale;
    if (me > 0 && ok) ok = norm_inf(matvec(a, x_pol) - relax_.b_eq) <= 1e-9 * b_scale;
    for (std::size_t i = 0; i < rows.size() && ok; ++i) ok = std::abs(dot(rows[i], x_pol) - rhs[i]) <= 1e-9 * h_scale;
    ok = ok && norm_inf(x_pol - x) <= 1e-5 * (1.0 + norm_inf(x));
  }
  Vector y_pol(me, 0.0), z_pol(mi, 0.0);
  if (ok) {
    Vector target(n);
    for (std::size_t j = 0; j < n; ++j) target[j] = -(2.0 * mu_ * x_pol[j] + q[j]);
    Vector guess(rows.size());
    for (std::size_t r = 0; r < me; ++r) guess[r] = y[r];
    for (std::size_t i = 0; i < active.size(); ++i) guess[me + i] = z[active[i]];
    Vector lambda;
    try {
      lambda = refine_multipliers(rb, target, guess);
    } catch (const Error&) {
      lambda = guess;
    }
    for (std::size_t r = 0; r < me; ++r) y_pol[r] = lambda[r];
    for (std::size_t i = 0; i < active.size(); ++i) {
      z_pol[active[i]] = lambda[me + i];
      if (lambda[me + i] < -1e-7 * q_scale) ok = false;
    }
  }
  if (ok) {
    x = std::move(x_pol);
    y = std::move(y_pol);
    z = std::move(z_pol);
    for (double& v : z) v = std::max(v, 0.0);
    const Vector gx = ineq_apply(x);
    for (std::size_t k = 0; k < mi; ++k) s[k] = std::max(0.0, h_hat[k] - gx[k]);
    sol.polished = true;
  }
  sol.x = std::move(x);
  sol.y_eq = std::move(y);
  sol.z_ineq = std::move(z);
  sol.slack = std::move(s);

  if (sol.polished && !ambiguous) {
    sol.factors.basis = Matrix(n, rb.basis.size());
    for (std::size_t l = 0; l < rb.basis.size(); ++l)
      for (std::size_t j = 0; j < n; ++j) sol.factors.basis(j, l) = rb.basis[l][j];
  } else {
    // Damped full KKT with the complementarity block eliminated; general rows in augmented form
    // as in the interior-point iterations.
    Matrix kkt(dim + mg, dim + mg);
    for (std::size_t j = 0; j < n; ++j) kkt(j, j) = 2.0 * mu_;
    auto weight = [&](std::size_t k) {
      return std::min(sol.z_ineq[k] / std::max(sol.slack[k], 1e-300), 1e12);
    };
    for (std::size_t r = 0; r < mg; ++r) {
      for (std::size_t j = 0; j < n; ++j) kkt(dim + r, j) = kkt(j, dim + r) = g(r, j);
      kkt(dim + r, dim + r) = -1.0 / std::max(weight(r), 1e-300);
    }
    for (std::size_t k = 0; k < nl; ++k) kkt(lower_idx_[k], lower_idx_[k]) += weight(mg + k);
    for (std::size_t k = 0; k < upper_idx_.size(); ++k)
      kkt(upper_idx_[k], upper_idx_[k]) += weight(mg + nl + k);
    for (std::size_t r = 0; r < me; ++r)
      for (std::size_t j = 0; j < n; ++j) kkt(n + r, j) = kkt(j, n + r) = a(r, j);
    try {
      sol.factors.full.emplace(std::move(kkt), 1e-14);
    } catch (const Error&) {
      fail(ErrorCode::kSingularKkt, "QPTL KKT system is singular at a degenerate point");
    }
  }
  sol.kkt_residual = residual(q, sol);
  return sol;
}

Vector SmoothedQp::backward(const QpSolution& sol, std::span<const double> upstream) const {
  const std::size_t n = num_vars();
  require(upstream.size() == n, ErrorCode::kDimMismatch, "QPTL upstream size mismatch");
  if (sol.factors.full) {
    Vector rhs(sol.factors.full->size(), 0.0);
    std::copy(upstream.begin(), upstream.end(), rhs.begin());
    const Vector v = sol.factors.full->solve(rhs);
    Vector out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = -v[j];
    return out;
  }
  const Matrix& u = sol.factors.basis;
  Vector proj(upstream.begin(), upstream.end());
  for (std::size_t l = 0; l < u.cols(); ++l) {
    double p = 0.0;
    for (std::size_t j = 0; j < n; ++j) p += u(j, l) * upstream[j];
    for (std::size_t j = 0; j < n; ++j) proj[j] -= p * u(j, l);
  }
  for (double& v : proj) v *= -1.0 / (2.0 * mu_);
  return proj;
}

double SmoothedQp::residual(std::span<const double> q, const QpSolution& sol) const {
  const std::size_t n = num_vars();
  const std::size_t mg = relax_.g.rows(), nl = lower_idx_.size();
  Vector stat(n);
  for (std::size_t j = 0; j < n; ++j) stat[j] = 2.0 * mu_ * sol.x[j] + q[j];
  if (relax_.a_eq.rows() > 0) stat = stat + matvec_transposed(relax_.a_eq, sol.y_eq);
  if (mg > 0) stat = stat + matvec_transposed(relax_.g, std::span<const double>(sol.z_ineq).subspan(0, mg));
  for (std::size_t k = 0; k < nl; ++k) stat[lower_idx_[k]] -= sol.z_ineq[mg + k];
  for (std::size_t k = 0; k < upper_idx_.size(); ++k) stat[upper_idx_[k]] += sol.z_ineq[mg + nl + k];
  double res = norm_inf(stat);
  if (relax_.a_eq.rows() > 0) res = std::max(res, norm_inf(matvec(relax_.a_eq, sol.x) - relax_.b_eq));
  auto check = [&](double slack, double zk) {
    res = std::max({res, -slack, -zk, std::abs(slack * zk)});
  };
  const Vector gx = matvec(relax_.g, sol.x);
  for (std::size_t r = 0; r < mg; ++r) check(relax_.h[r] - gx[r], sol.z_ineq[r]);
  for (std::size_t k = 0; k < nl; ++k) check(sol.x[lower_idx_[k]] - relax_.lower[lower_idx_[k]], sol.z_ineq[mg + k]);
  for (std::size_t k = 0; k < upper_idx_.size(); ++k)
    check(relax_.upper[upper_idx_[k]] - sol.x[upper_idx_[k]], sol.z_ineq[mg + nl + k]);
  return res;
}

QptlLayer::QptlLayer(const Oracle& oracle, double mu, QpOptions opts)
    : qp_([&] {
        auto r = oracle.relaxation();
        if (!r) fail(ErrorCode::kUnsupported, "QPTL needs an LP relaxation; '" + oracle.name() + "' has none");
        return std::move(*r);
      }(), mu, opts),
      sign_(sense_sign(oracle.sense())) {}

QptlForward QptlLayer::forward(std::span<const double> c_hat) const {
  Vector c_min(c_hat.begin(), c_hat.end());
  for (double& v : c_min) v *= sign_;
  QptlForward out;
  out.qp = qp_.solve(qp_.relaxation().from_cost_space(c_min));
  out.v = qp_.relaxation().to_cost_space(out.qp.x);
  return out;
}

Vector QptlLayer::backward(const QptlForward& fwd, std::span<const double> upstream_v) const {
  const Vector gx = qp_.relaxation().from_cost_space(upstream_v);
  Vector grad = qp_.relaxation().to_cost_space(qp_.backward(fwd.qp, gx));
  for (double& v : grad) v *= sign_;
  return grad;
}

}  // namespace dflbench
