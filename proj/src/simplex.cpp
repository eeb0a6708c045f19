#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "dflbench/solvers.hpp"

namespace dflbench {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "Optimal";
    case SolveStatus::kInfeasible: return "Infeasible";
    case SolveStatus::kUnbounded: return "Unbounded";
  }
  return "Unknown";
}

void LinearProgram::validate() const {
  const std::size_t n = c.size();
  require(a.rows() == 0 || a.cols() == n, ErrorCode::kDimMismatch, "LP: A has wrong column count");
  require(b.size() == a.rows(), ErrorCode::kDimMismatch, "LP: b size differs from A rows");
  require(row_types.empty() || row_types.size() == a.rows(), ErrorCode::kDimMismatch,
          "LP: row_types size differs from A rows");
  require(lower.empty() || lower.size() == n, ErrorCode::kDimMismatch, "LP: lower bound size");
  require(upper.empty() || upper.size() == n, ErrorCode::kDimMismatch, "LP: upper bound size");
}

double primal_residual(const LinearProgram& lp, std::span<const double> x) {
  double worst = 0.0;
  for (std::size_t j = 0; j < lp.num_vars(); ++j) {
    worst = std::max(worst, lp.lo(j) - x[j]);
    worst = std::max(worst, x[j] - lp.hi(j));
  }
  for (std::size_t i = 0; i < lp.num_rows(); ++i) {
    const double ax = dot(lp.a.row(i), x);
    switch (lp.row_type(i)) {
      case RowType::kLe: worst = std::max(worst, ax - lp.b[i]); break;
      case RowType::kGe: worst = std::max(worst, lp.b[i] - ax); break;
      case RowType::kEq: worst = std::max(worst, std::abs(ax - lp.b[i])); break;
    }
  }
  return worst;
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;

// How a column of the standard-form problem maps back to an original variable.
struct ColumnOrigin {
  enum class Kind { kShifted, kFlipped, kSplitPos, kSplitNeg, kSlack, kArtificial } kind;
  std::size_t var = 0;
};

// Bounded-variable tableau: every column y_j lives in [0, upper_j]; nonbasic columns sit at
// one of their bounds.
class BoundedSimplex {
 public:
  BoundedSimplex(Matrix tableau, Vector rhs, Vector upper, std::size_t first_artificial)
      : t_(std::move(tableau)), a_orig_(t_), rhs_(std::move(rhs)), upper_(std::move(upper)),
        first_art_(first_artificial) {
    const std::size_t m = t_.rows();
    const std::size_t ncols = t_.cols();
    basis_.resize(m);
    at_upper_.assign(ncols, false);
    is_basic_.assign(ncols, false);
    xb_ = rhs_;
    for (std::size_t i = 0; i < m; ++i) {
      basis_[i] = first_art_ + i;
      is_basic_[first_art_ + i] = true;
    }
  }

  enum class Outcome { kOptimal, kUnbounded };

  Outcome optimize(const Vector& cost, bool allow_artificial) {
    const std::size_t m = t_.rows();
    const std::size_t ncols = t_.cols();
    Vector d(cost);
    for (std::size_t i = 0; i < m; ++i) {
      const double cb = cost[basis_[i]];
      if (cb == 0.0) continue;
      const auto row = t_.row(i);
      for (std::size_t j = 0; j < ncols; ++j) d[j] -= cb * row[j];
    }
    const std::size_t limit = 50'000 + 200 * (m + ncols);
    for (std::size_t iter = 0; iter < limit; ++iter) {
      // Bland: lowest-index improving column.
      std::size_t enter = ncols;
      double dir = 0.0;
      for (std::size_t j = 0; j < ncols; ++j) {
        if (is_basic_[j]) continue;
        if (!allow_artificial && j >= first_art_) continue;
        if (upper_[j] == 0.0) continue;
        if (!at_upper_[j] && d[j] < -kCostTol) {
          enter = j;
          dir = 1.0;
          break;
        }
        if (at_upper_[j] && d[j] > kCostTol) {
          enter = j;
          dir = -1.0;
          break;
        }
      }
      if (enter == ncols) return Outcome::kOptimal;

      std::size_t leave_row = m;
      double best = kInf;
      for (std::size_t i = 0; i < m; ++i) {
        const double alpha = dir * t_(i, enter);
        double lim;
        if (alpha > kPivotTol) {
          lim = std::max(xb_[i], 0.0) / alpha;
        } else if (alpha < -kPivotTol && std::isfinite(upper_[basis_[i]])) {
          lim = std::max(upper_[basis_[i]] - xb_[i], 0.0) / -alpha;
        } else {
          continue;
        }
        if (leave_row == m || lim < best - 1e-12) {
          best = lim;
          leave_row = i;
        } else if (lim <= best + 1e-12 && basis_[i] < basis_[leave_row]) {
          best = std::min(best, lim);
          leave_row = i;
        }
      }
      const double span = upper_[enter];
      if (leave_row == m && !std::isfinite(span)) return Outcome::kUnbounded;

      const bool flip = leave_row == m || span <= best;
      const double step = flip ? span : best;
      for (std::size_t i = 0; i < m; ++i) xb_[i] -= step * dir * t_(i, enter);
      if (flip) {
        at_upper_[enter] = !at_upper_[enter];
        continue;
      }
      const double entering_value = (at_upper_[enter] ? span : 0.0) + dir * step;
      const std::size_t leaving = basis_[leave_row];
      const bool leaves_at_upper = dir * t_(leave_row, enter) < 0.0;
      pivot(leave_row, enter, d);
      is_basic_[leaving] = false;
      at_upper_[leaving] = leaves_at_upper;
      xb_[leave_row] = entering_value;
    }
    fail(ErrorCode::kMaxIterations, "simplex iteration limit reached");
  }

  // Degenerate pivots that move basic artificials out of the basis where possible. Rows
  // where no pivot exists are redundant; their artificials stay basic, pinned at zero.
  void expel_artificials() {
    const std::size_t m = t_.rows();
    Vector dummy(t_.cols(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (basis_[i] < first_art_) continue;
      std::size_t best_col = first_art_;
      double best_mag = kPivotTol;
      for (std::size_t j = 0; j < first_art_; ++j) {
        if (is_basic_[j]) continue;
        const double mag = std::abs(t_(i, j));
        if (mag > best_mag) {
          best_mag = mag;
          best_col = j;
        }
      }
      if (best_col == first_art_) continue;
      const std::size_t leaving = basis_[i];
      const double value = at_upper_[best_col] ? upper_[best_col] : 0.0;
      // The artificial sits at (numerically) zero, so the pivot moves no other value.
      pivot(i, best_col, dummy);
      is_basic_[leaving] = false;
      at_upper_[leaving] = false;
      xb_[i] = value;
    }
    for (std::size_t j = first_art_; j < t_.cols(); ++j) upper_[j] = 0.0;
  }

  // Recomputes basic values from the original columns for accuracy.
  void refine() {
    const std::size_t m = t_.rows();
    if (m == 0) return;
    Matrix basis_mat(m, m);
    Vector r = rhs_;
    for (std::size_t j = 0; j < t_.cols(); ++j) {
      if (is_basic_[j] || !at_upper_[j]) continue;
      for (std::size_t i = 0; i < m; ++i) r[i] -= a_orig_(i, j) * upper_[j];
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < m; ++k) basis_mat(i, k) = a_orig_(i, basis_[k]);
    try {
      xb_ = LuFactorization(std::move(basis_mat), 1e-13).solve(r);
    } catch (const Error&) {
      // keep tableau values
    }
  }

  double phase_one_infeasibility() const {
    double s = 0.0;
    for (std::size_t i = 0; i < basis_.size(); ++i)
      if (basis_[i] >= first_art_) s += std::abs(xb_[i]);
    return s;
  }

  Vector column_values() const {
    Vector y(t_.cols(), 0.0);
    for (std::size_t j = 0; j < t_.cols(); ++j)
      if (!is_basic_[j] && at_upper_[j]) y[j] = upper_[j];
    for (std::size_t i = 0; i < basis_.size(); ++i) y[basis_[i]] = xb_[i];
    return y;
  }

 private:
  void pivot(std::size_t r, std::size_t col, Vector& d) {
    const std::size_t m = t_.rows();
    const std::size_t ncols = t_.cols();
    const double p = t_(r, col);
    auto prow = t_.row(r);
    for (double& v : prow) v /= p;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == r) continue;
      const double f = t_(i, col);
      if (f == 0.0) continue;
      auto row = t_.row(i);
      for (std::size_t j = 0; j < ncols; ++j) row[j] -= f * prow[j];
    }
    const double fd = d[col];
    if (fd != 0.0)
      for (std::size_t j = 0; j < ncols; ++j) d[j] -= fd * prow[j];
    basis_[r] = col;
    is_basic_[col] = true;
    at_upper_[col] = false;
  }

  Matrix t_;
  Matrix a_orig_;
  Vector rhs_;
  Vector upper_;
  std::size_t first_art_;
  std::vector<std::size_t> basis_;
  std::vector<bool> at_upper_;
  std::vector<bool> is_basic_;
  Vector xb_;
};

}  // namespace

Solution simplex_solve(const LinearProgram& lp) {
  lp.validate();
  const std::size_t n = lp.num_vars();
  const std::size_t m = lp.num_rows();
  const double sign = sense_sign(lp.sense);

  Solution infeasible{Vector(n, 0.0), 0.0, SolveStatus::kInfeasible, 0};
  for (std::size_t j = 0; j < n; ++j)
    if (lp.lo(j) > lp.hi(j)) return infeasible;

  std::vector<ColumnOrigin> origin;
  std::vector<std::size_t> first_col(n);
  Vector shift(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    first_col[j] = origin.size();
    const double lo = lp.lo(j);
    const double hi = lp.hi(j);
    if (std::isfinite(lo)) {
      shift[j] = lo;
      origin.push_back({ColumnOrigin::Kind::kShifted, j});
    } else if (std::isfinite(hi)) {
      shift[j] = hi;
      origin.push_back({ColumnOrigin::Kind::kFlipped, j});
    } else {
      origin.push_back({ColumnOrigin::Kind::kSplitPos, j});
      origin.push_back({ColumnOrigin::Kind::kSplitNeg, j});
    }
  }
  const std::size_t n_struct = origin.size();
  for (std::size_t i = 0; i < m; ++i)
    if (lp.row_type(i) != RowType::kEq) origin.push_back({ColumnOrigin::Kind::kSlack, i});
  const std::size_t first_art = origin.size();
  const std::size_t ncols = first_art + m;

  Matrix tab(m, ncols);
  Vector rhs(m);
  Vector upper(ncols, kInf);
  Vector cost(ncols, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t col = first_col[j];
    const auto kind = origin[col].kind;
    const double coef_sign = kind == ColumnOrigin::Kind::kFlipped ? -1.0 : 1.0;
    if (kind == ColumnOrigin::Kind::kShifted) upper[col] = lp.hi(j) - lp.lo(j);
    cost[col] = sign * lp.c[j] * coef_sign;
    if (kind == ColumnOrigin::Kind::kSplitPos) cost[col + 1] = -sign * lp.c[j];
    for (std::size_t i = 0; i < m; ++i) {
      tab(i, col) = coef_sign * lp.a(i, j);
      if (kind == ColumnOrigin::Kind::kSplitPos) tab(i, col + 1) = -lp.a(i, j);
    }
  }
  {
    std::size_t slack = n_struct;
    for (std::size_t i = 0; i < m; ++i) {
      const RowType rt = lp.row_type(i);
      if (rt == RowType::kEq) continue;
      tab(i, slack++) = rt == RowType::kLe ? 1.0 : -1.0;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    double r = lp.b[i];
    for (std::size_t j = 0; j < n; ++j) r -= lp.a(i, j) * shift[j];
    if (r < 0.0) {
      r = -r;
      for (std::size_t j = 0; j < first_art; ++j) tab(i, j) = -tab(i, j);
    }
    rhs[i] = r;
    tab(i, first_art + i) = 1.0;
  }

  BoundedSimplex simplex(std::move(tab), rhs, std::move(upper), first_art);
  Vector phase1(ncols, 0.0);
  for (std::size_t j = first_art; j < ncols; ++j) phase1[j] = 1.0;
  simplex.optimize(phase1, true);
  if (simplex.phase_one_infeasibility() > 1e-7 * (1.0 + norm_inf(rhs))) return infeasible;
  simplex.expel_artificials();

  Solution out;
  if (simplex.optimize(cost, false) == BoundedSimplex::Outcome::kUnbounded) {
    out.status = SolveStatus::kUnbounded;
    out.x.assign(n, 0.0);
    out.objective = sign * -kInf;
    return out;
  }
  simplex.refine();
  const Vector y = simplex.column_values();
  out.x.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t col = first_col[j];
    switch (origin[col].kind) {
      case ColumnOrigin::Kind::kShifted: out.x[j] = shift[j] + y[col]; break;
      case ColumnOrigin::Kind::kFlipped: out.x[j] = shift[j] - y[col]; break;
      case ColumnOrigin::Kind::kSplitPos: out.x[j] = y[col] - y[col + 1]; break;
      default: break;
    }
  }
  out.objective = dot(lp.c, out.x);
  out.status = SolveStatus::kOptimal;
  return out;
}

Solution branch_and_bound(const MilpModel& model, const BranchAndBoundOptions& opts) {
  model.lp.validate();
  const std::size_t n = model.lp.num_vars();
  for (std::size_t j : model.integer_vars) {
    require(j < n, ErrorCode::kInvalidParam, "integer variable index out of range");
    require(std::isfinite(model.lp.lo(j)) && std::isfinite(model.lp.hi(j)), ErrorCode::kInvalidParam,
            "integer variables must be bounded");
  }
  const double sign = sense_sign(model.lp.sense);

  struct Node {
    Vector lower;
    Vector upper;
  };
  Vector root_lo(n), root_hi(n);
  for (std::size_t j = 0; j < n; ++j) {
    root_lo[j] = model.lp.lo(j);
    root_hi[j] = model.lp.hi(j);
  }
  for (std::size_t j : model.integer_vars) {
    root_lo[j] = std::ceil(root_lo[j] - opts.integrality_tol);
    root_hi[j] = std::floor(root_hi[j] + opts.integrality_tol);
  }
  std::vector<Node> stack;
  stack.push_back({std::move(root_lo), std::move(root_hi)});

  LinearProgram lp = model.lp;
  double best = kInf;
  Solution incumbent{Vector(n, 0.0), 0.0, SolveStatus::kInfeasible, 0};
  std::size_t nodes = 0;
  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    if (++nodes > opts.node_limit)
      fail(ErrorCode::kNodeBudgetExceeded, "branch and bound exceeded " + std::to_string(opts.node_limit) + " nodes");
    lp.lower = node.lower;
    lp.upper = node.upper;
    const Solution relax = simplex_solve(lp);
    if (relax.status == SolveStatus::kInfeasible) continue;
    if (relax.status == SolveStatus::kUnbounded) {
      Solution out{Vector(n, 0.0), sign * -kInf, SolveStatus::kUnbounded, nodes};
      return out;
    }
    const double value = sign * relax.objective;
    if (value >= best - 1e-9) continue;

    std::size_t branch = n;
    double best_score = kInf;
    for (std::size_t j : model.integer_vars) {
      const double frac = relax.x[j] - std::floor(relax.x[j]);
      if (std::min(frac, 1.0 - frac) <= opts.integrality_tol) continue;
      const double score = std::abs(frac - 0.5);
      if (score < best_score || (score == best_score && j < branch)) {
        best_score = score;
        branch = j;
      }
    }
    if (branch == n) {
      Vector x = relax.x;
      for (std::size_t j : model.integer_vars) x[j] = std::round(x[j]);
      const double obj = dot(model.lp.c, x);
      if (sign * obj < best - 1e-9) {
        best = sign * obj;
        incumbent.x = std::move(x);
        incumbent.objective = obj;
        incumbent.status = SolveStatus::kOptimal;
      }
      continue;
    }
    Node up = node;
    up.lower[branch] = std::ceil(relax.x[branch]);
    node.upper[branch] = std::floor(relax.x[branch]);
    stack.push_back(std::move(up));
    stack.push_back(std::move(node));
  }
  incumbent.nodes = nodes;
  return incumbent;
}

std::string to_text(const LinearProgram& lp, std::span<const std::size_t> integer_vars) {
  std::ostringstream os;
  os.precision(17);
  os << (lp.sense == Sense::kMinimize ? "minimize" : "maximize");
  for (double v : lp.c) os << ' ' << v;
  os << '\n';
  for (std::size_t i = 0; i < lp.num_rows(); ++i) {
    os << "row";
    for (double v : lp.a.row(i)) os << ' ' << v;
    const RowType rt = lp.row_type(i);
    os << (rt == RowType::kLe ? " <= " : rt == RowType::kGe ? " >= " : " = ") << lp.b[i] << '\n';
  }
  for (std::size_t j = 0; j < lp.num_vars(); ++j) os << "bound " << j << ' ' << lp.lo(j) << ' ' << lp.hi(j) << '\n';
  if (!integer_vars.empty()) {
    os << "integer";
    for (std::size_t j : integer_vars) os << ' ' << j;
    os << '\n';
  }
  return os.str();
}

}  // namespace dflbench
