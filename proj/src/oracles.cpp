#include <algorithm>
#include <cmath>
#include <string>

#include "dflbench/solvers.hpp"

namespace dflbench {

Vector LpRelaxation::to_cost_space(std::span<const double> x) const {
  if (cost_map.empty()) return Vector(x.begin(), x.end());
  return matvec(cost_map, x);
}

Vector LpRelaxation::from_cost_space(std::span<const double> v) const {
  if (cost_map.empty()) return Vector(v.begin(), v.end());
  return matvec_transposed(cost_map, v);
}

Solution Oracle::solve_min(std::span<const double> c_min) const {
  if (sense() == Sense::kMinimize) return solve(c_min);
  Vector c(c_min.begin(), c_min.end());
  for (double& v : c) v = -v;
  return solve(c);
}

namespace {

bool is_binary(std::span<const double> x, double tol) {
  return std::all_of(x.begin(), x.end(),
                     [tol](double v) { return std::abs(v) <= tol || std::abs(v - 1.0) <= tol; });
}

class ShortestPathOracle final : public Oracle {
 public:
  explicit ShortestPathOracle(GridSpec spec) : spec_(spec), edges_(grid_edges(spec)) {}

  std::size_t cost_dim() const override { return spec_.edge_count(); }
  Sense sense() const override { return Sense::kMinimize; }
  Solution solve(std::span<const double> c) const override { return solve_grid_shortest_path(spec_, c); }
  std::string name() const override { return "shortest_path"; }

  bool is_feasible(std::span<const double> x, double tol) const override {
    if (x.size() != cost_dim() || !is_binary(x, tol)) return false;
    const int nodes = spec_.grid_side * spec_.grid_side;
    Vector balance(nodes, 0.0);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      balance[edges_[e].from] += x[e];
      balance[edges_[e].to] -= x[e];
    }
    for (int v = 0; v < nodes; ++v) {
      const double want = v == 0 ? 1.0 : v == nodes - 1 ? -1.0 : 0.0;
      if (std::abs(balance[v] - want) > tol) return false;
    }
    return true;
  }

  std::optional<LpRelaxation> relaxation() const override {
    // Flow balance on every node but the sink (that row is implied by the others).
    const int nodes = spec_.grid_side * spec_.grid_side;
    LpRelaxation r;
    r.a_eq = Matrix(nodes - 1, edges_.size());
    r.b_eq.assign(nodes - 1, 0.0);
    r.b_eq[0] = 1.0;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      if (edges_[e].from < nodes - 1) r.a_eq(edges_[e].from, e) += 1.0;
      if (edges_[e].to < nodes - 1) r.a_eq(edges_[e].to, e) -= 1.0;
    }
    r.g = Matrix(0, edges_.size());
    r.lower.assign(edges_.size(), 0.0);
    r.upper.assign(edges_.size(), 1.0);
    return r;
  }

 private:
  GridSpec spec_;
  std::vector<GridEdge> edges_;
};

class KnapsackOracle final : public Oracle {
 public:
  explicit KnapsackOracle(KnapsackSpec spec) : spec_(std::move(spec)) {}

  std::size_t cost_dim() const override { return spec_.weights.size(); }
  Sense sense() const override { return Sense::kMaximize; }
  Solution solve(std::span<const double> c) const override { return solve_knapsack(spec_, c); }
  std::string name() const override { return "knapsack"; }

  bool is_feasible(std::span<const double> x, double tol) const override {
    if (x.size() != cost_dim() || !is_binary(x, tol)) return false;
    double used = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) used += spec_.weights[i] * x[i];
    return used <= spec_.capacity + tol;
  }

  std::optional<LpRelaxation> relaxation() const override {
    const std::size_t n = cost_dim();
    LpRelaxation r;
    r.a_eq = Matrix(0, n);
    r.g = Matrix(1, n);
    for (std::size_t i = 0; i < n; ++i) r.g(0, i) = spec_.weights[i];
    r.h = {static_cast<double>(spec_.capacity)};
    r.lower.assign(n, 0.0);
    r.upper.assign(n, 1.0);
    return r;
  }

 private:
  KnapsackSpec spec_;
};

class TopKOracle final : public Oracle {
 public:
  explicit TopKOracle(TopKSpec spec) : spec_(spec) {}

  std::size_t cost_dim() const override { return static_cast<std::size_t>(spec_.n); }
  Sense sense() const override { return Sense::kMaximize; }
  Solution solve(std::span<const double> c) const override { return solve_topk(spec_, c); }
  std::string name() const override { return "topk"; }

  bool is_feasible(std::span<const double> x, double tol) const override {
    if (x.size() != cost_dim() || !is_binary(x, tol)) return false;
    double s = 0.0;
    for (double v : x) s += v;
    return std::abs(s - spec_.k) <= tol;
  }

  std::optional<LpRelaxation> relaxation() const override {
    const std::size_t n = cost_dim();
    LpRelaxation r;
    r.a_eq = Matrix(1, n, 1.0);
    r.b_eq = {static_cast<double>(spec_.k)};
    r.g = Matrix(0, n);
    r.lower.assign(n, 0.0);
    r.upper.assign(n, 1.0);
    return r;
  }

 private:
  TopKSpec spec_;
};

class PortfolioOracle final : public Oracle {
 public:
  explicit PortfolioOracle(PortfolioSpec spec) : spec_(std::move(spec)) {}

  std::size_t cost_dim() const override { return spec_.assets(); }
  Sense sense() const override { return Sense::kMaximize; }
  Solution solve(std::span<const double> c) const override { return solve_portfolio(spec_, c); }
  std::string name() const override { return "portfolio"; }

  bool is_feasible(std::span<const double> x, double tol) const override {
    if (x.size() != cost_dim()) return false;
    double s = 0.0;
    for (double v : x) {
      if (v < -tol) return false;
      s += v;
    }
    if (s > 1.0 + tol) return false;
    if (spec_.degenerate) return true;
    return dot(x, matvec(spec_.sigma, x)) <= spec_.gamma + tol;
  }

 private:
  PortfolioSpec spec_;
};

class SchedulingOracle final : public Oracle {
 public:
  SchedulingOracle(SchedulingSpec spec, BranchAndBoundOptions opts)
      : spec_(std::move(spec)), opts_(opts), cost_map_(scheduling_cost_map(spec_)) {
    for (const auto& t : spec_.tasks) total_energy_ += t.power * t.duration;
  }

  std::size_t cost_dim() const override { return static_cast<std::size_t>(spec_.slots); }
  Sense sense() const override { return Sense::kMinimize; }
  std::string name() const override { return "scheduling"; }

  Solution solve(std::span<const double> c) const override {
    Solution s = branch_and_bound(build_scheduling_milp(spec_, c), opts_);
    if (s.status != SolveStatus::kOptimal) fail(ErrorCode::kInfeasible, "scheduling instance is infeasible");
    Solution out;
    out.x = matvec(cost_map_, s.x);
    out.objective = dot(c, out.x);
    out.nodes = s.nodes;
    return out;
  }

  // Necessary conditions on a per-slot energy profile: non-negative, and the total energy
  // of all tasks is consumed.
  bool is_feasible(std::span<const double> x, double tol) const override {
    if (x.size() != cost_dim()) return false;
    double total = 0.0;
    for (double v : x) {
      if (v < -tol) return false;
      total += v;
    }
    return std::abs(total - total_energy_) <= tol * (1.0 + total_energy_);
  }

  std::optional<LpRelaxation> relaxation() const override {
    const MilpModel m = build_scheduling_milp(spec_, Vector(spec_.slots, 0.0));
    LpRelaxation r;
    const std::size_t n = m.lp.num_vars();
    std::size_t n_eq = 0;
    for (std::size_t i = 0; i < m.lp.num_rows(); ++i) n_eq += m.lp.row_type(i) == RowType::kEq;
    r.a_eq = Matrix(n_eq, n);
    r.g = Matrix(m.lp.num_rows() - n_eq, n);
    std::size_t ie = 0, ig = 0;
    for (std::size_t i = 0; i < m.lp.num_rows(); ++i) {
      const auto row = m.lp.a.row(i);
      if (m.lp.row_type(i) == RowType::kEq) {
        std::copy(row.begin(), row.end(), r.a_eq.row(ie++).begin());
        r.b_eq.push_back(m.lp.b[i]);
      } else {
        std::copy(row.begin(), row.end(), r.g.row(ig++).begin());
        r.h.push_back(m.lp.b[i]);
      }
    }
    r.lower = m.lp.lower;
    r.upper = m.lp.upper;
    r.cost_map = cost_map_;
    return r;
  }

 private:
  SchedulingSpec spec_;
  BranchAndBoundOptions opts_;
  Matrix cost_map_;
  double total_energy_ = 0.0;
};

class MatchingOracle final : public Oracle {
 public:
  MatchingOracle(MatchingSpec spec, BranchAndBoundOptions opts) : spec_(std::move(spec)), opts_(opts) {}

  std::size_t cost_dim() const override {
    return static_cast<std::size_t>(spec_.nodes_per_side) * spec_.nodes_per_side;
  }
  Sense sense() const override { return Sense::kMaximize; }
  std::string name() const override { return "matching"; }

  Solution solve(std::span<const double> c) const override {
    Solution s = branch_and_bound(build_matching_milp(spec_, c), opts_);
    if (s.status != SolveStatus::kOptimal) fail(ErrorCode::kInfeasible, "matching model is infeasible");
    return s;
  }

  bool is_feasible(std::span<const double> x, double tol) const override {
    if (x.size() != cost_dim() || !is_binary(x, tol)) return false;
    const MilpModel m = build_matching_milp(spec_, Vector(cost_dim(), 0.0));
    return primal_residual(m.lp, x) <= tol;
  }

  std::optional<LpRelaxation> relaxation() const override {
    const MilpModel m = build_matching_milp(spec_, Vector(cost_dim(), 0.0));
    const std::size_t n = m.lp.num_vars();
    LpRelaxation r;
    r.a_eq = Matrix(0, n);
    r.g = Matrix(m.lp.num_rows(), n);
    r.h.resize(m.lp.num_rows());
    for (std::size_t i = 0; i < m.lp.num_rows(); ++i) {
      const double s = m.lp.row_type(i) == RowType::kGe ? -1.0 : 1.0;
      for (std::size_t j = 0; j < n; ++j) r.g(i, j) = s * m.lp.a(i, j);
      r.h[i] = s * m.lp.b[i];
    }
    r.lower = m.lp.lower;
    r.upper = m.lp.upper;
    return r;
  }

 private:
  MatchingSpec spec_;
  BranchAndBoundOptions opts_;
};

}  // namespace

std::unique_ptr<Oracle> make_shortest_path_oracle(const GridSpec& spec) {
  return std::make_unique<ShortestPathOracle>(spec);
}
std::unique_ptr<Oracle> make_knapsack_oracle(const KnapsackSpec& spec) {
  return std::make_unique<KnapsackOracle>(spec);
}
std::unique_ptr<Oracle> make_topk_oracle(const TopKSpec& spec) { return std::make_unique<TopKOracle>(spec); }
std::unique_ptr<Oracle> make_portfolio_oracle(const PortfolioSpec& spec) {
  return std::make_unique<PortfolioOracle>(spec);
}
std::unique_ptr<Oracle> make_scheduling_oracle(const SchedulingSpec& spec, const BranchAndBoundOptions& opts) {
  return std::make_unique<SchedulingOracle>(spec, opts);
}
std::unique_ptr<Oracle> make_matching_oracle(const MatchingSpec& spec, const BranchAndBoundOptions& opts) {
  return std::make_unique<MatchingOracle>(spec, opts);
}

void attach_solutions(Dataset& data, const Oracle& oracle) {
  for (auto& inst : data.instances) {
    if (inst.true_cost.empty()) continue;
    inst.true_solution = oracle.solve(inst.true_cost).x;
  }
}

}  // namespace dflbench
