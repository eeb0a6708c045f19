#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dflbench/numerics.hpp"
#include "dflbench/problems.hpp"

namespace dflbench {

enum class Sense { kMinimize, kMaximize };

// +1 for minimization, -1 for maximization: c_min = sign * c.
inline double sense_sign(Sense s) { return s == Sense::kMinimize ? 1.0 : -1.0; }

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded };
std::string to_string(SolveStatus s);

struct Solution {
  Vector x;
  double objective = 0.0;
  SolveStatus status = SolveStatus::kOptimal;
  std::size_t nodes = 0;  // branch-and-bound nodes explored, 0 for direct solvers
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowType { kLe, kEq, kGe };

struct LinearProgram {
  Vector c;
  Matrix a;
  Vector b;
  std::vector<RowType> row_types;  // empty means all kLe
  Vector lower;                    // empty means all 0
  Vector upper;                    // empty means all +inf
  Sense sense = Sense::kMinimize;

  std::size_t num_vars() const noexcept { return c.size(); }
  std::size_t num_rows() const noexcept { return a.rows(); }
  RowType row_type(std::size_t i) const { return row_types.empty() ? RowType::kLe : row_types[i]; }
  double lo(std::size_t j) const { return lower.empty() ? 0.0 : lower[j]; }
  double hi(std::size_t j) const { return upper.empty() ? kInf : upper[j]; }
  void validate() const;
};

struct MilpModel {
  LinearProgram lp;
  std::vector<std::size_t> integer_vars;
};

// Largest primal violation of rows and bounds.
double primal_residual(const LinearProgram& lp, std::span<const double> x);

// Two-phase bounded primal simplex with Bland's rule.
Solution simplex_solve(const LinearProgram& lp);

struct BranchAndBoundOptions {
  std::size_t node_limit = 1'000'000;
  double integrality_tol = 1e-6;
};

// Depth-first LP-relaxation branch and bound; most fractional variable (lowest index on ties),
// floor branch first. kNodeBudgetExceeded past the node limit.
Solution branch_and_bound(const MilpModel& m, const BranchAndBoundOptions& opts = {});

// Plain-text dump for debugging.
std::string to_text(const LinearProgram& lp, std::span<const std::size_t> integer_vars = {});

// Direct combinatorial solvers. All return x as a 0/1 indicator vector.
Solution solve_grid_shortest_path(const GridSpec& spec, std::span<const double> c);
Solution solve_knapsack(const KnapsackSpec& spec, std::span<const double> c);
Solution solve_topk(const TopKSpec& spec, std::span<const double> c);

// Edge endpoints of the grid in index order: node id = row * k + col; for each node,
// its east edge (if any) precedes its north edge (if any).
struct GridEdge {
  int from;
  int to;
  bool east;
};
std::vector<GridEdge> grid_edges(const GridSpec& spec);

MilpModel build_scheduling_milp(const SchedulingSpec& spec, std::span<const double> prices);
// Maps a schedule x_{jit} to per-slot energy use, so that objective = prices . usage.
Matrix scheduling_cost_map(const SchedulingSpec& spec);
std::size_t scheduling_var(const SchedulingSpec& spec, int task, int machine, int slot);

MilpModel build_matching_milp(const MatchingSpec& spec, std::span<const double> c);

struct PortfolioOptions {
  int max_newton_steps = 200;
  double barrier_tol = 1e-9;
  double kkt_tol = 1e-7;
};

struct PortfolioSolution {
  Solution solution;
  double kkt_residual = 0.0;
  int newton_steps = 0;
};

// Log-barrier Newton method for max c.x s.t. x' Sigma x <= gamma, 1'x <= 1, x >= 0.
PortfolioSolution solve_portfolio_detailed(const PortfolioSpec& spec, std::span<const double> c,
                                           const PortfolioOptions& opts = {});
Solution solve_portfolio(const PortfolioSpec& spec, std::span<const double> c);

// Continuous relaxation of a problem in its own decision variables, plus the linear map from
// those variables to the cost space (objective = c . (cost_map * x)). An empty cost_map means
// the identity.
struct LpRelaxation {
  Matrix a_eq;
  Vector b_eq;
  Matrix g;  // g x <= h
  Vector h;
  Vector lower;
  Vector upper;
  Matrix cost_map;

  std::size_t num_vars() const noexcept { return lower.size(); }
  Vector to_cost_space(std::span<const double> x) const;
  Vector from_cost_space(std::span<const double> v) const;  // cost_map^T v
};

// Deterministic optimization oracle. Solutions are reported in cost space: the returned x
// satisfies objective = c . x.
class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual std::size_t cost_dim() const = 0;
  virtual Sense sense() const = 0;
  virtual Solution solve(std::span<const double> c) const = 0;
  virtual bool is_feasible(std::span<const double> x, double tol = 1e-8) const = 0;
  virtual std::optional<LpRelaxation> relaxation() const { return std::nullopt; }
  virtual std::string name() const = 0;

  // Minimization-canonical view: argmin_x c_min . x.
  Solution solve_min(std::span<const double> c_min) const;
};

std::unique_ptr<Oracle> make_shortest_path_oracle(const GridSpec& spec);
std::unique_ptr<Oracle> make_knapsack_oracle(const KnapsackSpec& spec);
std::unique_ptr<Oracle> make_topk_oracle(const TopKSpec& spec);
std::unique_ptr<Oracle> make_portfolio_oracle(const PortfolioSpec& spec);
std::unique_ptr<Oracle> make_scheduling_oracle(const SchedulingSpec& spec,
                                               const BranchAndBoundOptions& opts = {});
std::unique_ptr<Oracle> make_matching_oracle(const MatchingSpec& spec,
                                             const BranchAndBoundOptions& opts = {});

// Fills true_solution for every instance that has a cost vector.
void attach_solutions(Dataset& data, const Oracle& oracle);

}  // namespace dflbench
