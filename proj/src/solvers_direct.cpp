#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dflbench/solvers.hpp"

namespace dflbench {

std::vector<GridEdge> grid_edges(const GridSpec& spec) {
  const int k = spec.grid_side;
  require(k >= 2, ErrorCode::kInvalidParam, "grid_side must be >= 2");
  std::vector<GridEdge> edges;
  edges.reserve(spec.edge_count());
  for (int v = 0; v < k * k; ++v) {
    const int row = v / k;
    const int col = v % k;
    if (col < k - 1) edges.push_back({v, v + 1, true});
    if (row < k - 1) edges.push_back({v, v + k, false});
  }
  return edges;
}

Solution solve_grid_shortest_path(const GridSpec& spec, std::span<const double> c) {
  const int k = spec.grid_side;
  require(k >= 2, ErrorCode::kInvalidParam, "grid_side must be >= 2");
  require(c.size() == spec.edge_count(), ErrorCode::kDimMismatch,
          "shortest path: expected " + std::to_string(spec.edge_count()) + " edge costs");
  const int nodes = k * k;
  // Edge ids follow grid_edges(): east then north per node.
  std::vector<int> east_edge(nodes, -1), north_edge(nodes, -1);
  int e = 0;
  for (int v = 0; v < nodes; ++v) {
    if (v % k < k - 1) east_edge[v] = e++;
    if (v / k < k - 1) north_edge[v] = e++;
  }
  Vector to_go(nodes, 0.0);
  std::vector<bool> go_east(nodes, false);
  for (int v = nodes - 2; v >= 0; --v) {
    double best = kInf;
    if (east_edge[v] >= 0) {
      best = c[east_edge[v]] + to_go[v + 1];
      go_east[v] = true;
    }
    if (north_edge[v] >= 0) {
      const double north = c[north_edge[v]] + to_go[v + k];
      if (north < best) {
        best = north;
        go_east[v] = false;
      }
    }
    to_go[v] = best;
  }
  Solution out;
  out.x.assign(c.size(), 0.0);
  for (int v = 0; v != nodes - 1;) {
    if (go_east[v]) {
      out.x[east_edge[v]] = 1.0;
      v += 1;
    } else {
      out.x[north_edge[v]] = 1.0;
      v += k;
    }
  }
  out.objective = dot(c, out.x);
  return out;
}

Solution solve_knapsack(const KnapsackSpec& spec, std::span<const double> c) {
  const std::size_t n = spec.weights.size();
  require(c.size() == n, ErrorCode::kDimMismatch, "knapsack: value/weight size mismatch");
  require(spec.capacity >= 0, ErrorCode::kInvalidParam, "knapsack: negative capacity");
  for (int w : spec.weights) require(w > 0, ErrorCode::kInvalidParam, "knapsack: weights must be positive");
  const auto cap = static_cast<std::size_t>(spec.capacity);
  // best[i][w]: optimal value of items i..n-1 within capacity w.
  Matrix best(n + 1, cap + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    const auto wi = static_cast<std::size_t>(spec.weights[i]);
    for (std::size_t w = 0; w <= cap; ++w) {
      double v = best(i + 1, w);
      if (c[i] > 0.0 && wi <= w) v = std::max(v, c[i] + best(i + 1, w - wi));
      best(i, w) = v;
    }
  }
  Solution out;
  out.x.assign(n, 0.0);
  std::size_t w = cap;
  for (std::size_t i = 0; i < n; ++i) {
    const auto wi = static_cast<std::size_t>(spec.weights[i]);
    if (c[i] > 0.0 && wi <= w && c[i] + best(i + 1, w - wi) >= best(i + 1, w)) {
      out.x[i] = 1.0;
      w -= wi;
    }
  }
  out.objective = dot(c, out.x);
  return out;
}

Solution solve_topk(const TopKSpec& spec, std::span<const double> c) {
  require(c.size() == static_cast<std::size_t>(spec.n), ErrorCode::kDimMismatch, "topk: cost size != n");
  require(spec.k >= 1 && spec.k <= spec.n, ErrorCode::kInvalidParam, "topk: k out of range");
  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c[a] > c[b]; });
  Solution out;
  out.x.assign(c.size(), 0.0);
  for (int i = 0; i < spec.k; ++i) out.x[order[i]] = 1.0;
  out.objective = dot(c, out.x);
  return out;
}

std::size_t scheduling_var(const SchedulingSpec& spec, int task, int machine, int slot) {
  return (static_cast<std::size_t>(task) * spec.machines + machine) * spec.slots + slot;
}

Matrix scheduling_cost_map(const SchedulingSpec& spec) {
  const std::size_t nvars = spec.tasks.size() * spec.machines * spec.slots;
  Matrix map(spec.slots, nvars);
  for (std::size_t j = 0; j < spec.tasks.size(); ++j) {
    const auto& task = spec.tasks[j];
    for (int i = 0; i < spec.machines; ++i)
      for (int t = 0; t + task.duration <= spec.slots; ++t)
        for (int s = t; s < t + task.duration; ++s)
          map(s, scheduling_var(spec, static_cast<int>(j), i, t)) = task.power;
  }
  return map;
}

MilpModel build_scheduling_milp(const SchedulingSpec& spec, std::span<const double> prices) {
  require(prices.size() == static_cast<std::size_t>(spec.slots), ErrorCode::kDimMismatch,
          "scheduling: expected one price per slot");
  require(spec.capacity.rows() == static_cast<std::size_t>(spec.machines), ErrorCode::kDimMismatch,
          "scheduling: capacity rows != machines");
  const int n_tasks = static_cast<int>(spec.tasks.size());
  const int n_res = static_cast<int>(spec.resources());
  const std::size_t nvars = static_cast<std::size_t>(n_tasks) * spec.machines * spec.slots;
  MilpModel m;
  LinearProgram& lp = m.lp;
  lp.sense = Sense::kMinimize;
  lp.c.assign(nvars, 0.0);
  lp.lower.assign(nvars, 0.0);
  lp.upper.assign(nvars, 0.0);
  for (int j = 0; j < n_tasks; ++j) {
    const auto& task = spec.tasks[j];
    for (int i = 0; i < spec.machines; ++i)
      for (int t = 0; t < spec.slots; ++t) {
        const std::size_t v = scheduling_var(spec, j, i, t);
        // window: start >= earliest, start + duration <= latest end
        const bool allowed = t >= task.earliest_start && t + task.duration <= task.latest_end &&
                             t + task.duration <= spec.slots;
        lp.upper[v] = allowed ? 1.0 : 0.0;
        double energy = 0.0;
        for (int s = t; s < std::min(t + task.duration, spec.slots); ++s) energy += task.power * prices[s];
        lp.c[v] = energy;
      }
  }
  const std::size_t n_rows =
      static_cast<std::size_t>(n_tasks) + static_cast<std::size_t>(spec.machines) * n_res * spec.slots;
  lp.a = Matrix(n_rows, nvars);
  lp.b.assign(n_rows, 0.0);
  lp.row_types.assign(n_rows, RowType::kLe);
  std::size_t r = 0;
  for (int j = 0; j < n_tasks; ++j, ++r) {
    for (int i = 0; i < spec.machines; ++i)
      for (int t = 0; t < spec.slots; ++t) lp.a(r, scheduling_var(spec, j, i, t)) = 1.0;
    lp.b[r] = 1.0;
    lp.row_types[r] = RowType::kEq;
  }
  for (int i = 0; i < spec.machines; ++i)
    for (int w = 0; w < n_res; ++w)
      for (int t = 0; t < spec.slots; ++t, ++r) {
        for (int j = 0; j < n_tasks; ++j) {
          const auto& task = spec.tasks[j];
          const double use = task.usage.at(w);
          if (use == 0.0) continue;
          for (int s = std::max(0, t - task.duration + 1); s <= t; ++s) lp.a(r, scheduling_var(spec, j, i, s)) = use;
        }
        lp.b[r] = spec.capacity(i, w);
      }
  m.integer_vars.resize(nvars);
  std::iota(m.integer_vars.begin(), m.integer_vars.end(), std::size_t{0});
  return m;
}

MilpModel build_matching_milp(const MatchingSpec& spec, std::span<const double> c) {
  const int n = spec.nodes_per_side;
  const std::size_t nvars = static_cast<std::size_t>(n) * n;
  require(c.size() == nvars, ErrorCode::kDimMismatch, "matching: expected n*n edge values");
  require(spec.same_field.size() == nvars, ErrorCode::kDimMismatch, "matching: same_field size");
  MilpModel m;
  LinearProgram& lp = m.lp;
  lp.sense = Sense::kMaximize;
  lp.c.assign(c.begin(), c.end());
  lp.lower.assign(nvars, 0.0);
  lp.upper.assign(nvars, 1.0);
  const std::size_t n_rows = 2 * static_cast<std::size_t>(n) + 2;
  lp.a = Matrix(n_rows, nvars);
  lp.b.assign(n_rows, 1.0);
  lp.row_types.assign(n_rows, RowType::kLe);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      lp.a(i, i * n + j) = 1.0;
      lp.a(n + j, i * n + j) = 1.0;
    }
  // sum phi x >= rho1 sum x  and  sum (1 - phi) x >= rho2 sum x
  const std::size_t r1 = 2 * static_cast<std::size_t>(n);
  for (std::size_t e = 0; e < nvars; ++e) {
    const double phi = spec.same_field[e] ? 1.0 : 0.0;
    lp.a(r1, e) = phi - spec.rho1;
    lp.a(r1 + 1, e) = (1.0 - phi) - spec.rho2;
  }
  lp.b[r1] = lp.b[r1 + 1] = 0.0;
  lp.row_types[r1] = lp.row_types[r1 + 1] = RowType::kGe;
  m.integer_vars.resize(nvars);
  std::iota(m.integer_vars.begin(), m.integer_vars.end(), std::size_t{0});
  return m;
}

}  // namespace dflbench
