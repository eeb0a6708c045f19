#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "doctest.h"
#include "dflbench/solvers.hpp"

using namespace dflbench;

namespace {

// All monotone paths as edge-indicator vectors.
std::vector<Vector> enumerate_paths(const GridSpec& g) {
  const auto edges = grid_edges(g);
  const int k = g.grid_side;
  std::vector<Vector> out;
  Vector x(edges.size(), 0.0);
  std::function<void(int)> rec = [&](int node) {
    if (node == k * k - 1) {
      out.push_back(x);
      return;
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (edges[e].from != node) continue;
      x[e] = 1.0;
      rec(edges[e].to);
      x[e] = 0.0;
    }
  };
  rec(0);
  return out;
}

double exhaustive_knapsack(const KnapsackSpec& s, const Vector& c) {
  const std::size_t n = s.weights.size();
  double best = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    int w = 0;
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1u) {
        w += s.weights[i];
        v += c[i];
      }
    }
    if (w <= s.capacity) best = std::max(best, v);
  }
  return best;
}

// Best matching value by enumerating every partial matching and filtering by diversity.
double exhaustive_matching(const MatchingSpec& s, const Vector& c) {
  const int n = s.nodes_per_side;
  std::vector<int> assign(n, -1);
  std::vector<bool> used(n, false);
  double best = -kInf;
  std::function<void(int)> rec = [&](int i) {
    if (i == n) {
      double v = 0.0, total = 0.0, same = 0.0;
      for (int a = 0; a < n; ++a) {
        if (assign[a] < 0) continue;
        const std::size_t e = static_cast<std::size_t>(a) * n + assign[a];
        v += c[e];
        total += 1.0;
        same += s.same_field[e];
      }
      if (same >= s.rho1 * total - 1e-9 && (total - same) >= s.rho2 * total - 1e-9) best = std::max(best, v);
      return;
    }
    assign[i] = -1;
    rec(i + 1);
    for (int j = 0; j < n; ++j) {
      if (used[j]) continue;
      used[j] = true;
      assign[i] = j;
      rec(i + 1);
      used[j] = false;
      assign[i] = -1;
    }
  };
  rec(0);
  return best;
}

MilpModel knapsack_milp(const KnapsackSpec& s, const Vector& c) {
  MilpModel m;
  const std::size_t n = s.weights.size();
  m.lp.c = c;
  m.lp.a = Matrix(1, n);
  for (std::size_t i = 0; i < n; ++i) m.lp.a(0, i) = s.weights[i];
  m.lp.b = {static_cast<double>(s.capacity)};
  m.lp.upper.assign(n, 1.0);
  m.lp.sense = Sense::kMaximize;
  m.integer_vars.resize(n);
  std::iota(m.integer_vars.begin(), m.integer_vars.end(), 0);
  return m;
}

KnapsackSpec random_knapsack(std::size_t n, RngStream& rng) {
  KnapsackSpec s;
  int total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    s.weights.push_back(1 + static_cast<int>(rng.uniform_index(10)));
    total += s.weights.back();
  }
  s.capacity = 1 + static_cast<int>(rng.uniform_index(total));
  return s;
}

MatchingSpec random_matching_spec(int n, double rho, RngStream& rng) {
  MatchingSpec s;
  s.nodes_per_side = n;
  s.rho1 = s.rho2 = rho;
  s.same_field.resize(n * n);
  for (auto& f : s.same_field) f = rng.bernoulli(0.5) ? 1 : 0;
  return s;
}

// Projection onto {x >= 0, 1'x <= 1}.
Vector project_capped_simplex(Vector y) {
  Vector x = y;
  for (double& v : x) v = std::max(v, 0.0);
  if (std::accumulate(x.begin(), x.end(), 0.0) <= 1.0) return x;
  Vector u = y;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cum += u[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0) theta = t;
  }
  for (std::size_t i = 0; i < y.size(); ++i) x[i] = std::max(y[i] - theta, 0.0);
  return x;
}

// Euclidean projection onto {x' S x <= gamma}: x = (I + lambda S)^-1 y, lambda by bisection.
Vector project_ellipsoid(const Matrix& s, double gamma, const Vector& y) {
  if (dot(y, matvec(s, y)) <= gamma) return y;
  auto at = [&](double lambda) {
    Matrix m = s;
    for (double& v : m.values()) v *= lambda;
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += 1.0;
    return solve_linear_system(m, y);
  };
  double lo = 0.0, hi = 1.0;
  while (true) {
    const Vector x = at(hi);
    if (dot(x, matvec(s, x)) <= gamma) break;
    hi *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Vector x = at(mid);
    (dot(x, matvec(s, x)) > gamma ? lo : hi) = mid;
  }
  return at(hi);
}

// Dykstra's alternating projection onto the intersection of both sets.
Vector project_portfolio(const PortfolioSpec& spec, const Vector& y) {
  Vector x = y, p(y.size(), 0.0), q(y.size(), 0.0);
  for (int it = 0; it < 2000; ++it) {
    const Vector a = project_capped_simplex(x + p);
    p = (x + p) - a;
    const Vector b = project_ellipsoid(spec.sigma, spec.gamma, a + q);
    q = (a + q) - b;
    if (norm_inf(b - x) < 1e-14) {
      x = b;
      break;
    }
    x = b;
  }
  return x;
}

double projected_gradient_portfolio(const PortfolioSpec& spec, const Vector& c) {
  Vector x(c.size(), 0.0);
  const double step = 0.05 / std::max(1e-12, norm_inf(c));
  for (int it = 0; it < 4000; ++it) {
    const Vector next = project_portfolio(spec, x + step * c);
    if (norm_inf(next - x) < 1e-13) break;
    x = next;
  }
  return dot(c, x);
}

}  // namespace

TEST_CASE("grid shortest path: small cases and exhaustive check") {
  const GridSpec g2{2};
  const auto s = solve_grid_shortest_path(g2, Vector(4, 1.0));
  CHECK(s.objective == doctest::Approx(2.0));
  // East first from the origin: edge 0 is (0 -> 1, east), then north from node 1.
  const auto edges = grid_edges(g2);
  CHECK(edges[0].east);
  CHECK(s.x[0] == 1.0);
  const auto z = solve_grid_shortest_path(g2, Vector(4, 0.0));
  CHECK(z.objective == 0.0);
  CHECK(z.x == s.x);

  RngStream rng(1, 0);
  const GridSpec g3{3};
  const auto paths = enumerate_paths(g3);
  CHECK(paths.size() == 6);
  for (int t = 0; t < 50; ++t) {
    const Vector c = sample_normal(rng, g3.edge_count());
    double best = kInf;
    for (const auto& p : paths) best = std::min(best, dot(c, p));
    CHECK(solve_grid_shortest_path(g3, c).objective == doctest::Approx(best).epsilon(1e-12));
  }
  CHECK(enumerate_paths(GridSpec{5}).size() == 70);
  CHECK(GridSpec{5}.edge_count() == 40);
}

TEST_CASE("knapsack: worked example, non-binding capacity, exhaustive") {
  const KnapsackSpec unit{{1, 1}, 1};
  CHECK(solve_knapsack(unit, Vector{2.5, 3.0}).x == Vector{0, 1});

  const KnapsackSpec loose{{2, 3, 4}, 9};
  CHECK(solve_knapsack(loose, Vector{1.0, -1.0, 0.5}).x == Vector{1, 0, 1});

  RngStream rng(2, 0);
  for (int t = 0; t < 30; ++t) {
    const KnapsackSpec s = random_knapsack(15, rng);
    Vector c(15);
    for (double& v : c) v = rng.uniform(-1.0, 10.0);
    const auto sol = solve_knapsack(s, c);
    CHECK(sol.objective == doctest::Approx(exhaustive_knapsack(s, c)).epsilon(1e-12));
    CHECK(make_knapsack_oracle(s)->is_feasible(sol.x));
  }
  CHECK_THROWS_AS(knapsack_spec_from_weights(Vector{1.5, 2.0}, 3.0), Error);
}

TEST_CASE("top-k: examples and brute force") {
  CHECK(solve_topk({3, 1}, Vector{0.1, 0.9, 0.5}).x == Vector{0, 1, 0});
  CHECK(solve_topk({3, 3}, Vector{0.1, 0.9, 0.5}).x == Vector{1, 1, 1});
  RngStream rng(3, 0);
  for (int t = 0; t < 30; ++t) {
    const Vector c = sample_normal(rng, 8);
    double best = -kInf;
    for (std::uint32_t mask = 0; mask < 256; ++mask) {
      if (std::popcount(mask) != 3) continue;
      double v = 0.0;
      for (int i = 0; i < 8; ++i)
        if (mask >> i & 1u) v += c[i];
      best = std::max(best, v);
    }
    CHECK(solve_topk({8, 3}, c).objective == doctest::Approx(best));
  }
}

TEST_CASE("simplex: top-k LP agrees with the sort solver") {
  RngStream rng(4, 0);
  const TopKSpec spec{10, 3};
  const auto relax = *make_topk_oracle(spec)->relaxation();
  for (int t = 0; t < 20; ++t) {
    const Vector c = sample_normal(rng, 10);
    LinearProgram lp;
    lp.c = c;
    lp.a = relax.a_eq;
    lp.b = relax.b_eq;
    lp.row_types = {RowType::kEq};
    lp.upper = relax.upper;
    lp.sense = Sense::kMaximize;
    const auto s = simplex_solve(lp);
    REQUIRE(s.status == SolveStatus::kOptimal);
    CHECK(s.objective == doctest::Approx(solve_topk(spec, c).objective));
    CHECK(primal_residual(lp, s.x) <= 1e-8);
  }
}

TEST_CASE("simplex: infeasible, zero cost, unbounded") {
  LinearProgram lp;
  lp.c = {1.0};
  lp.a = Matrix(1, 1, Vector{1.0});
  lp.b = {-1.0};
  CHECK(simplex_solve(lp).status == SolveStatus::kInfeasible);

  LinearProgram z;
  z.c = {0.0, 0.0};
  z.a = Matrix(1, 2, Vector{1.0, 1.0});
  z.b = {1.0};
  const auto a = simplex_solve(z), b = simplex_solve(z);
  CHECK(a.status == SolveStatus::kOptimal);
  CHECK(a.objective == 0.0);
  CHECK(a.x == b.x);

  LinearProgram u;
  u.c = {1.0};
  u.a = Matrix(0, 1);
  u.sense = Sense::kMaximize;
  CHECK(simplex_solve(u).status == SolveStatus::kUnbounded);
}

TEST_CASE("simplex: random bounded LPs satisfy residual bounds") {
  RngStream rng(41, 0);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.uniform_index(6), m = 1 + rng.uniform_index(5);
    LinearProgram lp;
    lp.c = sample_normal(rng, n);
    lp.a = Matrix(m, n);
    for (double& v : lp.a.values()) v = rng.uniform(-1.0, 2.0);
    lp.b.resize(m);
    for (double& v : lp.b) v = rng.uniform(0.5, 3.0);
    lp.lower.assign(n, -1.0);
    lp.upper.assign(n, 2.0);
    const auto s = simplex_solve(lp);
    REQUIRE(s.status == SolveStatus::kOptimal);
    CHECK(primal_residual(lp, s.x) <= 1e-8);
    // No better vertex along any single coordinate move.
    for (std::size_t j = 0; j < n; ++j) {
      for (double d : {-1e-3, 1e-3}) {
        Vector y = s.x;
        y[j] += d;
        if (primal_residual(lp, y) <= 1e-12) CHECK(dot(lp.c, y) >= s.objective - 1e-12);
      }
    }
  }
}

TEST_CASE("branch and bound: knapsack MILP equals DP") {
  RngStream rng(5, 0);
  for (int t = 0; t < 50; ++t) {
    const KnapsackSpec s = random_knapsack(12, rng);
    Vector c(12);
    for (double& v : c) v = rng.uniform(0.0, 10.0);
    const auto bb = branch_and_bound(knapsack_milp(s, c));
    REQUIRE(bb.status == SolveStatus::kOptimal);
    CHECK(bb.objective == doctest::Approx(solve_knapsack(s, c).objective).epsilon(1e-9));
  }
}

TEST_CASE("branch and bound: node budget") {
  RngStream rng(6, 0);
  const KnapsackSpec s = random_knapsack(14, rng);
  Vector c(14);
  for (double& v : c) v = rng.uniform(0.0, 10.0);
  BranchAndBoundOptions opts;
  opts.node_limit = 1;
  bool raised = false;
  try {
    branch_and_bound(knapsack_milp(s, c), opts);
  } catch (const Error& e) {
    raised = e.code() == ErrorCode::kNodeBudgetExceeded;
  }
  CHECK(raised);
}

TEST_CASE("matching: assignment root is integral; diverse matching equals enumeration") {
  RngStream rng(7, 0);
  for (int t = 0; t < 10; ++t) {
    MatchingSpec s = random_matching_spec(4, 0.0, rng);
    const Vector c = [&] {
      Vector v(16);
      for (double& x : v) x = rng.uniform();
      return v;
    }();
    const auto sol = branch_and_bound(build_matching_milp(s, c));
    CHECK(sol.nodes == 1);
    CHECK(sol.objective == doctest::Approx(exhaustive_matching(s, c)));
  }
  for (int t = 0; t < 30; ++t) {
    const MatchingSpec s = random_matching_spec(4, 0.25, rng);
    Vector c(16);
    for (double& x : c) x = rng.uniform();
    const auto oracle = make_matching_oracle(s);
    const auto sol = oracle->solve(c);
    CHECK(sol.objective == doctest::Approx(exhaustive_matching(s, c)).epsilon(1e-9));
    CHECK(oracle->is_feasible(sol.x));
  }
  for (int t = 0; t < 10; ++t) {
    const MatchingSpec s = random_matching_spec(3, 0.25, rng);
    Vector c(9);
    for (double& x : c) x = rng.uniform();
    CHECK(make_matching_oracle(s)->solve(c).objective == doctest::Approx(exhaustive_matching(s, c)));
  }
  MatchingSpec all_same;
  all_same.nodes_per_side = 3;
  all_same.same_field.assign(9, 1);
  all_same.rho2 = 0.3;
  const auto empty = make_matching_oracle(all_same)->solve(Vector(9, 1.0));
  CHECK(empty.objective == doctest::Approx(0.0));
}

namespace {

// Minimum cost by enumerating every start slot for every task, checking capacity.
double exhaustive_schedule(const SchedulingSpec& s, const Vector& prices) {
  const int n = static_cast<int>(s.tasks.size());
  std::vector<std::pair<int, int>> choice(n);
  std::vector<Vector> load(s.machines * s.resources(), Vector(s.slots, 0.0));
  double best = kInf;
  std::function<void(int, double)> rec = [&](int j, double cost) {
    if (cost >= best) return;
    if (j == n) {
      best = cost;
      return;
    }
    const auto& t = s.tasks[j];
    for (int m = 0; m < s.machines; ++m) {
      for (int st = t.earliest_start; st + t.duration <= t.latest_end; ++st) {
        bool ok = true;
        for (std::size_t w = 0; w < s.resources() && ok; ++w)
          for (int u = st; u < st + t.duration; ++u)
            ok &= load[m * s.resources() + w][u] + t.usage[w] <= s.capacity(m, w) + 1e-9;
        if (!ok) continue;
        double c = 0.0;
        for (int u = st; u < st + t.duration; ++u) c += t.power * prices[u];
        for (std::size_t w = 0; w < s.resources(); ++w)
          for (int u = st; u < st + t.duration; ++u) load[m * s.resources() + w][u] += t.usage[w];
        rec(j + 1, cost + c);
        for (std::size_t w = 0; w < s.resources(); ++w)
          for (int u = st; u < st + t.duration; ++u) load[m * s.resources() + w][u] -= t.usage[w];
      }
    }
  };
  rec(0, 0.0);
  return best;
}

}  // namespace

TEST_CASE("scheduling MILP: hand cases") {
  SchedulingSpec s;
  s.machines = 1;
  s.slots = 3;
  s.capacity = Matrix(1, 1, 1.0);
  s.tasks.push_back({2, 0, 3, 1.0, {1.0}});
  const auto m = build_scheduling_milp(s, Vector{1, 1, 1});
  CHECK(m.lp.c[scheduling_var(s, 0, 0, 0)] == doctest::Approx(2.0));
  CHECK(m.lp.c[scheduling_var(s, 0, 0, 1)] == doctest::Approx(2.0));
  CHECK(m.lp.hi(scheduling_var(s, 0, 0, 2)) == 0.0);
  const auto oracle = make_scheduling_oracle(s);
  const auto a = oracle->solve(Vector{1, 1, 1}), b = oracle->solve(Vector{1, 1, 1});
  CHECK(a.x == b.x);
  CHECK(a.objective == doctest::Approx(2.0));

  SchedulingSpec pinned = s;
  pinned.tasks[0] = {2, 1, 3, 1.0, {1.0}};
  const auto mp = build_scheduling_milp(pinned, Vector{1, 1, 1});
  int free_vars = 0;
  for (int t = 0; t < 3; ++t) free_vars += mp.lp.hi(scheduling_var(pinned, 0, 0, t)) > 0.0;
  CHECK(free_vars == 1);

  SchedulingSpec clash = s;
  clash.tasks = {{2, 0, 2, 1.0, {1.0}}, {2, 0, 2, 1.0, {1.0}}};
  CHECK(branch_and_bound(build_scheduling_milp(clash, Vector{1, 1, 1})).status == SolveStatus::kInfeasible);
  CHECK_THROWS_AS(make_scheduling_oracle(clash)->solve(Vector{1, 1, 1}), Error);
}

TEST_CASE("scheduling MILP: desk instances equal exhaustive enumeration") {
  RngStream rng(8, 0);
  for (int t = 0; t < 10; ++t) {
    const SchedulingSpec s = gen_scheduling_instance(2, 5, 12, rng);
    Vector prices(12);
    for (double& p : prices) p = rng.uniform(0.0, 10.0);
    const auto oracle = make_scheduling_oracle(s);
    const auto sol = oracle->solve(prices);
    CHECK(sol.objective == doctest::Approx(exhaustive_schedule(s, prices)).epsilon(1e-9));
    CHECK(oracle->is_feasible(sol.x));
    CHECK(dot(prices, sol.x) == doctest::Approx(sol.objective));
  }
}

TEST_CASE("portfolio: closed-form cases and projected-gradient oracle") {
  PortfolioSpec id;
  id.sigma = Matrix::identity(3);
  id.gamma = 1.5;
  const auto neg = solve_portfolio(id, Vector{-1, -2, -0.5});
  CHECK(neg.objective == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(norm_inf(neg.x) <= 1e-7);
  const auto lin = solve_portfolio(id, Vector{0.2, 0.7, 0.1});
  CHECK(lin.objective == doctest::Approx(0.7).epsilon(1e-7));
  CHECK(lin.x[1] == doctest::Approx(1.0).epsilon(1e-6));

  RngStream rng(9, 0);
  for (int t = 0; t < 5; ++t) {
    const std::size_t d = 5;
    Matrix l(d, d);
    for (double& v : l.values()) v = rng.uniform(-1.0, 1.0);
    PortfolioSpec s;
    s.sigma = matmul(l, l.transpose());
    for (std::size_t i = 0; i < d; ++i) s.sigma(i, i) += 0.1;
    const Vector e(d, 1.0 / d);
    s.gamma = 2.25 * dot(e, matvec(s.sigma, e));
    Vector c(d);
    for (double& v : c) v = rng.uniform(-0.2, 1.0);
    const auto det = solve_portfolio_detailed(s, c);
    CHECK(det.kkt_residual <= 1e-7);
    CHECK(det.solution.objective == doctest::Approx(projected_gradient_portfolio(s, c)).epsilon(1e-5));
    CHECK(make_portfolio_oracle(s)->is_feasible(det.solution.x, 1e-8));
  }
}

TEST_CASE("oracle contracts: determinism, scale invariance, min view, relaxations") {
  RngStream rng(10, 0);
  const auto sp = make_shortest_path_oracle(GridSpec{5});
  const auto ks = make_knapsack_oracle(random_knapsack(10, rng));
  const auto tk = make_topk_oracle({10, 3});
  for (const Oracle* o : {sp.get(), ks.get(), tk.get()}) {
    for (int t = 0; t < 20; ++t) {
      Vector c(o->cost_dim());
      for (double& v : c) v = rng.uniform(0.1, 5.0);
      const auto a = o->solve(c), b = o->solve(c);
      CHECK(a.x == b.x);
      CHECK(o->is_feasible(a.x));
      CHECK(a.objective == doctest::Approx(dot(c, a.x)));
      CHECK(o->solve(3.7 * c).x == a.x);
      const Vector cm = sense_sign(o->sense()) * c;
      CHECK(o->solve_min(cm).x == a.x);

      const auto r = *o->relaxation();
      LinearProgram lp;
      lp.c = c;
      lp.sense = o->sense();
      lp.a = Matrix(r.a_eq.rows() + r.g.rows(), r.num_vars());
      for (std::size_t i = 0; i < r.a_eq.rows(); ++i) {
        std::copy(r.a_eq.row(i).begin(), r.a_eq.row(i).end(), lp.a.row(i).begin());
        lp.b.push_back(r.b_eq[i]);
        lp.row_types.push_back(RowType::kEq);
      }
      for (std::size_t i = 0; i < r.g.rows(); ++i) {
        std::copy(r.g.row(i).begin(), r.g.row(i).end(), lp.a.row(r.a_eq.rows() + i).begin());
        lp.b.push_back(r.h[i]);
        lp.row_types.push_back(RowType::kLe);
      }
      lp.lower = r.lower;
      lp.upper = r.upper;
      // The integral solution is feasible for the relaxation.
      CHECK(primal_residual(lp, a.x) <= 1e-9);
      if (o != ks.get()) CHECK(simplex_solve(lp).objective == doctest::Approx(a.objective));
    }
  }
}
