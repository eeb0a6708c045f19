#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dflbench/problems.hpp"
#include "dflbench/solvers.hpp"

using namespace dflbench;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dflbench_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("shortest path generator") {
  RngStream rng(0, 0);
  auto [data, truth] = gen_shortest_path_data(1000, 5, 1, 0.5, rng);
  CHECK(data.size() == 1000);
  CHECK(data.instances[0].true_cost.size() == 40);
  CHECK(data.instances[0].features.cols() == 5);
  for (const auto& inst : data.instances)
    for (double c : inst.true_cost) CHECK(c > 0.0);

  const Vector z0(5, 0.0), ones(40, 1.0);
  for (double c : shortest_path_cost(truth, z0, ones)) CHECK(c == doctest::Approx(4.0));

  RngStream r2(1, 0);
  SyntheticGroundTruth t2 = make_shortest_path_truth(GridSpec{5}, 3, 2, 0.0, r2);
  const Vector z{0.3, -1.2, 0.8};
  const Vector c = shortest_path_cost(t2, z, ones);
  for (std::size_t j = 0; j < 40; ++j) {
    double bz = 0.0;
    for (std::size_t k = 0; k < 3; ++k) bz += t2.b(j, k) * z[k];
    CHECK(c[j] == doctest::Approx(std::pow(bz / std::sqrt(3.0) + 3.0, 2) + 1.0));
  }
  CHECK_THROWS_AS(gen_shortest_path_data(10, 5, 1, 1.0, rng), Error);

  RngStream a(3, 3), b(3, 3);
  CHECK(gen_shortest_path_data(5, 5, 4, 0.5, a).first.instances[4].true_cost ==
        gen_shortest_path_data(5, 5, 4, 0.5, b).first.instances[4].true_cost);
}

TEST_CASE("portfolio generator") {
  RngStream rng(0, 1);
  auto zero = make_portfolio_truth(10, 5, 1, 0.0, rng);
  CHECK(zero.spec.degenerate);
  const auto d0 = sample_portfolio(zero, 3, rng);
  for (const auto& inst : d0.instances) {
    const Vector z(inst.features.row(0).begin(), inst.features.row(0).end());
    CHECK(inst.true_cost == portfolio_conditional_mean(zero.truth, z));
  }
  for (double v : portfolio_conditional_mean(zero.truth, Vector(5, 0.0))) CHECK(v == doctest::Approx(0.1));

  auto [data, spec] = gen_portfolio_data(20, 10, 5, 4, 1.0, rng);
  CHECK(data.size() == 20);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) CHECK(spec.sigma(i, j) == spec.sigma(j, i));
  CHECK_NOTHROW(cholesky(spec.sigma));
  const Vector e(10, 0.1);
  CHECK(spec.gamma == doctest::Approx(2.25 * dot(e, matvec(spec.sigma, e))));
  CHECK_THROWS_AS(gen_portfolio_data(5, 1, 5, 1, 1.0, rng), Error);
}

TEST_CASE("energy csv round trip and guards") {
  const auto dir = temp_dir("energy");
  RngStream rng(2, 0), again(2, 0);
  write_synthetic_energy_csv(dir / "e.csv", 3, rng);
  const Dataset loaded = load_energy_csv(dir / "e.csv");
  const Dataset direct = synthetic_energy_days(3, again);
  REQUIRE(loaded.size() == 3);
  CHECK(loaded.instances[0].features.rows() == 48);
  CHECK(loaded.instances[0].features.cols() == 8);
  for (std::size_t d = 0; d < 3; ++d) {
    CHECK(loaded.instances[d].true_cost == direct.instances[d].true_cost);
    CHECK(loaded.instances[d].features == direct.instances[d].features);
  }
  // 2011-11-01 was a Tuesday.
  CHECK(loaded.instances[0].features(0, 0) == 1.0);

  std::ifstream in(dir / "e.csv");
  std::ofstream out(dir / "partial.csv");
  std::string line;
  for (int i = 0; i < 1 + 48 + 47 && std::getline(in, line); ++i) out << line << '\n';
  out.close();
  try {
    load_energy_csv(dir / "partial.csv");
    FAIL("expected PartialDay");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPartialDay);
    CHECK(std::string(e.what()).find("2011-11-02") != std::string::npos);
  }
  {
    std::ofstream bad(dir / "bad.csv");
    bad << kEnergyCsvHeader << "\n2011-11-01 00:00:00,1,x,0,0,0,0,0,0,0\n";
  }
  try {
    load_energy_csv(dir / "bad.csv");
    FAIL("expected IngestError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIngestError);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("standardize and aggregate") {
  RngStream rng(3, 0);
  Dataset days = synthetic_energy_days(4, rng);
  Dataset other = days;
  standardize_features(days, {&days, &other});
  double mean = 0.0;
  for (const auto& inst : days.instances) mean += inst.features(5, 3);
  CHECK(days.instances[0].features == other.instances[0].features);
  const Dataset agg = aggregate_slots(days, 12);
  CHECK(agg.instances[0].true_cost.size() == 12);
  CHECK(agg.instances[0].true_cost[0] ==
        doctest::Approx((days.instances[0].true_cost[0] + days.instances[0].true_cost[1] +
                         days.instances[0].true_cost[2] + days.instances[0].true_cost[3]) / 4));
  CHECK_THROWS_AS(aggregate_slots(days, 7), Error);
}

TEST_CASE("knapsack generator") {
  RngStream rng(4, 0);
  const Dataset days = synthetic_energy_days(5, rng);
  for (int cap : kReproductionCapacities) {
    auto [data, spec] = gen_knapsack_data(days, cap, rng);
    int sum = 0;
    for (int w : spec.weights) {
      CHECK((w == 3 || w == 5 || w == 7));
      sum += w;
    }
    CHECK(sum == 240);
    CHECK(spec.capacity == cap);
    for (const auto& inst : data.instances)
      for (double c : inst.true_cost) CHECK(c >= 0.0);
  }
  auto [data, spec] = gen_knapsack_data(days, 240, rng);
  const auto sol = solve_knapsack(spec, data.instances[0].true_cost);
  for (std::size_t i = 0; i < spec.weights.size(); ++i)
    CHECK(sol.x[i] == (data.instances[0].true_cost[i] > 0.0 ? 1.0 : 0.0));

  // Values proportional to weights: any capacity-filling subset is optimal.
  const KnapsackSpec s{{3, 5, 7, 3, 5, 7, 3, 5, 7, 5}, 20};
  Vector c(10);
  for (int i = 0; i < 10; ++i) c[i] = 2.0 * s.weights[i];
  CHECK(solve_knapsack(s, c).objective == doctest::Approx(40.0));

  Dataset bad;
  bad.instances.push_back({Matrix(1, 1), Vector(47, 1.0), std::nullopt});
  CHECK_THROWS_AS(knapsack_from_prices(bad, spec, rng), Error);
}

TEST_CASE("matching generator") {
  RngStream rng(5, 0);
  auto [data, spec] = gen_matching_data(6, 8, 0.25, 0.25, 10, rng);
  CHECK(data.size() == 10);
  CHECK(data.instances[0].true_cost.size() == 36);
  CHECK(data.instances[0].features.rows() == 36);
  CHECK(data.instances[0].features.cols() == 16);
  for (double c : data.instances[0].true_cost) {
    CHECK(c > 0.0);
    CHECK(c < 1.0);
  }
  CHECK_THROWS_AS(gen_matching_data(2, 4, 1.0, 1.0, 2, rng), Error);
  for (auto rho : {0.1, 0.25, 0.5}) CHECK_NOTHROW(gen_matching_data(6, 4, rho, rho, 1, rng));
}

TEST_CASE("top-k generator") {
  RngStream rng(6, 0);
  auto [data, spec] = gen_topk_data(25, 5, 1000, rng);
  CHECK(data.size() == 1000);
  CHECK(spec.k == 5);
  for (const auto& inst : data.instances) {
    REQUIRE(inst.true_solution);
    double s = 0.0;
    for (double v : *inst.true_solution) s += v;
    CHECK(s == 5.0);
    CHECK(inst.true_cost.empty());
  }
  CHECK_THROWS_AS(gen_topk_data(3, 4, 1, rng), Error);
  CHECK(solve_topk({3, 1}, Vector{0.9, 0.1, 0.5}).x == Vector{1, 0, 0});
}

TEST_CASE("scheduling generator") {
  RngStream rng(7, 0);
  const SchedulingSpec s = gen_scheduling_instance(3, 6, 12, rng);
  CHECK(scheduling_windows_valid(s));
  CHECK(s.tasks.size() == 6);

  SchedulingSpec one;
  one.machines = 1;
  one.slots = 4;
  one.capacity = Matrix(1, 1, 1.0);
  one.tasks.push_back({1, 0, 4, 1.0, {1.0}});
  const auto sol = make_scheduling_oracle(one)->solve(Vector{3, 2, 1, 4});
  CHECK(sol.x == Vector{0, 0, 1, 0});
}

TEST_CASE("dataset archive round trip") {
  const auto dir = temp_dir("archive");
  RngStream rng(8, 0);
  auto [train, truth] = gen_shortest_path_data(4, 5, 2, 0.5, rng);
  attach_solutions(train, *make_shortest_path_oracle(GridSpec{5}));
  Dataset test = sample_shortest_path(truth, 3, rng, Split::kTest);
  attach_solutions(test, *make_shortest_path_oracle(GridSpec{5}));
  write_dataset_archive(dir, R"({"problem":"shortest_path"})", {&train, &test});
  std::string meta;
  const auto back = read_dataset_archive(dir, &meta);
  CHECK(meta == R"({"problem":"shortest_path"})");
  REQUIRE(back.size() == 2);
  CHECK(back[1].split == Split::kTest);
  CHECK(back[0].instances[3].true_cost == train.instances[3].true_cost);
  CHECK(back[0].instances[3].features == train.instances[3].features);
  CHECK(*back[1].instances[2].true_solution == *test.instances[2].true_solution);
}
