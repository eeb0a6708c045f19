#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dflbench/benchcli.hpp"

using namespace dflbench;

namespace {

const char* kMinimal = R"(
[problem]
kind = "shortest_path"
n_train = 40
n_validation = 20
n_test = 30

[method]
name = ["PF", "SPO"]

[training]
epochs = 3
patience = 0
seeds = [0, 1]
)";

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfigError);
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& needle) { return s.find(needle) != std::string::npos; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dflbench_test_benchcli_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("minimal config parses with defaults filled in") {
  const ExperimentConfig cfg = parse_config_text(kMinimal);
  CHECK(cfg.problem_kind == "shortest_path");
  REQUIRE(cfg.methods.size() == 2);
  CHECK(cfg.methods[1] == Method::kSPO);
  CHECK(cfg.grid == GridMode::kNone);
  CHECK(cfg.training.epochs == 3);
  CHECK(cfg.training.lr == doctest::Approx(0.01));
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1});
  CHECK(cfg.tuning_seeds == cfg.seeds);
  CHECK(cfg.resolved["problem"]["deg"] == 1);
  CHECK(cfg.resolved["problem"]["grid_side"] == 5);
  CHECK(cfg.resolved["method"]["p_solve"] == 0.05);
}

TEST_CASE("JSON documents are accepted too") {
  const ExperimentConfig cfg =
      parse_config_text(R"({"problem": {"kind": "topk", "n": 10, "k": 3}, "method": {"name": "DBB", "delta": 10}})");
  CHECK(cfg.methods == std::vector<Method>{Method::kDBB});
  CHECK(cfg.strategy.delta == 10.0);
  CHECK(cfg.seeds.size() == 10);
}

TEST_CASE("config errors name the offending key") {
  CHECK(contains(error_of("[problem]\nkind='knapsack'\n[method]\nname='IMLE'\ndelta=1\nepsilon=1\n"), "method.kappa"));
  CHECK(contains(error_of("[problem]\nkind='knapsack'\n[method]\nname='DBB'\n"), "method.delta"));
  CHECK(contains(error_of("[problem]\nkind='knapsack'\nfoo=3\n[method]\nname='PF'\n"), "problem.foo"));
  CHECK(contains(error_of("[problem]\nkind='nope'\n[method]\nname='PF'\n"), "problem.kind"));
  CHECK(contains(error_of("[problem]\nkind='knapsack'\n[method]\nname='XYZ'\n"), "method.name"));
  CHECK(contains(error_of("[problem]\nkind='knapsack'\n[method]\nname='DBB'\ndelta=-1\n"), "method.delta"));
  CHECK(contains(error_of("[problem]\nkind='knapsack'\n[method]\nname='PF'\n[training]\nepochs='x'\n"),
                 "training.epochs"));
  CHECK(contains(error_of("[problem]\nkind='topk'\n[method]\nname='SPO'\n"), "method.name"));
  CHECK(contains(error_of("[problem]\nkind='portfolio'\n[method]\nname='QPTL'\nmu=1\n"), "method.name"));
  CHECK(contains(error_of("[method]\nname='PF'\n"), "problem"));
  CHECK(contains(error_of("[problem\n"), "config:1"));
  // With the full grid the tuned hyperparameters may be omitted.
  CHECK(error_of("[problem]\nkind='knapsack'\n[method]\nname='IMLE'\ngrid='full'\n").empty());
}

TEST_CASE("resolved config round trips") {
  const ExperimentConfig a = parse_config_text(kMinimal);
  const std::string text = serialize_config(a);
  const ExperimentConfig b = parse_config_text(text);
  CHECK(serialize_config(b) == text);
  CHECK(b.methods == a.methods);
  CHECK(b.seeds == a.seeds);
}

TEST_CASE("presets expand to valid configs") {
  for (const std::string& name : preset_names()) {
    CAPTURE(name);
    const ExperimentConfig cfg = parse_config_json(preset_config(name));
    CHECK(cfg.grid == GridMode::kFull);
    CHECK(!cfg.methods.empty());
  }
  const ExperimentConfig deg8 = parse_config_json(preset_config("shortest_path_deg8"));
  CHECK(deg8.resolved["problem"]["deg"] == 8);
  CHECK(deg8.resolved["problem"]["noise"] == 0.5);
  CHECK(deg8.methods.size() == all_methods().size());
  const ExperimentConfig topk = parse_config_json(preset_config("topk_25"));
  for (Method m : topk.methods) CHECK(m != Method::kSPO);
  CHECK_THROWS_AS(preset_config("nope"), Error);

  Json doc = preset_config("knapsack_120");
  merge_json(doc, Json{{"training", {{"epochs", 2}}}, {"problem", {{"n_days", 200}}}});
  const ExperimentConfig merged = parse_config_json(doc);
  CHECK(merged.resolved["problem"]["capacity"] == 120);
  CHECK(merged.resolved["problem"]["n_days"] == 200);
  CHECK(merged.training.epochs == 2);
}

TEST_CASE("summary quantiles interpolate linearly") {
  const SummaryStats s = summarize({5, 1, 4, 2, 3});
  CHECK(s.min == 1.0);
  CHECK(s.q1 == 2.0);
  CHECK(s.median == 3.0);
  CHECK(s.q3 == 4.0);
  CHECK(s.max == 5.0);
  CHECK(s.mean == 3.0);
  CHECK(s.stddev == doctest::Approx(std::sqrt(2.5)));
  const SummaryStats t = summarize({1, 2, 3, 4});
  CHECK(t.median == 2.5);
  CHECK(t.q1 == 1.75);
  CHECK(summarize({7}).stddev == 0.0);
  CHECK_THROWS_AS(summarize({}), Error);
}

TEST_CASE("results CSV header and number format are fixed") {
  CHECK(std::string(kResultsCsvHeader) ==
        "problem,instance_setting,method,hyperparams,seed,split,epoch,relative_regret,absolute_regret,mse,"
        "mismatch,solver_calls,epoch_time_ms");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1e-6) == "1e-06");
  CHECK(format_number(std::nan("")) == "");
  ResultRow r;
  r.problem = "topk";
  r.instance_setting = "n=25;k=5";
  r.method = "DBB";
  r.hyperparams = "lr=0.5;delta=10";
  r.seed = 3;
  r.split = Split::kTest;
  r.epoch = 7;
  r.relative_regret = std::nan("");
  r.absolute_regret = std::nan("");
  r.mse = std::nan("");
  r.mismatch = 0.25;
  r.solver_calls = 0;
  r.epoch_time_ms = std::nan("");
  const std::string csv = to_csv({r});
  CHECK(csv == std::string(kResultsCsvHeader) + "\ntopk,n=25;k=5,DBB,lr=0.5;delta=10,3,test,7,,,,0.25,0,\n");
  const auto back = parse_results_csv(csv);
  REQUIRE(back.size() == 1);
  CHECK(to_csv(back) == csv);
  CHECK_THROWS_AS(parse_results_csv("bad header\n"), Error);
}

TEST_CASE("summary reports the test metric at the best validation epoch") {
  std::vector<ResultRow> rows;
  auto add = [&](std::uint64_t seed, Split split, int epoch, double v) {
    ResultRow r;
    r.problem = "knapsack";
    r.instance_setting = "capacity=60";
    r.method = "SPO";
    r.hyperparams = "lr=0.01";
    r.seed = seed;
    r.split = split;
    r.epoch = epoch;
    r.relative_regret = r.absolute_regret = r.mse = v;
    r.mismatch = std::nan("");
    rows.push_back(r);
  };
  // Seed 0: validation best at epoch 1 (tie with epoch 3 goes to the earlier one).
  const double val0[] = {0.5, 0.2, 0.3, 0.2}, test0[] = {0.6, 0.25, 0.1, 0.05};
  // Seed 1: no validation rows, so the last epoch counts.
  const double test1[] = {0.6, 0.4, 0.35, 0.3};
  for (int e = 0; e < 4; ++e) {
    add(0, Split::kValidation, e, val0[e]);
    add(0, Split::kTest, e, test0[e]);
    add(1, Split::kTest, e, test1[e]);
  }
  const Json g = emit_summary(rows)["groups"][0];
  CHECK(g["metric"] == "relative_regret");
  CHECK(g["values"] == Json::array({0.25, 0.3}));
}

TEST_CASE("hyperparameter strings list only the method's parameters") {
  TrainConfig cfg;
  cfg.lr = 0.05;
  cfg.strategy.method = Method::kIMLE;
  cfg.strategy.delta = 10;
  cfg.strategy.epsilon = 0.5;
  cfg.strategy.kappa = 5;
  CHECK(hyperparam_string(cfg) == "lr=0.05;delta=10;epsilon=0.5;kappa=5");
  cfg.strategy.method = Method::kPF;
  CHECK(hyperparam_string(cfg) == "lr=0.05");
}

TEST_CASE("experiment row counts and byte-identical reruns") {
  ExperimentConfig cfg = parse_config_text(kMinimal);
  const auto dir_a = temp_dir("a"), dir_b = temp_dir("b");
  cfg.output_dir = dir_a.string();
  const ExperimentResult a = run_experiment(cfg);
  // 2 methods x 2 seeds x (epoch 0 + 3 more) x 3 splits.
  CHECK(a.rows.size() == 2 * 2 * 4 * 3);
  CHECK(a.summary["groups"].size() == 2);
  CHECK(a.summary["groups"][0]["n"] == 2);
  cfg.output_dir = dir_b.string();
  run_experiment(cfg);
  const std::string csv = slurp(dir_a / "results.csv");
  CHECK(csv == slurp(dir_b / "results.csv"));
  CHECK(csv == to_csv(a.rows));
  CHECK(std::filesystem::exists(dir_a / "summary.json"));
  CHECK(std::filesystem::exists(dir_a / "resolved_config.json"));
  CHECK(std::filesystem::exists(dir_a / "timing.csv"));
  CHECK(!std::filesystem::exists(dir_a / "grid.csv"));
  // Same initial model for every method: epoch-0 rows agree.
  CHECK(a.rows[0].relative_regret == a.rows[2 * 4 * 3].relative_regret);
  // The report path reproduces the summary.
  CHECK(emit_summary(parse_results_csv(csv)) == a.summary);
}

TEST_CASE("grid mode tunes lr and reruns the best cell") {
  ExperimentConfig cfg = parse_config_text(kMinimal);
  cfg.methods = {Method::kPF};
  cfg.grid = GridMode::kLr;
  cfg.training.epochs = 2;
  cfg.seeds = {0};
  cfg.tuning_seeds = {0};
  const auto dir = temp_dir("grid");
  cfg.output_dir = dir.string();
  const ExperimentResult r = run_experiment(cfg);
  REQUIRE(r.grid.contains("PF"));
  CHECK(r.grid["PF"]["cells"].size() == table_a1_values("lr").size());
  const std::size_t best = r.grid["PF"]["best_cell"];
  const double best_lr = r.grid["PF"]["cells"][best]["params"]["lr"];
  CHECK(r.rows.front().hyperparams == "lr=" + format_number(best_lr));
  CHECK(std::filesystem::exists(dir / "grid.csv"));
}

TEST_CASE("every problem kind builds and trains briefly") {
  const std::vector<std::string> docs = {
      R"({"problem": {"kind": "portfolio", "assets": 8, "n_train": 20, "n_validation": 10, "n_test": 10},
          "method": {"name": ["PF", "SPO"]}})",
      R"({"problem": {"kind": "knapsack", "n_days": 60, "n_train": 30, "n_validation": 10},
          "method": {"name": ["PF", "MAP"]}})",
      R"({"problem": {"kind": "scheduling", "n_days": 30, "n_train": 15, "n_validation": 5, "tasks": 3},
          "method": {"name": ["PF", "DBB"], "delta": 1}})",
      R"({"problem": {"kind": "matching", "nodes": 4, "feature_dim": 4, "n_train": 10, "n_validation": 4,
          "n_test": 4}, "method": {"name": ["PF", "NCE"]}})",
      R"({"problem": {"kind": "topk", "n": 10, "k": 3, "n_train": 30, "n_validation": 10, "n_test": 10},
          "method": {"name": ["DBB", "QPTL"], "delta": 10, "mu": 1}})",
  };
  for (const std::string& text : docs) {
    Json doc = parse_config_document(text);
    doc["training"] = {{"epochs", 1}, {"seeds", {0}}};
    const ExperimentConfig cfg = parse_config_json(doc);
    CAPTURE(cfg.problem_kind);
    const ExperimentResult r = run_experiment(cfg);
    CHECK(r.rows.size() == 2 * 2 * 3);
    for (const ResultRow& row : r.rows) {
      if (cfg.problem_kind == "topk") {
        CHECK(std::isfinite(row.mismatch));
        CHECK(std::isnan(row.relative_regret));
      } else if (cfg.problem_kind == "portfolio") {
        CHECK(std::isfinite(row.absolute_regret));
      } else {
        CHECK(std::isfinite(row.relative_regret));
      }
    }
  }
}

TEST_CASE("problem data is fixed by data_seed") {
  ExperimentConfig cfg = parse_config_text(kMinimal);
  const ProblemSetup a = build_problem(cfg);
  const ProblemSetup b = build_problem(cfg);
  CHECK(a.train.instances[5].true_cost == b.train.instances[5].true_cost);
  cfg.resolved["problem"]["data_seed"] = 1;
  const ProblemSetup c = build_problem(cfg);
  CHECK(a.train.instances[5].true_cost != c.train.instances[5].true_cost);
}

TEST_CASE("error records carry the code") {
  const Json rec = error_record(Error(ErrorCode::kConfigError, "method.kappa: required"));
  CHECK(rec["code"] == "ConfigError");
  CHECK(rec["status"] == "error");
  CHECK(error_record(std::runtime_error("x"))["code"] == "Internal");
}
