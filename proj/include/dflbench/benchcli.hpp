#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dflbench/dflgrad.hpp"
#include "dflbench/predictors.hpp"
#include "dflbench/problems.hpp"
#include "dflbench/solvers.hpp"
#include "dflbench/traineval.hpp"

namespace dflbench {

using Json = nlohmann::json;

enum class GridMode { kNone, kLr, kFull };
std::string to_string(GridMode g);

// Fully validated experiment description. `resolved` holds every block with defaults filled in;
// the typed fields are views of it.
struct ExperimentConfig {
  Json resolved;

  std::string problem_kind;
  std::vector<Method> methods;
  StrategyConfig strategy;  // shared hyperparameters; `method` is overwritten per run
  GridMode grid = GridMode::kNone;
  TrainConfig training;     // lr, epochs, patience, batch size
  std::string model;        // "linear", "mlp" or "" for the problem default
  std::size_t hidden = 64;
  std::vector<std::uint64_t> seeds;
  std::vector<std::uint64_t> tuning_seeds;
  std::string output_dir;
  bool timing = false;
  bool checkpoints = false;
};

// Validates against the schema; kConfigError names the offending key path (e.g. "method.kappa").
ExperimentConfig parse_config_json(const Json& doc);
// TOML (nested tables) or JSON, chosen by content: a document starting with '{' is JSON.
Json parse_config_document(const std::string& text, const std::string& origin = "config");
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);
// Canonical serialization of the resolved config (JSON).
std::string serialize_config(const ExperimentConfig& config);

// Built-in reproduction presets, as config documents. kConfigError for unknown names.
Json preset_config(const std::string& name);
std::vector<std::string> preset_names();

// Recursively overlays `patch` onto `base`.
void merge_json(Json& base, const Json& patch);

// Everything needed to train on one problem setting.
struct ProblemSetup {
  std::string kind;
  std::string instance_setting;
  Dataset train;
  Dataset validation;
  Dataset test;
  std::unique_ptr<Oracle> oracle;
  ModelConfig model;
  TaskLoss task = TaskLoss::kRegret;
  Metric monitor = Metric::kRelativeRegret;
  Json meta;  // problem spec fields for archives
};

ProblemSetup build_problem(const ExperimentConfig& config);

struct ResultRow {
  std::string problem;
  std::string instance_setting;
  std::string method;
  std::string hyperparams;
  std::uint64_t seed = 0;
  Split split = Split::kTrain;
  int epoch = 0;
  double relative_regret = 0.0;  // NaN renders as an empty field
  double absolute_regret = 0.0;
  double mse = 0.0;
  double mismatch = 0.0;
  std::size_t solver_calls = 0;
  double epoch_time_ms = 0.0;  // NaN unless timing output is enabled
};

extern const char* const kResultsCsvHeader;
std::string format_number(double v);
std::string to_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results_csv(const std::string& text);

// Quantiles use linear interpolation between order statistics: q(p) = x[floor(h)] + (h - floor(h)) *
// (x[floor(h)+1] - x[floor(h)]) with h = p (n - 1). stddev is the sample standard deviation (0 for n = 1).
struct SummaryStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0, stddev = 0.0;
  std::size_t n = 0;
};
SummaryStats summarize(std::vector<double> values);

// Per (problem, setting, method): statistics across seeds of the test metric at the epoch with the
// lowest validation value of the same metric (earliest on ties; the last epoch when there are no
// validation rows). The metric is relative regret, else absolute regret, else mismatch, whichever
// the rows carry. kEmptyInput when there are no test rows.
Json emit_summary(const std::vector<ResultRow>& rows);

std::string hyperparam_string(const TrainConfig& cfg);

struct RunOptions {
  int parallel = 1;
  bool force_grid = false;  // `grid` subcommand: use the Table A1 grid when the config says none
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  Json summary;
  Json grid;  // per method: the full grid table, when searched
};

// Generates data, tunes (if configured), trains every method over every seed and writes
// results.csv, summary.json, resolved_config.json (and timing.csv, grid.csv, checkpoints) to
// the output directory when it is non-empty.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& opts = {});

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// Machine-readable error record.
Json error_record(const std::exception& e);

}  // namespace dflbench
