#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dflbench/dflgrad.hpp"
#include "dflbench/predictors.hpp"
#include "dflbench/problems.hpp"
#include "dflbench/solvers.hpp"

namespace dflbench {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  // Zero moments shaped like `params`.
  static AdamState init(const std::vector<Matrix>& params, double lr);
};

// Bias-corrected Adam update in place. kDimMismatch on shape mismatch.
void adam_step(AdamState& state, std::vector<Matrix>& params, const GradientBundle& grads);

// Reduce-on-plateau for a metric where lower is better.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor = 0.5, int patience = 2, double floor = 1e-6);

  // Records one epoch's metric and returns the (possibly reduced) learning rate.
  double step(double metric, double lr);

 private:
  double factor_;
  int patience_;
  double floor_;
  double best_;
  int bad_epochs_ = 0;
};

enum class Metric { kRelativeRegret, kAbsoluteRegret, kMismatch };
std::string to_string(Metric m);

struct TrainConfig {
  int epochs = 20;
  int patience = 5;  // early stop after this many epochs without validation improvement; <= 0 disables
  int batch_size = 1;
  double lr = 0.01;
  std::uint64_t seed = 0;
  StrategyConfig strategy;
  TaskLoss task = TaskLoss::kRegret;
  Metric monitor = Metric::kRelativeRegret;
  bool eval_train = true;
  bool eval_test = true;
  bool use_scheduler = true;

  void validate() const;
};

struct EvalMetrics {
  double relative_regret = 0.0;  // NaN when not computed
  double absolute_regret = 0.0;  // NaN when the split has no cost vectors
  double mse = 0.0;              // NaN when the split has no cost vectors
  double mismatch = 0.0;         // NaN unless the split only has target solutions
  double task_loss = 0.0;        // negated inner product, for mismatch splits
  Vector per_instance;           // the monitored metric per instance
};

struct EpochRow {
  int epoch = 0;
  Split split = Split::kTrain;
  EvalMetrics metrics;
  std::size_t solver_calls = 0;  // training oracle calls during this epoch (train rows only)
  double epoch_time_ms = 0.0;    // training wall time of this epoch
  double lr = 0.0;
};

struct RegretReport {
  std::vector<EpochRow> rows;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_validation = 0.0;
  double final_validation = 0.0;
  std::size_t solver_calls = 0;

  // Row for (epoch, split); nullptr if absent.
  const EpochRow* find(int epoch, Split split) const;
  const EpochRow* final_row(Split split) const;
};

double metric_value(const EvalMetrics& m, Metric which);

struct RegretMetrics {
  double mean = 0.0;
  Vector per_instance;
};

// Regret of the model's decisions against the exact oracle. Relative mode divides each
// instance by |c.x*(c)| and raises kZeroDenominator naming the instance when it is zero.
RegretMetrics evaluate_regret(const Dataset& data, const Oracle& oracle, const PredictorModel& model,
                              bool relative);
// Regret from given predictions (native sense), one per instance.
RegretMetrics evaluate_regret(const Dataset& data, const Oracle& oracle, const std::vector<Vector>& predictions,
                              bool relative);

struct MismatchMetrics {
  double mean = 0.0;       // fraction of true items not selected
  double task_loss = 0.0;  // mean of -x*.x_hat
  Vector per_instance;
};

MismatchMetrics evaluate_mismatch(const Dataset& data, const Oracle& oracle, const PredictorModel& model);

// All metrics that apply to the split.
EvalMetrics evaluate(const Dataset& data, const Oracle& oracle, const PredictorModel& model, Metric monitor);

struct TrainData {
  const Dataset* train = nullptr;
  const Dataset* validation = nullptr;
  const Dataset* test = nullptr;
};

// Per-instance training loop; true solutions must be attached to the training split.
// On return `model` holds the parameters of the best validation epoch (the first one on ties).
RegretReport train(const TrainData& data, const Oracle& oracle, PredictorModel& model, const TrainConfig& config);

// Table A1 values for a hyperparameter name (lr, delta, epsilon, kappa, tau, theta, mu).
const std::vector<double>& table_a1_values(const std::string& name);

struct GridAxis {
  std::string name;
  std::vector<double> values;
};

// lr followed by the method's tuned hyperparameters (p_solve and mc_samples stay fixed).
std::vector<GridAxis> table_a1_grid(Method method);

// Sets lr or a strategy hyperparameter by name; kConfigError for unknown names.
void set_hyperparam(TrainConfig& config, const std::string& name, double value);

struct GridCell {
  std::size_t index = 0;
  std::vector<std::pair<std::string, double>> params;
  std::vector<std::uint64_t> seeds;
  std::vector<RegretReport> reports;  // one per seed (empty report on failure)
  double mean_validation = 0.0;
  bool failed = false;
  std::string error;
};

struct GridResult {
  std::size_t best_cell = 0;
  TrainConfig best_config;
  std::vector<GridCell> cells;
};

// Runs `run` for every cell (row-major over axes, last axis fastest) and seed, with up to
// `parallel` workers. The best cell has the lowest mean best-epoch validation metric; ties go to the
// lower index. Failed cells are recorded and skipped. kEmptyInput if every cell failed.
using GridRunner = std::function<RegretReport(const TrainConfig&)>;
GridResult grid_search(const TrainConfig& base, const std::vector<GridAxis>& axes,
                       const std::vector<std::uint64_t>& seeds, const GridRunner& run, int parallel = 1);

// Runs f(i) for i in [0, n) on up to `workers` threads; the first exception is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& f);

}  // namespace dflbench
