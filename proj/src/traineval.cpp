#include "dflbench/traineval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

namespace dflbench {
namespace {

constexpr std::uint64_t kTrainStream = 0x747261696e;  // "train"
const double kNaN = std::numeric_limits<double>::quiet_NaN();

bool has_costs(const Dataset& data) {
  return std::all_of(data.instances.begin(), data.instances.end(),
                     [](const ProblemInstance& inst) { return !inst.true_cost.empty(); });
}

Vector predict(const PredictorModel& model, const ProblemInstance& inst, std::size_t i) {
  Vector c_hat = model.forward(inst.features);
  require(all_finite(c_hat), ErrorCode::kInvalidParam,
          "instance " + std::to_string(i) + ": non-finite prediction (training diverged)");
  return c_hat;
}

Vector true_solution(const ProblemInstance& inst, const Oracle& oracle) {
  if (inst.true_solution) return *inst.true_solution;
  return oracle.solve(inst.true_cost).x;
}

double mean_of(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

struct RegretParts {
  Vector absolute;
  Vector relative;  // empty unless requested
};

RegretParts regrets(const Dataset& data, const Oracle& oracle, const std::vector<Vector>& predictions,
                    bool relative) {
  require(predictions.size() == data.size(), ErrorCode::kDimMismatch, "regret: one prediction per instance");
  const double sign = sense_sign(oracle.sense());
  RegretParts out;
  out.absolute.resize(data.size());
  if (relative) out.relative.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ProblemInstance& inst = data.instances[i];
    require(!inst.true_cost.empty(), ErrorCode::kMissingTargets,
            "regret: instance " + std::to_string(i) + " has no cost vector");
    const Vector x_star = true_solution(inst, oracle);
    const Vector x_hat = oracle.solve(predictions[i]).x;
    const double best = dot(inst.true_cost, x_star);
    out.absolute[i] = sign * (dot(inst.true_cost, x_hat) - best);
    if (relative) {
      require(best != 0.0, ErrorCode::kZeroDenominator,
              "relative regret: instance " + std::to_string(i) + " has zero optimal objective");
      out.relative[i] = out.absolute[i] / std::abs(best);
    }
  }
  return out;
}

std::vector<Vector> predict_all(const Dataset& data, const PredictorModel& model) {
  std::vector<Vector> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(predict(model, data.instances[i], i));
  return out;
}

// Cartesian product index -> one value per axis, last axis fastest.
std::vector<std::pair<std::string, double>> cell_params(const std::vector<GridAxis>& axes, std::size_t index) {
  std::vector<std::pair<std::string, double>> out(axes.size());
  for (std::size_t a = axes.size(); a-- > 0;) {
    const std::size_t n = axes[a].values.size();
    out[a] = {axes[a].name, axes[a].values[index % n]};
    index /= n;
  }
  return out;
}

}  // namespace

AdamState AdamState::init(const std::vector<Matrix>& params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const Matrix& p : params) {
    s.m.emplace_back(p.rows(), p.cols(), 0.0);
    s.v.emplace_back(p.rows(), p.cols(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, std::vector<Matrix>& params, const GradientBundle& grads) {
  require(params.size() == grads.grads.size() && params.size() == state.m.size(), ErrorCode::kDimMismatch,
          "adam: parameter count mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Vector& p = params[k].values();
    const Vector& g = grads.grads[k].values();
    Vector& m = state.m[k].values();
    Vector& v = state.v[k].values();
    require(p.size() == g.size() && p.size() == m.size(), ErrorCode::kDimMismatch, "adam: shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      p[i] -= state.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
    }
  }
}

PlateauScheduler::PlateauScheduler(double factor, int patience, double floor)
    : factor_(factor), patience_(patience), floor_(floor), best_(std::numeric_limits<double>::infinity()) {
  require(factor > 0.0 && factor < 1.0, ErrorCode::kInvalidParam, "scheduler: factor must lie in (0, 1)");
  require(patience >= 0, ErrorCode::kInvalidParam, "scheduler: patience must be >= 0");
}

double PlateauScheduler::step(double metric, double lr) {
  if (metric < best_) {
    best_ = metric;
    bad_epochs_ = 0;
    return lr;
  }
  if (++bad_epochs_ > patience_) {
    bad_epochs_ = 0;
    return std::max(floor_, std::min(lr, lr * factor_));
  }
  return lr;
}

std::string to_string(Metric m) {
  switch (m) {
    case Metric::kRelativeRegret: return "relative_regret";
    case Metric::kAbsoluteRegret: return "absolute_regret";
    case Metric::kMismatch: return "mismatch";
  }
  return "unknown";
}

void TrainConfig::validate() const {
  require(epochs >= 0, ErrorCode::kInvalidParam, "epochs must be >= 0");
  require(batch_size >= 1, ErrorCode::kInvalidParam, "batch_size must be >= 1");
  require(lr >= 0.0, ErrorCode::kInvalidParam, "lr must be >= 0");
  strategy.validate();
}

const EpochRow* RegretReport::find(int epoch, Split split) const {
  for (const EpochRow& r : rows)
    if (r.epoch == epoch && r.split == split) return &r;
  return nullptr;
}

const EpochRow* RegretReport::final_row(Split split) const { return find(epochs_run, split); }

double metric_value(const EvalMetrics& m, Metric which) {
  switch (which) {
    case Metric::kRelativeRegret: return m.relative_regret;
    case Metric::kAbsoluteRegret: return m.absolute_regret;
    case Metric::kMismatch: return m.mismatch;
  }
  return kNaN;
}

RegretMetrics evaluate_regret(const Dataset& data, const Oracle& oracle, const std::vector<Vector>& predictions,
                              bool relative) {
  require(!data.instances.empty(), ErrorCode::kEmptyInput, "regret: empty dataset");
  RegretParts parts = regrets(data, oracle, predictions, relative);
  RegretMetrics out;
  out.per_instance = relative ? std::move(parts.relative) : std::move(parts.absolute);
  out.mean = mean_of(out.per_instance);
  return out;
}

RegretMetrics evaluate_regret(const Dataset& data, const Oracle& oracle, const PredictorModel& model,
                              bool relative) {
  return evaluate_regret(data, oracle, predict_all(data, model), relative);
}

MismatchMetrics evaluate_mismatch(const Dataset& data, const Oracle& oracle, const PredictorModel& model) {
  require(!data.instances.empty(), ErrorCode::kEmptyInput, "mismatch: empty dataset");
  MismatchMetrics out;
  out.per_instance.resize(data.size());
  double task = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ProblemInstance& inst = data.instances[i];
    require(inst.true_solution.has_value(), ErrorCode::kMissingTargets,
            "mismatch: instance " + std::to_string(i) + " has no target solution");
    const Vector& x = *inst.true_solution;
    const Vector x_hat = oracle.solve(predict(model, inst, i)).x;
    double selected = 0.0, missed = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      selected += x[j];
      missed += x[j] * (1.0 - x_hat[j]);
    }
    out.per_instance[i] = selected > 0.0 ? missed / selected : 0.0;
    task -= dot(x, x_hat);
  }
  out.mean = mean_of(out.per_instance);
  out.task_loss = task / static_cast<double>(data.size());
  return out;
}

EvalMetrics evaluate(const Dataset& data, const Oracle& oracle, const PredictorModel& model, Metric monitor) {
  require(!data.instances.empty(), ErrorCode::kEmptyInput, "evaluate: empty dataset");
  EvalMetrics out;
  out.relative_regret = out.absolute_regret = out.mse = out.mismatch = out.task_loss = kNaN;
  if (monitor == Metric::kMismatch || !has_costs(data)) {
    MismatchMetrics mm = evaluate_mismatch(data, oracle, model);
    out.mismatch = mm.mean;
    out.task_loss = mm.task_loss;
    out.per_instance = std::move(mm.per_instance);
    return out;
  }
  const std::vector<Vector> predictions = predict_all(data, model);
  const bool relative = monitor == Metric::kRelativeRegret;
  RegretParts parts = regrets(data, oracle, predictions, relative);
  out.absolute_regret = mean_of(parts.absolute);
  if (relative) out.relative_regret = mean_of(parts.relative);
  double mse = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) mse += mse_loss(predictions[i], data.instances[i].true_cost).loss;
  out.mse = mse / static_cast<double>(data.size());
  out.per_instance = relative ? std::move(parts.relative) : std::move(parts.absolute);
  return out;
}

RegretReport train(const TrainData& data, const Oracle& oracle, PredictorModel& model, const TrainConfig& config) {
  config.validate();
  require(data.train != nullptr && !data.train->instances.empty(), ErrorCode::kEmptyInput,
          "train: empty training set");
  for (std::size_t i = 0; i < data.train->size(); ++i)
    require(data.train->instances[i].true_solution.has_value(), ErrorCode::kMissingTargets,
            "train: instance " + std::to_string(i) + " has no true solution");

  Strategy strategy(config.strategy, oracle, config.task);
  if (uses_cache(config.strategy.method)) {
    std::vector<Vector> sols;
    for (const ProblemInstance& inst : data.train->instances) sols.push_back(*inst.true_solution);
    strategy.init_cache(sols);
  }
  RngStream rng(config.seed, kTrainStream);
  AdamState adam = AdamState::init(model.params(), config.lr);
  PlateauScheduler scheduler;

  RegretReport report;
  const Dataset* monitor_set = data.validation != nullptr ? data.validation : data.train;
  auto record = [&](int epoch, std::size_t calls, double ms) {
    double monitored = kNaN;
    auto add = [&](const Dataset* d, Split split) {
      EpochRow row;
      row.epoch = epoch;
      row.split = split;
      row.metrics = evaluate(*d, oracle, model, config.monitor);
      row.solver_calls = split == Split::kTrain ? calls : 0;
      row.epoch_time_ms = ms;
      row.lr = adam.lr;
      if (d == monitor_set) monitored = metric_value(row.metrics, config.monitor);
      report.rows.push_back(std::move(row));
    };
    if (config.eval_train || monitor_set == data.train) add(data.train, Split::kTrain);
    if (data.validation != nullptr) add(data.validation, Split::kValidation);
    if (config.eval_test && data.test != nullptr) add(data.test, Split::kTest);
    return monitored;
  };

  double best = record(0, 0, 0.0);
  report.best_validation = report.final_validation = best;
  std::vector<Matrix> best_params = model.params();
  int bad_epochs = 0;
  const std::size_t n = data.train->size();
  std::vector<std::size_t> order(n);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t calls0 = strategy.solver_calls();
    GradientBundle acc;
    int in_batch = 0;
    auto flush = [&] {
      acc.scale(1.0 / in_batch);
      adam_step(adam, model.params(), acc);
      acc = GradientBundle{};
      in_batch = 0;
    };
    for (std::size_t idx : order) {
      const ProblemInstance& inst = data.train->instances[idx];
      try {
        const Vector c_hat = predict(model, inst, idx);
        const LossEval r = strategy.step(c_hat, inst.true_cost, *inst.true_solution, rng);
        acc.add(model.backward(inst.features, r.grad_c));
      } catch (const Error& e) {
        fail(e.code(), "training instance " + std::to_string(idx) + ": " + e.what());
      }
      if (++in_batch == config.batch_size) flush();
    }
    if (in_batch > 0) flush();
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const std::size_t calls = strategy.solver_calls() - calls0;

    const double monitored = record(epoch, calls, ms);
    report.epochs_run = epoch;
    report.final_validation = monitored;
    if (monitored < best || (std::isnan(best) && !std::isnan(monitored))) {
      best = monitored;
      report.best_epoch = epoch;
      best_params = model.params();
      bad_epochs = 0;
    } else {
      ++bad_epochs;
    }
    report.best_validation = best;
    if (config.use_scheduler) adam.lr = scheduler.step(monitored, adam.lr);
    if (config.patience > 0 && bad_epochs >= config.patience) break;
  }
  report.solver_calls = strategy.solver_calls();
  if (!std::isnan(best)) model.params() = std::move(best_params);
  return report;
}

const std::vector<double>& table_a1_values(const std::string& name) {
  static const std::map<std::string, std::vector<double>> table = {
      {"lr", {5e-4, 1e-3, 5e-3, 0.01, 0.05, 0.1, 0.5, 1.0}},
      {"delta", {0.1, 1.0, 10.0, 100.0}},
      {"epsilon", {0.05, 0.1, 0.5, 1.0, 2.0, 5.0}},
      {"kappa", {5.0, 10.0, 50.0}},
      {"tau", {0.05, 0.1, 0.5, 1.0, 2.0, 5.0}},
      {"theta", {0.01, 0.05, 0.1, 1.0, 10.0, 50.0}},
      {"mu", {0.01, 0.1, 1.0, 10.0}},
  };
  const auto it = table.find(name);
  require(it != table.end(), ErrorCode::kConfigError, "no tuning range for '" + name + "'");
  return it->second;
}

std::vector<GridAxis> table_a1_grid(Method method) {
  std::vector<GridAxis> axes{{"lr", table_a1_values("lr")}};
  for (const std::string& name : method_hyperparams(method)) {
    if (name == "p_solve" || name == "mc_samples") continue;
    axes.push_back({name, table_a1_values(name)});
  }
  return axes;
}

void set_hyperparam(TrainConfig& config, const std::string& name, double value) {
  StrategyConfig& s = config.strategy;
  if (name == "lr") config.lr = value;
  else if (name == "delta") s.delta = value;
  else if (name == "epsilon") s.epsilon = value;
  else if (name == "kappa") s.kappa = static_cast<int>(std::lround(value));
  else if (name == "tau") s.tau = value;
  else if (name == "theta") s.theta = value;
  else if (name == "mu") s.mu = value;
  else if (name == "mc_samples") s.mc_samples = static_cast<int>(std::lround(value));
  else if (name == "p_solve") s.p_solve = value;
  else fail(ErrorCode::kConfigError, "unknown hyperparameter '" + name + "'");
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& f) {
  const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < w; ++t) {
    threads.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first) std::rethrow_exception(first);
}

GridResult grid_search(const TrainConfig& base, const std::vector<GridAxis>& axes,
                       const std::vector<std::uint64_t>& seeds, const GridRunner& run, int parallel) {
  require(!seeds.empty(), ErrorCode::kEmptyInput, "grid: no seeds");
  std::size_t n_cells = 1;
  for (const GridAxis& a : axes) {
    require(!a.values.empty(), ErrorCode::kEmptyInput, "grid: axis '" + a.name + "' has no values");
    n_cells *= a.values.size();
  }
  GridResult out;
  out.cells.resize(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c) {
    GridCell& cell = out.cells[c];
    cell.index = c;
    cell.params = cell_params(axes, c);
    cell.seeds = seeds;
    cell.reports.resize(seeds.size());
  }
  std::vector<std::string> errors(n_cells * seeds.size());
  parallel_for(n_cells * seeds.size(), parallel, [&](std::size_t task) {
    const std::size_t c = task / seeds.size(), s = task % seeds.size();
    TrainConfig cfg = base;
    for (const auto& [name, value] : out.cells[c].params) set_hyperparam(cfg, name, value);
    cfg.seed = seeds[s];
    try {
      out.cells[c].reports[s] = run(cfg);
    } catch (const std::exception& e) {
      errors[task] = e.what();
    }
  });

  bool found = false;
  double best = 0.0;
  for (std::size_t c = 0; c < n_cells; ++c) {
    GridCell& cell = out.cells[c];
    double sum = 0.0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const std::string& err = errors[c * seeds.size() + s];
      if (!err.empty() && !cell.failed) {
        cell.failed = true;
        cell.error = "seed " + std::to_string(seeds[s]) + ": " + err;
      }
      sum += cell.reports[s].best_validation;
    }
    cell.mean_validation = cell.failed ? kNaN : sum / static_cast<double>(seeds.size());
    if (cell.failed || !std::isfinite(cell.mean_validation)) continue;
    if (!found || cell.mean_validation < best) {
      found = true;
      best = cell.mean_validation;
      out.best_cell = c;
    }
  }
  require(found, ErrorCode::kEmptyInput,
          "grid: every cell failed" + (out.cells.empty() ? std::string() : " (first: " + out.cells[0].error + ")"));
  out.best_config = base;
  for (const auto& [name, value] : out.cells[out.best_cell].params) set_hyperparam(out.best_config, name, value);
  return out;
}

}  // namespace dflbench
