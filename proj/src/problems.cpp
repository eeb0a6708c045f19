#include "dflbench/problems.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "dflbench/solvers.hpp"

namespace dflbench {

const char* const kEnergyCsvHeader =
    "timestamp,calendar_dow,calendar_how,forecast_wind,forecast_load,forecast_price,actual_windspeed,"
    "actual_temp,co2_intensity,price";

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  if (s == "test") return Split::kTest;
  fail(ErrorCode::kInvalidParam, "unknown split '" + s + "'");
}

namespace {

Matrix bernoulli_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return m;
}

Matrix row_matrix(const Vector& v) { return Matrix(1, v.size(), v); }

}  // namespace

// ---------------------------------------------------------------------------
// Shortest path

SyntheticGroundTruth make_shortest_path_truth(const GridSpec& grid, std::size_t p, int deg, double noise,
                                              RngStream& rng) {
  require(grid.grid_side >= 2, ErrorCode::kInvalidParam, "grid side must be at least 2");
  require(p >= 1, ErrorCode::kInvalidParam, "feature dimension must be positive");
  require(deg >= 1, ErrorCode::kInvalidParam, "deg must be positive");
  require(noise >= 0.0 && noise < 1.0, ErrorCode::kInvalidParam, "noise half-width must lie in [0, 1)");
  SyntheticGroundTruth t;
  t.b = bernoulli_matrix(grid.edge_count(), p, rng);
  t.deg = deg;
  t.noise = noise;
  t.p = p;
  return t;
}

Vector shortest_path_cost(const SyntheticGroundTruth& truth, std::span<const double> z,
                          std::span<const double> xi) {
  require(z.size() == truth.p && xi.size() == truth.b.rows(), ErrorCode::kDimMismatch,
          "shortest path cost inputs do not match the ground truth");
  const Vector bz = matvec(truth.b, z);
  const double scale = 1.0 / std::sqrt(static_cast<double>(truth.p));
  Vector c(bz.size());
  for (std::size_t j = 0; j < c.size(); ++j) c[j] = (std::pow(bz[j] * scale + 3.0, truth.deg) + 1.0) * xi[j];
  return c;
}

Dataset sample_shortest_path(const SyntheticGroundTruth& truth, std::size_t n_samples, RngStream& rng,
                             Split split) {
  Dataset d;
  d.split = split;
  d.instances.reserve(n_samples);
  const std::size_t m = truth.b.rows();
  for (std::size_t i = 0; i < n_samples; ++i) {
    Vector z = sample_normal(rng, truth.p);
    Vector xi(m);
    for (double& v : xi) v = rng.uniform(1.0 - truth.noise, 1.0 + truth.noise);
    ProblemInstance inst;
    inst.true_cost = shortest_path_cost(truth, z, xi);
    inst.features = row_matrix(z);
    d.instances.push_back(std::move(inst));
  }
  return d;
}

std::pair<Dataset, SyntheticGroundTruth> gen_shortest_path_data(std::size_t n_samples, std::size_t p, int deg,
                                                                double noise, RngStream& rng,
                                                                const GridSpec& grid) {
  SyntheticGroundTruth truth = make_shortest_path_truth(grid, p, deg, noise, rng);
  Dataset d = sample_shortest_path(truth, n_samples, rng);
  return {std::move(d), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Portfolio

PortfolioTruth make_portfolio_truth(std::size_t d, std::size_t p, int deg, double noise, RngStream& rng) {
  require(d >= 2, ErrorCode::kInvalidParam, "portfolio needs at least 2 assets");
  require(p >= 1 && deg >= 1, ErrorCode::kInvalidParam, "feature dimension and deg must be positive");
  require(noise >= 0.0, ErrorCode::kInvalidParam, "noise magnitude must be non-negative");
  PortfolioTruth out;
  out.truth.b = bernoulli_matrix(d, p, rng);
  out.truth.deg = deg;
  out.truth.noise = noise;
  out.truth.p = p;
  Matrix l(d, 4);
  const double half = 0.0025 * noise;
  for (double& v : l.values()) v = noise > 0.0 ? rng.uniform(-half, half) : 0.0;
  out.truth.factor_loading = l;

  Matrix sigma = matmul(l, l.transpose());
  const double diag = (0.01 * noise) * (0.01 * noise);
  for (std::size_t i = 0; i < d; ++i) sigma(i, i) += diag;
  const Vector e(d, 1.0 / static_cast<double>(d));
  out.spec.sigma = sigma;
  out.spec.gamma = 2.25 * dot(e, matvec(sigma, e));
  out.spec.degenerate = noise == 0.0;
  return out;
}

Vector portfolio_conditional_mean(const SyntheticGroundTruth& truth, std::span<const double> z) {
  require(z.size() == truth.p, ErrorCode::kDimMismatch, "portfolio feature dimension mismatch");
  const Vector bz = matvec(truth.b, z);
  const double scale = 0.05 / std::sqrt(static_cast<double>(truth.p));
  const double offset = std::pow(0.1, 1.0 / truth.deg);
  Vector c(bz.size());
  for (std::size_t j = 0; j < c.size(); ++j) c[j] = std::pow(scale * bz[j] + offset, truth.deg);
  return c;
}

Dataset sample_portfolio(const PortfolioTruth& truth, std::size_t n_samples, RngStream& rng, Split split) {
  Dataset data;
  data.split = split;
  const std::size_t d = truth.spec.assets();
  for (std::size_t i = 0; i < n_samples; ++i) {
    Vector z = sample_normal(rng, truth.truth.p);
    const Vector f = sample_normal(rng, 4);
    const Vector xi = sample_normal(rng, d);
    Vector c = portfolio_conditional_mean(truth.truth, z);
    const Vector lf = matvec(truth.truth.factor_loading, f);
    for (std::size_t j = 0; j < d; ++j) c[j] += lf[j] + 0.01 * truth.truth.noise * xi[j];
    ProblemInstance inst;
    inst.features = row_matrix(z);
    inst.true_cost = std::move(c);
    data.instances.push_back(std::move(inst));
  }
  return data;
}

std::pair<Dataset, PortfolioSpec> gen_portfolio_data(std::size_t n_samples, std::size_t d, std::size_t p, int deg,
                                                     double noise, RngStream& rng) {
  PortfolioTruth truth = make_portfolio_truth(d, p, deg, noise, rng);
  Dataset data = sample_portfolio(truth, n_samples, rng);
  return {std::move(data), std::move(truth.spec)};
}

// ---------------------------------------------------------------------------
// Energy price data

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

std::string trim_cr(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

struct EnergyRow {
  std::array<double, kEnergyFeatures> features;
  double price;
};

// One synthetic day of half-hourly rows. Price responds nonlinearly to load and wind so
// that a linear forecaster is misspecified.
std::vector<EnergyRow> synthetic_day(int dow, RngStream& rng) {
  std::vector<EnergyRow> rows(kSlotsPerDay);
  const double wind_base = rng.uniform(1.0, 14.0);
  const double temp_base = rng.uniform(2.0, 14.0);
  const double load_level = rng.normal() * 150.0;
  double wind = wind_base;
  for (int t = 0; t < kSlotsPerDay; ++t) {
    const double phase = 2.0 * std::numbers::pi * (t - 8) / kSlotsPerDay;
    const double evening = std::exp(-std::pow((t - 36) / 4.0, 2));
    const double shape = 0.5 - 0.5 * std::cos(phase) + 0.6 * evening;
    const double load = 3200.0 + 1100.0 * shape + (dow >= 5 ? -350.0 : 0.0) + load_level + 60.0 * rng.normal();
    wind = std::max(0.0, wind + 0.6 * rng.normal() + 0.1 * (wind_base - wind));
    const double temp = temp_base + 3.0 * std::sin(phase) + 0.5 * rng.normal();
    const double forecast_wind = std::max(0.0, 80.0 * wind + 60.0 * rng.normal());
    const double forecast_load = load + 80.0 * rng.normal();
    const double forecast_price = 28.0 + 0.012 * (forecast_load - 3200.0) - 0.9 * wind + 2.5 * rng.normal();
    const double co2 = 480.0 - 9.0 * wind + 0.02 * (load - 3200.0) + 12.0 * rng.normal();
    const double excess = std::max(0.0, load - 80.0 * wind - 3600.0);
    const double price = 30.0 + 0.01 * (load - 3200.0) - 1.1 * wind + 4e-5 * excess * excess + 4.0 * rng.normal();
    rows[t].features = {static_cast<double>(dow), static_cast<double>(dow * 24 + t / 2),
                        forecast_wind, forecast_load, forecast_price, wind, temp, co2};
    rows[t].price = price;
  }
  return rows;
}

ProblemInstance day_instance(const std::vector<EnergyRow>& rows) {
  ProblemInstance inst;
  inst.features = Matrix(kSlotsPerDay, kEnergyFeatures);
  inst.true_cost.resize(kSlotsPerDay);
  for (int t = 0; t < kSlotsPerDay; ++t) {
    std::copy(rows[t].features.begin(), rows[t].features.end(), inst.features.row(t).begin());
    inst.true_cost[t] = rows[t].price;
  }
  return inst;
}

std::chrono::sys_days kSyntheticStart = std::chrono::sys_days{std::chrono::year{2011} / 11 / 1};

int monday_based_dow(std::chrono::sys_days day) {
  return static_cast<int>((std::chrono::weekday{day}.c_encoding() + 6) % 7);
}

}  // namespace

Dataset load_energy_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIngestError, "cannot open '" + path.string() + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kIngestError, "empty file '" + path.string() + "'");
  require(trim_cr(line) == kEnergyCsvHeader, ErrorCode::kIngestError, "unexpected header in '" + path.string() + "'");

  std::vector<std::pair<std::string, std::vector<EnergyRow>>> days;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == 2 + kEnergyFeatures, ErrorCode::kIngestError,
            "row " + std::to_string(row_no) + ": expected " + std::to_string(2 + kEnergyFeatures) + " fields");
    require(cells[0].size() >= 10, ErrorCode::kIngestError, "row " + std::to_string(row_no) + ": bad timestamp");
    EnergyRow r{};
    for (int k = 0; k < kEnergyFeatures; ++k) {
      require(parse_double(cells[1 + k], r.features[k]), ErrorCode::kIngestError,
              "row " + std::to_string(row_no) + ": cannot parse field " + std::to_string(k + 2));
    }
    require(parse_double(cells.back(), r.price), ErrorCode::kIngestError,
            "row " + std::to_string(row_no) + ": cannot parse price");
    const std::string date = cells[0].substr(0, 10);
    if (days.empty() || days.back().first != date) days.emplace_back(date, std::vector<EnergyRow>{});
    days.back().second.push_back(r);
  }
  Dataset data;
  for (const auto& [date, rows] : days) {
    require(rows.size() == kSlotsPerDay, ErrorCode::kPartialDay,
            "day " + date + " has " + std::to_string(rows.size()) + " rows");
    data.instances.push_back(day_instance(rows));
  }
  return data;
}

void write_synthetic_energy_csv(const std::filesystem::path& path, int n_days, RngStream& rng) {
  require(n_days >= 1, ErrorCode::kInvalidParam, "need at least one day");
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << kEnergyCsvHeader << '\n';
  char buf[64];
  for (int d = 0; d < n_days; ++d) {
    const auto day = kSyntheticStart + std::chrono::days{d};
    const std::chrono::year_month_day ymd{day};
    const auto rows = synthetic_day(monday_based_dow(day), rng);
    for (int t = 0; t < kSlotsPerDay; ++t) {
      std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:00", static_cast<int>(ymd.year()),
                    static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), t / 2, (t % 2) * 30);
      out << buf;
      for (double f : rows[t].features) {
        std::snprintf(buf, sizeof buf, ",%.17g", f);
        out << buf;
      }
      std::snprintf(buf, sizeof buf, ",%.17g\n", rows[t].price);
      out << buf;
    }
  }
  require(out.good(), ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

Dataset synthetic_energy_days(int n_days, RngStream& rng) {
  require(n_days >= 1, ErrorCode::kInvalidParam, "need at least one day");
  Dataset data;
  for (int d = 0; d < n_days; ++d) {
    const auto day = kSyntheticStart + std::chrono::days{d};
    data.instances.push_back(day_instance(synthetic_day(monday_based_dow(day), rng)));
  }
  return data;
}

void standardize_features(const Dataset& reference, std::vector<Dataset*> targets) {
  require(!reference.instances.empty(), ErrorCode::kEmptyInput, "reference dataset is empty");
  const std::size_t cols = reference.instances.front().features.cols();
  Vector mean(cols, 0.0), var(cols, 0.0);
  std::size_t count = 0;
  for (const auto& inst : reference.instances) {
    require(inst.features.cols() == cols, ErrorCode::kDimMismatch, "inconsistent feature widths");
    for (std::size_t r = 0; r < inst.features.rows(); ++r) {
      for (std::size_t j = 0; j < cols; ++j) mean[j] += inst.features(r, j);
      ++count;
    }
  }
  for (double& m : mean) m /= static_cast<double>(count);
  for (const auto& inst : reference.instances) {
    for (std::size_t r = 0; r < inst.features.rows(); ++r) {
      for (std::size_t j = 0; j < cols; ++j) var[j] += std::pow(inst.features(r, j) - mean[j], 2);
    }
  }
  Vector scale(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(count));
    scale[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  for (Dataset* d : targets) {
    for (auto& inst : d->instances) {
      require(inst.features.cols() == cols, ErrorCode::kDimMismatch, "inconsistent feature widths");
      for (std::size_t r = 0; r < inst.features.rows(); ++r) {
        for (std::size_t j = 0; j < cols; ++j) inst.features(r, j) = (inst.features(r, j) - mean[j]) * scale[j];
      }
    }
  }
}

Dataset aggregate_slots(const Dataset& days, int slots) {
  require(slots >= 1, ErrorCode::kInvalidParam, "slot count must be positive");
  Dataset out;
  out.split = days.split;
  for (const auto& inst : days.instances) {
    const std::size_t n = inst.true_cost.size();
    require(n % static_cast<std::size_t>(slots) == 0, ErrorCode::kInvalidParam,
            "slot count must divide the day length");
    const std::size_t block = n / slots;
    ProblemInstance agg;
    agg.features = Matrix(slots, inst.features.cols());
    agg.true_cost.assign(slots, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t s = t / block;
      agg.true_cost[s] += inst.true_cost[t] / static_cast<double>(block);
      for (std::size_t j = 0; j < inst.features.cols(); ++j) {
        agg.features(s, j) += inst.features(t, j) / static_cast<double>(block);
      }
    }
    out.instances.push_back(std::move(agg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Knapsack

KnapsackSpec knapsack_spec_from_weights(std::span<const double> weights, double capacity) {
  KnapsackSpec spec;
  for (double w : weights) {
    require(w > 0.0 && w == std::floor(w), ErrorCode::kInvalidParam, "knapsack weights must be positive integers");
    spec.weights.push_back(static_cast<int>(w));
  }
  require(capacity >= 0.0 && capacity == std::floor(capacity), ErrorCode::kInvalidParam,
          "knapsack capacity must be a non-negative integer");
  spec.capacity = static_cast<int>(capacity);
  return spec;
}

KnapsackSpec sample_knapsack_weights(std::size_t n_items, int capacity, RngStream& rng) {
  require(n_items >= 1, ErrorCode::kInvalidParam, "knapsack needs at least one item");
  require(capacity > 0, ErrorCode::kInvalidParam, "capacity must be positive");
  static constexpr int kChoices[] = {3, 5, 7};
  const int target = 5 * static_cast<int>(n_items);
  KnapsackSpec spec;
  spec.capacity = capacity;
  do {
    spec.weights.clear();
    int sum = 0;
    for (std::size_t i = 0; i < n_items; ++i) {
      spec.weights.push_back(kChoices[rng.uniform_index(3)]);
      sum += spec.weights.back();
    }
    if (sum == target) break;
  } while (true);
  require(capacity <= target, ErrorCode::kInvalidParam, "capacity exceeds total weight");
  return spec;
}

Dataset knapsack_from_prices(const Dataset& price_days, const KnapsackSpec& spec, RngStream& rng) {
  Dataset out;
  out.split = price_days.split;
  for (std::size_t d = 0; d < price_days.size(); ++d) {
    const auto& day = price_days.instances[d];
    require(day.true_cost.size() == spec.weights.size(), ErrorCode::kIngestError,
            "price row " + std::to_string(d) + " has " + std::to_string(day.true_cost.size()) + " entries, expected " +
                std::to_string(spec.weights.size()));
    require(all_finite(day.true_cost), ErrorCode::kIngestError, "price row " + std::to_string(d) + " is not finite");
    ProblemInstance inst;
    inst.features = day.features;
    inst.true_cost.resize(spec.weights.size());
    for (std::size_t i = 0; i < spec.weights.size(); ++i) {
      inst.true_cost[i] = std::max(0.0, day.true_cost[i] * spec.weights[i] + 5.0 * rng.normal());
    }
    out.instances.push_back(std::move(inst));
  }
  return out;
}

std::pair<Dataset, KnapsackSpec> gen_knapsack_data(const Dataset& price_days, int capacity, RngStream& rng) {
  require(!price_days.instances.empty(), ErrorCode::kIngestError, "no price rows");
  KnapsackSpec spec = sample_knapsack_weights(price_days.instances.front().true_cost.size(), capacity, rng);
  Dataset data = knapsack_from_prices(price_days, spec, rng);
  return {std::move(data), std::move(spec)};
}

// ---------------------------------------------------------------------------
// Diverse bipartite matching

MatchingTruth make_matching_truth(int nodes_per_side, std::size_t feature_dim, double rho1, double rho2,
                                  RngStream& rng, int fields) {
  require(nodes_per_side >= 2, ErrorCode::kInvalidParam, "matching needs at least 2 nodes per side");
  require(feature_dim >= 1 && fields >= 1, ErrorCode::kInvalidParam, "feature dimension and field count must be positive");
  require(rho1 >= 0.0 && rho1 <= 1.0 && rho2 >= 0.0 && rho2 <= 1.0, ErrorCode::kInvalidParam,
          "diversity fractions must lie in [0, 1]");
  const auto n = static_cast<std::size_t>(nodes_per_side);
  MatchingTruth t;
  t.spec.nodes_per_side = nodes_per_side;
  t.spec.rho1 = rho1;
  t.spec.rho2 = rho2;
  std::vector<std::uint64_t> left(n), right(n);
  for (auto& f : left) f = rng.uniform_index(fields);
  for (auto& f : right) f = rng.uniform_index(fields);
  t.spec.same_field.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) t.spec.same_field[i * n + j] = left[i] == right[j] ? 1 : 0;
  }
  t.feature_dim = feature_dim;
  const double scale = 2.0 / std::sqrt(static_cast<double>(feature_dim));
  t.left_weights = scale * sample_normal(rng, feature_dim);
  t.right_weights = scale * sample_normal(rng, feature_dim);
  t.interaction = 4.0 * rng.normal();
  t.bias = -1.0;
  return t;
}

Dataset sample_matching(const MatchingTruth& truth, std::size_t n_samples, RngStream& rng, Split split) {
  const auto n = static_cast<std::size_t>(truth.spec.nodes_per_side);
  const std::size_t f = truth.feature_dim;
  Dataset data;
  data.split = split;
  for (std::size_t s = 0; s < n_samples; ++s) {
    Matrix left(n, f), right(n, f);
    for (double& v : left.values()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    for (double& v : right.values()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    ProblemInstance inst;
    inst.features = Matrix(n * n, 2 * f);
    inst.true_cost.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t e = i * n + j;
        auto row = inst.features.row(e);
        std::copy(left.row(i).begin(), left.row(i).end(), row.begin());
        std::copy(right.row(j).begin(), right.row(j).end(), row.begin() + static_cast<std::ptrdiff_t>(f));
        const double agree = dot(left.row(i), right.row(j)) / static_cast<double>(f);
        const double logit = dot(truth.left_weights, left.row(i)) + dot(truth.right_weights, right.row(j)) +
                             truth.interaction * (agree - 0.25) + truth.bias;
        inst.true_cost[e] = 1.0 / (1.0 + std::exp(-logit));
      }
    }
    data.instances.push_back(std::move(inst));
  }
  return data;
}

std::pair<Dataset, MatchingSpec> gen_matching_data(int nodes_per_side, std::size_t feature_dim, double rho1,
                                                   double rho2, std::size_t n_samples, RngStream& rng) {
  MatchingTruth truth = make_matching_truth(nodes_per_side, feature_dim, rho1, rho2, rng);
  const Solution probe = branch_and_bound(
      build_matching_milp(truth.spec, Vector(static_cast<std::size_t>(nodes_per_side) * nodes_per_side, 1.0)));
  require(probe.status == SolveStatus::kOptimal && probe.objective > 0.5, ErrorCode::kInfeasibleDiversity,
          "no non-empty matching satisfies the diversity fractions");
  Dataset data = sample_matching(truth, n_samples, rng);
  return {std::move(data), std::move(truth.spec)};
}

// ---------------------------------------------------------------------------
// Top-k subset selection

Dataset sample_topk(const TopKSpec& spec, std::size_t n_samples, RngStream& rng, Split split) {
  require(spec.n >= 1 && spec.k >= 1 && spec.k <= spec.n, ErrorCode::kInvalidParam, "need 1 <= k <= n");
  Dataset data;
  data.split = split;
  for (std::size_t s = 0; s < n_samples; ++s) {
    Vector z(spec.n);
    for (double& v : z) v = rng.uniform();
    ProblemInstance inst;
    inst.true_solution = solve_topk(spec, z).x;
    inst.features = row_matrix(z);
    data.instances.push_back(std::move(inst));
  }
  return data;
}

std::pair<Dataset, TopKSpec> gen_topk_data(int n, int k, std::size_t n_samples, RngStream& rng) {
  const TopKSpec spec{n, k};
  return {sample_topk(spec, n_samples, rng), spec};
}

// ---------------------------------------------------------------------------
// Energy-aware scheduling

bool scheduling_windows_valid(const SchedulingSpec& spec) {
  return std::all_of(spec.tasks.begin(), spec.tasks.end(), [&](const SchedulingTask& t) {
    return t.duration >= 1 && t.earliest_start >= 0 && t.earliest_start + t.duration <= t.latest_end &&
           t.latest_end <= spec.slots && t.usage.size() == spec.resources();
  });
}

SchedulingSpec gen_scheduling_instance(int machines, int tasks, int slots, RngStream& rng, int resources) {
  require(machines >= 1 && tasks >= 1 && slots >= 2 && resources >= 1, ErrorCode::kInvalidParam,
          "scheduling sizes must be positive");
  const int max_duration = std::max(1, slots / 4);
  for (int attempt = 0; attempt < 100; ++attempt) {
    SchedulingSpec spec;
    spec.machines = machines;
    spec.slots = slots;
    spec.capacity = Matrix(machines, resources);
    for (double& q : spec.capacity.values()) q = static_cast<double>(4 + rng.uniform_index(5));
    for (int j = 0; j < tasks; ++j) {
      SchedulingTask t;
      t.duration = 1 + static_cast<int>(rng.uniform_index(max_duration));
      const int slack = slots - t.duration;
      t.earliest_start = static_cast<int>(rng.uniform_index(slack / 2 + 1));
      const int min_end = t.earliest_start + t.duration;
      t.latest_end = min_end + static_cast<int>(rng.uniform_index(slots - min_end + 1));
      t.power = rng.uniform(0.5, 2.0);
      t.usage.resize(resources);
      for (double& u : t.usage) u = static_cast<double>(1 + rng.uniform_index(4));
      spec.tasks.push_back(std::move(t));
    }
    if (!scheduling_windows_valid(spec)) continue;
    BranchAndBoundOptions opts;
    opts.node_limit = 100'000;
    try {
      const Solution s = branch_and_bound(build_scheduling_milp(spec, Vector(slots, 0.0)), opts);
      if (s.status == SolveStatus::kOptimal) return spec;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNodeBudgetExceeded) throw;
    }
  }
  fail(ErrorCode::kInfeasibleInstance, "no feasible scheduling instance after 100 attempts");
}

// ---------------------------------------------------------------------------
// Dataset archive

void write_dataset_archive(const std::filesystem::path& dir, const std::string& meta_json,
                           const std::vector<const Dataset*>& splits) {
  require(!splits.empty() && !splits.front()->instances.empty(), ErrorCode::kEmptyInput, "nothing to archive");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::kIoError, "cannot create '" + dir.string() + "'");
  {
    std::ofstream meta(dir / "meta.json");
    require(meta.good(), ErrorCode::kIoError, "cannot write meta.json");
    meta << meta_json << '\n';
  }
  const ProblemInstance& first = splits.front()->instances.front();
  const std::size_t zr = first.features.rows(), zc = first.features.cols();
  const std::size_t nc = first.true_cost.size();
  const std::size_t nx = first.true_solution ? first.true_solution->size() : 0;
  std::ofstream out(dir / "data.csv");
  require(out.good(), ErrorCode::kIoError, "cannot write data.csv");
  out << "split";
  for (std::size_t r = 0; r < zr; ++r)
    for (std::size_t c = 0; c < zc; ++c) out << ",z_" << r << '_' << c;
  for (std::size_t j = 0; j < nc; ++j) out << ",c_" << j;
  for (std::size_t j = 0; j < nx; ++j) out << ",x_" << j;
  out << '\n';
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out << buf;
  };
  for (const Dataset* d : splits) {
    for (const auto& inst : d->instances) {
      require(inst.features.rows() == zr && inst.features.cols() == zc && inst.true_cost.size() == nc &&
                  (inst.true_solution ? inst.true_solution->size() : 0) == nx,
              ErrorCode::kDimMismatch, "datasets in an archive must have homogeneous dimensions");
      out << to_string(d->split);
      for (double v : inst.features.values()) put(v);
      for (double v : inst.true_cost) put(v);
      if (inst.true_solution)
        for (double v : *inst.true_solution) put(v);
      out << '\n';
    }
  }
  require(out.good(), ErrorCode::kIoError, "write failed for data.csv");
}

std::vector<Dataset> read_dataset_archive(const std::filesystem::path& dir, std::string* meta_json) {
  if (meta_json) {
    std::ifstream meta(dir / "meta.json");
    require(meta.good(), ErrorCode::kIngestError, "missing meta.json in '" + dir.string() + "'");
    std::stringstream ss;
    ss << meta.rdbuf();
    *meta_json = trim_cr(ss.str());
    while (!meta_json->empty() && meta_json->back() == '\n') meta_json->pop_back();
  }
  std::ifstream in(dir / "data.csv");
  require(in.good(), ErrorCode::kIngestError, "missing data.csv in '" + dir.string() + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kIngestError, "empty data.csv");
  const auto header = split_csv_line(trim_cr(line));
  require(!header.empty() && header[0] == "split", ErrorCode::kIngestError, "data.csv header must start with split");
  std::size_t zr = 0, zc = 0, nc = 0, nx = 0;
  for (std::size_t i = 1; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (h.rfind("z_", 0) == 0) {
      const auto us = h.find('_', 2);
      require(us != std::string::npos, ErrorCode::kIngestError, "bad column '" + h + "'");
      zr = std::max<std::size_t>(zr, std::stoul(h.substr(2, us - 2)) + 1);
      zc = std::max<std::size_t>(zc, std::stoul(h.substr(us + 1)) + 1);
    } else if (h.rfind("c_", 0) == 0) {
      ++nc;
    } else if (h.rfind("x_", 0) == 0) {
      ++nx;
    } else {
      fail(ErrorCode::kIngestError, "unknown column '" + h + "'");
    }
  }
  require(zr * zc + nc + nx + 1 == header.size(), ErrorCode::kIngestError, "inconsistent data.csv header");

  std::map<Split, Dataset> by_split;
  std::vector<Split> order;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == header.size(), ErrorCode::kIngestError, "row " + std::to_string(row_no) + ": wrong field count");
    const Split split = split_from_string(cells[0]);
    Vector vals(cells.size() - 1);
    for (std::size_t i = 1; i < cells.size(); ++i) {
      require(parse_double(cells[i], vals[i - 1]), ErrorCode::kIngestError,
              "row " + std::to_string(row_no) + ": cannot parse field " + std::to_string(i + 1));
    }
    ProblemInstance inst;
    inst.features = Matrix(zr, zc, Vector(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(zr * zc)));
    inst.true_cost.assign(vals.begin() + static_cast<std::ptrdiff_t>(zr * zc),
                          vals.begin() + static_cast<std::ptrdiff_t>(zr * zc + nc));
    if (nx > 0) inst.true_solution = Vector(vals.end() - static_cast<std::ptrdiff_t>(nx), vals.end());
    if (!by_split.contains(split)) {
      order.push_back(split);
      by_split[split].split = split;
    }
    by_split[split].instances.push_back(std::move(inst));
  }
  std::vector<Dataset> out;
  for (Split s : order) out.push_back(std::move(by_split[s]));
  return out;
}

}  // namespace dflbench
