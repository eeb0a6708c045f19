#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dflbench/numerics.hpp"
#include "dflbench/rng.hpp"

namespace dflbench {

// One (z, c, x*(c)) triple. Vector-valued features are stored as a single row.
// Subset-selection instances carry no cost vector, only the target selection.
struct ProblemInstance {
  Matrix features;
  Vector true_cost;
  std::optional<Vector> true_solution;
};

enum class Split { kTrain, kValidation, kTest };
std::string to_string(Split split);
Split split_from_string(const std::string& s);

struct Dataset {
  std::vector<ProblemInstance> instances;
  Split split = Split::kTrain;

  std::size_t size() const noexcept { return instances.size(); }
};

// k x k grid, edges run north or east only.
struct GridSpec {
  int grid_side = 5;
  std::size_t edge_count() const {
    return 2 * static_cast<std::size_t>(grid_side) * static_cast<std::size_t>(grid_side - 1);
  }
};

struct KnapsackSpec {
  std::vector<int> weights;
  int capacity = 0;
};

struct PortfolioSpec {
  Matrix sigma;
  double gamma = 0.0;
  bool degenerate = false;  // zero noise: risk constraint is vacuous
  std::size_t assets() const noexcept { return sigma.rows(); }
};

struct SchedulingTask {
  int duration = 1;
  int earliest_start = 0;
  int latest_end = 1;  // exclusive slot bound: start + duration <= latest_end
  double power = 1.0;
  std::vector<double> usage;  // per resource
};

struct SchedulingSpec {
  int machines = 1;
  int slots = 1;
  std::vector<SchedulingTask> tasks;
  Matrix capacity;  // machines x resources

  std::size_t resources() const noexcept { return capacity.cols(); }
};

struct MatchingSpec {
  int nodes_per_side = 2;
  std::vector<std::uint8_t> same_field;  // row-major n x n indicator
  double rho1 = 0.0;
  double rho2 = 0.0;
};

struct TopKSpec {
  int n = 1;
  int k = 1;
};

// Ground-truth model behind the linear-feature synthetic generators.
struct SyntheticGroundTruth {
  Matrix b;
  int deg = 1;
  double noise = 0.0;
  std::size_t p = 1;
  Matrix factor_loading;  // portfolio only (d x 4)
};

// Shortest path

SyntheticGroundTruth make_shortest_path_truth(const GridSpec& grid, std::size_t p, int deg,
                                              double noise, RngStream& rng);
Dataset sample_shortest_path(const SyntheticGroundTruth& truth, std::size_t n_samples,
                             RngStream& rng, Split split = Split::kTrain);
// c_ij = [((B z_i)_j / sqrt(p) + 3)^deg + 1] * xi_ij
Vector shortest_path_cost(const SyntheticGroundTruth& truth, std::span<const double> z,
                          std::span<const double> xi);
std::pair<Dataset, SyntheticGroundTruth> gen_shortest_path_data(std::size_t n_samples, std::size_t p,
                                                                int deg, double noise, RngStream& rng,
                                                                const GridSpec& grid = {});

// Portfolio

struct PortfolioTruth {
  SyntheticGroundTruth truth;
  PortfolioSpec spec;
};

PortfolioTruth make_portfolio_truth(std::size_t d, std::size_t p, int deg, double noise, RngStream& rng);
Dataset sample_portfolio(const PortfolioTruth& truth, std::size_t n_samples, RngStream& rng,
                         Split split = Split::kTrain);
// (0.05/sqrt(p) (B z)_j + 0.1^(1/deg))^deg
Vector portfolio_conditional_mean(const SyntheticGroundTruth& truth, std::span<const double> z);
std::pair<Dataset, PortfolioSpec> gen_portfolio_data(std::size_t n_samples, std::size_t d, std::size_t p,
                                                     int deg, double noise, RngStream& rng);

// Energy price data

inline constexpr int kSlotsPerDay = 48;
inline constexpr int kEnergyFeatures = 8;
extern const char* const kEnergyCsvHeader;

// Each instance: features 48x8, true_cost = 48 half-hourly prices.
Dataset load_energy_csv(const std::filesystem::path& path);
// Synthetic stand-in with the same schema; `n_days` consecutive days from 2011-11-01.
void write_synthetic_energy_csv(const std::filesystem::path& path, int n_days, RngStream& rng);
Dataset synthetic_energy_days(int n_days, RngStream& rng);

// Column-wise z-scoring using statistics of `reference` (applied to every dataset given).
void standardize_features(const Dataset& reference, std::vector<Dataset*> targets);

// Average consecutive blocks of slots (48 -> slots); slots must divide the day length.
Dataset aggregate_slots(const Dataset& days, int slots);

// Knapsack

// Validates real-valued weights (kInvalidParam unless integral and positive).
KnapsackSpec knapsack_spec_from_weights(std::span<const double> weights, double capacity);

// Weights drawn from {3,5,7} and redrawn until they sum to 5 * n_items (240 for 48 items).
KnapsackSpec sample_knapsack_weights(std::size_t n_items, int capacity, RngStream& rng);
// c_i = price_i * w_i + N(0, 25), clipped at 0.
Dataset knapsack_from_prices(const Dataset& price_days, const KnapsackSpec& spec, RngStream& rng);
std::pair<Dataset, KnapsackSpec> gen_knapsack_data(const Dataset& price_days, int capacity, RngStream& rng);

inline constexpr int kReproductionCapacities[] = {60, 120, 180};

// Diverse bipartite matching

struct MatchingTruth {
  MatchingSpec spec;
  std::size_t feature_dim = 0;
  Vector left_weights;
  Vector right_weights;
  double interaction = 0.0;
  double bias = 0.0;
};

// Edge features are concatenated node features; the edge likelihood is a fixed logistic map
// of them. Field labels (and so same_field) are fixed per dataset.
MatchingTruth make_matching_truth(int nodes_per_side, std::size_t feature_dim, double rho1, double rho2,
                                  RngStream& rng, int fields = 3);
Dataset sample_matching(const MatchingTruth& truth, std::size_t n_samples, RngStream& rng,
                        Split split = Split::kTrain);
std::pair<Dataset, MatchingSpec> gen_matching_data(int nodes_per_side, std::size_t feature_dim,
                                                   double rho1, double rho2, std::size_t n_samples,
                                                   RngStream& rng);

// Top-k subset selection

Dataset sample_topk(const TopKSpec& spec, std::size_t n_samples, RngStream& rng, Split split = Split::kTrain);
std::pair<Dataset, TopKSpec> gen_topk_data(int n, int k, std::size_t n_samples, RngStream& rng);

// Energy-aware scheduling

bool scheduling_windows_valid(const SchedulingSpec& spec);
// Retries up to 100 times until the instance is feasible, else kInfeasibleInstance.
SchedulingSpec gen_scheduling_instance(int machines, int tasks, int slots, RngStream& rng, int resources = 1);

// Dataset archive: <dir>/meta.json + <dir>/data.csv.
void write_dataset_archive(const std::filesystem::path& dir, const std::string& meta_json,
                           const std::vector<const Dataset*>& splits);
std::vector<Dataset> read_dataset_archive(const std::filesystem::path& dir, std::string* meta_json = nullptr);

}  // namespace dflbench
