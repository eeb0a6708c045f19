#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dflbench/numerics.hpp"
#include "dflbench/rng.hpp"

namespace dflbench {

enum class ModelKind { kLinear, kMlp };
std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

// In per-slot mode each row of z is one slot with `input_dim` features and the model emits
// `output_dim` values per row (the same weights for every row). Otherwise z is flattened into a
// single input of size `input_dim`.
struct ModelConfig {
  ModelKind kind = ModelKind::kLinear;
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  bool per_slot = false;
  std::size_t hidden = 64;      // MLP only; ReLU hidden layer
  bool sigmoid_output = false;
};

// Per-parameter gradients, same shapes as the model's parameters.
struct GradientBundle {
  std::vector<Matrix> grads;

  void add(const GradientBundle& other, double scale = 1.0);
  void scale(double s);
  double max_abs() const;
};

// Linear: params = {W (out x in), b (1 x out)}.
// MLP: params = {W1 (hidden x in), b1 (1 x hidden), W2 (out x hidden), b2 (1 x out)}.
class PredictorModel {
 public:
  PredictorModel() = default;
  PredictorModel(ModelConfig config, std::vector<Matrix> params);

  // Weights ~ N(0, 1/fan_in), biases 0.
  static PredictorModel init(const ModelConfig& config, RngStream& rng);

  Vector forward(const Matrix& z) const;
  GradientBundle backward(const Matrix& z, std::span<const double> upstream) const;
  GradientBundle zero_gradients() const;

  const ModelConfig& config() const noexcept { return config_; }
  std::vector<Matrix>& params() noexcept { return params_; }
  const std::vector<Matrix>& params() const noexcept { return params_; }
  std::size_t parameter_count() const;
  // Number of outputs for a feature matrix of the given shape.
  std::size_t output_size(const Matrix& z) const;

 private:
  void check_input(const Matrix& z) const;

  ModelConfig config_;
  std::vector<Matrix> params_;
};

// Plain-text checkpoint with hexadecimal floats; round trip is exact.
void save_checkpoint(const std::filesystem::path& path, const PredictorModel& model);
PredictorModel load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_text(const PredictorModel& model);
PredictorModel checkpoint_from_text(const std::string& text);

}  // namespace dflbench
