#include "dflbench/predictors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dflbench {

std::string to_string(ModelKind kind) { return kind == ModelKind::kLinear ? "linear" : "mlp"; }

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "linear") return ModelKind::kLinear;
  if (s == "mlp") return ModelKind::kMlp;
  fail(ErrorCode::kInvalidParam, "unknown model kind '" + s + "'");
}

void GradientBundle::add(const GradientBundle& other, double scale) {
  if (grads.empty()) {
    grads = other.grads;
    if (scale != 1.0) this->scale(scale);
    return;
  }
  require(grads.size() == other.grads.size(), ErrorCode::kDimMismatch, "gradient bundles differ");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& a = grads[i].values();
    const auto& b = other.grads[i].values();
    require(a.size() == b.size(), ErrorCode::kDimMismatch, "gradient shapes differ");
    for (std::size_t j = 0; j < a.size(); ++j) a[j] += scale * b[j];
  }
}

void GradientBundle::scale(double s) {
  for (auto& g : grads)
    for (double& v : g.values()) v *= s;
}

double GradientBundle::max_abs() const {
  double m = 0.0;
  for (const auto& g : grads) m = std::max(m, norm_inf(g.values()));
  return m;
}

PredictorModel::PredictorModel(ModelConfig config, std::vector<Matrix> params)
    : config_(config), params_(std::move(params)) {
  const std::size_t expected = config_.kind == ModelKind::kLinear ? 2 : 4;
  require(params_.size() == expected, ErrorCode::kDimMismatch, "wrong parameter count for model kind");
  auto shape = [&](std::size_t i, std::size_t r, std::size_t c) {
    require(params_[i].rows() == r && params_[i].cols() == c, ErrorCode::kDimMismatch, "parameter shape mismatch");
  };
  if (config_.kind == ModelKind::kLinear) {
    shape(0, config_.output_dim, config_.input_dim);
    shape(1, 1, config_.output_dim);
  } else {
    shape(0, config_.hidden, config_.input_dim);
    shape(1, 1, config_.hidden);
    shape(2, config_.output_dim, config_.hidden);
    shape(3, 1, config_.output_dim);
  }
}

PredictorModel PredictorModel::init(const ModelConfig& config, RngStream& rng) {
  require(config.input_dim >= 1 && config.output_dim >= 1, ErrorCode::kInvalidParam, "model dimensions must be positive");
  require(config.kind == ModelKind::kLinear || config.hidden >= 1, ErrorCode::kInvalidParam,
          "MLP hidden width must be positive");
  auto gaussian = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    const double sd = 1.0 / std::sqrt(static_cast<double>(c));
    for (double& v : m.values()) v = sd * rng.normal();
    return m;
  };
  std::vector<Matrix> p;
  if (config.kind == ModelKind::kLinear) {
    p.push_back(gaussian(config.output_dim, config.input_dim));
    p.emplace_back(1, config.output_dim);
  } else {
    p.push_back(gaussian(config.hidden, config.input_dim));
    p.emplace_back(1, config.hidden);
    p.push_back(gaussian(config.output_dim, config.hidden));
    p.emplace_back(1, config.output_dim);
  }
  return PredictorModel(config, std::move(p));
}

std::size_t PredictorModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.values().size();
  return n;
}

void PredictorModel::check_input(const Matrix& z) const {
  if (config_.per_slot) {
    require(z.cols() == config_.input_dim && z.rows() >= 1, ErrorCode::kDimMismatch,
            "per-slot features must have input_dim columns");
  } else {
    require(z.values().size() == config_.input_dim, ErrorCode::kDimMismatch, "feature size does not match the model");
  }
}

std::size_t PredictorModel::output_size(const Matrix& z) const {
  return config_.per_slot ? z.rows() * config_.output_dim : config_.output_dim;
}

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

Vector PredictorModel::forward(const Matrix& z) const {
  check_input(z);
  const std::size_t n_rows = config_.per_slot ? z.rows() : 1;
  const std::size_t out_dim = config_.output_dim;
  Vector out(n_rows * out_dim);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::span<const double> x = config_.per_slot ? z.row(r) : std::span<const double>(z.values());
    Vector y;
    if (config_.kind == ModelKind::kLinear) {
      y = matvec(params_[0], x);
      for (std::size_t k = 0; k < out_dim; ++k) y[k] += params_[1](0, k);
    } else {
      Vector h = matvec(params_[0], x);
      for (std::size_t k = 0; k < h.size(); ++k) h[k] = std::max(0.0, h[k] + params_[1](0, k));
      y = matvec(params_[2], h);
      for (std::size_t k = 0; k < out_dim; ++k) y[k] += params_[3](0, k);
    }
    if (config_.sigmoid_output)
      for (double& v : y) v = sigmoid(v);
    std::copy(y.begin(), y.end(), out.begin() + static_cast<std::ptrdiff_t>(r * out_dim));
  }
  return out;
}

GradientBundle PredictorModel::zero_gradients() const {
  GradientBundle g;
  for (const auto& p : params_) g.grads.emplace_back(p.rows(), p.cols());
  return g;
}

GradientBundle PredictorModel::backward(const Matrix& z, std::span<const double> upstream) const {
  check_input(z);
  require(upstream.size() == output_size(z), ErrorCode::kDimMismatch, "upstream size does not match model output");
  GradientBundle g = zero_gradients();
  const std::size_t n_rows = config_.per_slot ? z.rows() : 1;
  const std::size_t out_dim = config_.output_dim;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::span<const double> x = config_.per_slot ? z.row(r) : std::span<const double>(z.values());
    Vector dy(upstream.begin() + static_cast<std::ptrdiff_t>(r * out_dim),
              upstream.begin() + static_cast<std::ptrdiff_t>((r + 1) * out_dim));
    if (config_.kind == ModelKind::kLinear) {
      if (config_.sigmoid_output) {
        Vector pre = matvec(params_[0], x);
        for (std::size_t k = 0; k < out_dim; ++k) {
          const double s = sigmoid(pre[k] + params_[1](0, k));
          dy[k] *= s * (1.0 - s);
        }
      }
      for (std::size_t k = 0; k < out_dim; ++k) {
        if (dy[k] == 0.0) continue;
        auto row = g.grads[0].row(k);
        for (std::size_t j = 0; j < x.size(); ++j) row[j] += dy[k] * x[j];
        g.grads[1](0, k) += dy[k];
      }
    } else {
      Vector pre = matvec(params_[0], x);
      Vector h(pre.size());
      for (std::size_t k = 0; k < h.size(); ++k) {
        pre[k] += params_[1](0, k);
        h[k] = std::max(0.0, pre[k]);
      }
      if (config_.sigmoid_output) {
        Vector y = matvec(params_[2], h);
        for (std::size_t k = 0; k < out_dim; ++k) {
          const double s = sigmoid(y[k] + params_[3](0, k));
          dy[k] *= s * (1.0 - s);
        }
      }
      Vector dh(h.size(), 0.0);
      for (std::size_t k = 0; k < out_dim; ++k) {
        if (dy[k] == 0.0) continue;
        auto row = g.grads[2].row(k);
        const auto w2 = params_[2].row(k);
        for (std::size_t j = 0; j < h.size(); ++j) {
          row[j] += dy[k] * h[j];
          dh[j] += dy[k] * w2[j];
        }
        g.grads[3](0, k) += dy[k];
      }
      for (std::size_t k = 0; k < h.size(); ++k) {
        if (pre[k] <= 0.0 || dh[k] == 0.0) continue;
        auto row = g.grads[0].row(k);
        for (std::size_t j = 0; j < x.size(); ++j) row[j] += dh[k] * x[j];
        g.grads[1](0, k) += dh[k];
      }
    }
  }
  return g;
}

std::string checkpoint_text(const PredictorModel& model) {
  const auto& c = model.config();
  std::ostringstream out;
  out << "dflbench-model 1\n";
  out << "kind " << to_string(c.kind) << "\n";
  out << "input_dim " << c.input_dim << "\noutput_dim " << c.output_dim << "\nper_slot " << c.per_slot
      << "\nhidden " << c.hidden << "\nsigmoid_output " << c.sigmoid_output << "\n";
  out << "params " << model.params().size() << "\n";
  char buf[48];
  for (const auto& p : model.params()) {
    out << p.rows() << ' ' << p.cols() << '\n';
    for (std::size_t i = 0; i < p.values().size(); ++i) {
      std::snprintf(buf, sizeof buf, "%a", p.values()[i]);
      out << buf << ((i + 1) % p.cols() == 0 ? '\n' : ' ');
    }
  }
  return out.str();
}

PredictorModel checkpoint_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string tag, key;
  int version = 0;
  in >> tag >> version;
  require(tag == "dflbench-model" && version == 1, ErrorCode::kIngestError, "not a model checkpoint");
  ModelConfig c;
  std::string kind;
  in >> key >> kind;
  require(key == "kind", ErrorCode::kIngestError, "checkpoint: expected kind");
  c.kind = model_kind_from_string(kind);
  auto read = [&](const char* name, auto& field) {
    in >> key >> field;
    require(in && key == name, ErrorCode::kIngestError, std::string("checkpoint: expected ") + name);
  };
  read("input_dim", c.input_dim);
  read("output_dim", c.output_dim);
  read("per_slot", c.per_slot);
  read("hidden", c.hidden);
  read("sigmoid_output", c.sigmoid_output);
  std::size_t n = 0;
  read("params", n);
  std::vector<Matrix> params;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0, k = 0;
    in >> r >> k;
    require(static_cast<bool>(in), ErrorCode::kIngestError, "checkpoint: bad parameter shape");
    Matrix m(r, k);
    for (double& v : m.values()) {
      std::string tok;
      in >> tok;
      char* end = nullptr;
      v = std::strtod(tok.c_str(), &end);
      require(!tok.empty() && end == tok.c_str() + tok.size(), ErrorCode::kIngestError, "checkpoint: bad number");
    }
    params.push_back(std::move(m));
  }
  return PredictorModel(c, std::move(params));
}

void save_checkpoint(const std::filesystem::path& path, const PredictorModel& model) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << checkpoint_text(model);
  require(out.good(), ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

PredictorModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIngestError, "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_text(ss.str());
}

}  // namespace dflbench
