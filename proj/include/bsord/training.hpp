#pragma once

// Initialization, mini-batch training under teacher forcing, and gradient
// checking.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsord/data.hpp"
#include "bsord/errors.hpp"
#include "bsord/model.hpp"
#include "bsord/standardize.hpp"

namespace bsord {

enum class Optimizer { kGradientDescent, kAdam };
enum class Penalty { kNone, kL2, kL1, kElasticNet };

struct TrainConfig {
  /// Defaults to the tree depth of the target.
  std::optional<Eigen::Index> h_hidden;
  double learning_rate = 0.01;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Applied to W_e only.
  Penalty penalty = Penalty::kNone;
  double lambda = 0.0;
  /// Share of the L1 term under elastic-net.
  double l1_ratio = 0.5;

  void validate() const {
    if (h_hidden && *h_hidden < 1) throw ConfigError("h_hidden must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("learning_rate must be > 0");
    }
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("beta1 and beta2 must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
    if (!(l1_ratio >= 0.0 && l1_ratio <= 1.0)) throw ConfigError("l1_ratio must lie in [0, 1]");
  }
};

inline const char* to_string(Optimizer o) {
  return o == Optimizer::kAdam ? "adam" : "gradient-descent";
}

inline const char* to_string(Penalty p) {
  switch (p) {
    case Penalty::kNone: return "none";
    case Penalty::kL2: return "l2";
    case Penalty::kL1: return "l1";
    case Penalty::kElasticNet: return "elastic-net";
  }
  return "none";
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["h_hidden"] = c.h_hidden ? nlohmann::json(*c.h_hidden) : nlohmann::json(nullptr);
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["optimizer"] = to_string(c.optimizer);
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["penalty"] = to_string(c.penalty);
  j["lambda"] = c.lambda;
  j["l1_ratio"] = c.l1_ratio;
  return j;
}

/// Every key is optional; unknown keys are rejected.
inline TrainConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "h_hidden") {
        if (!value.is_null()) c.h_hidden = value.get<Eigen::Index>();
      } else if (key == "learning_rate") {
        c.learning_rate = value.get<double>();
      } else if (key == "epochs") {
        if (!value.is_number_integer() || value.get<std::int64_t>() < 1) throw ConfigError("epochs must be a positive integer");
        c.epochs = value.get<std::size_t>();
      } else if (key == "batch_size") {
        if (!value.is_number_integer() || value.get<std::int64_t>() < 1) throw ConfigError("batch_size must be a positive integer");
        c.batch_size = value.get<std::size_t>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "optimizer") {
        const auto s = value.get<std::string>();
        if (s == "adam") {
          c.optimizer = Optimizer::kAdam;
        } else if (s == "gradient-descent" || s == "sgd") {
          c.optimizer = Optimizer::kGradientDescent;
        } else {
          throw ConfigError("unknown optimizer '" + s + "'");
        }
      } else if (key == "beta1") {
        c.beta1 = value.get<double>();
      } else if (key == "beta2") {
        c.beta2 = value.get<double>();
      } else if (key == "epsilon") {
        c.epsilon = value.get<double>();
      } else if (key == "penalty") {
        const auto s = value.get<std::string>();
        if (s == "none") c.penalty = Penalty::kNone;
        else if (s == "l2") c.penalty = Penalty::kL2;
        else if (s == "l1") c.penalty = Penalty::kL1;
        else if (s == "elastic-net") c.penalty = Penalty::kElasticNet;
        else throw ConfigError("unknown penalty '" + s + "'");
      } else if (key == "lambda") {
        c.lambda = value.get<double>();
      } else if (key == "l1_ratio") {
        c.l1_ratio = value.get<double>();
      } else {
        throw ConfigError("unknown training config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

struct TrainHistory {
  /// Mean NLL of the training data under the initial parameters.
  double initial_loss = 0.0;
  /// Mean per-sample NLL accumulated over each epoch's batches.
  std::vector<double> epoch_loss;
  std::size_t epochs_completed = 0;
  std::size_t update_steps = 0;
  /// Largest L2 norm of a (penalized) batch gradient seen during training.
  double max_batch_gradient_norm = 0.0;
  double wall_seconds = 0.0;
};

struct FitResult {
  OrdinalModel model;
  TrainHistory history;
};

/// Glorot-uniform weights, zero biases. Deterministic in the seed.
inline ModelParams init_params(Eigen::Index d_features, Eigen::Index h_hidden, std::uint64_t seed) {
  if (d_features < 1 || h_hidden < 1) throw ShapeError("parameter dimensions must be positive");
  ModelParams p = ModelParams::zeros(d_features, h_hidden);
  std::mt19937_64 rng(seed);
  auto fill = [&](Matrix& m) {
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> dist(-a, a);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  };
  fill(p.W_e);
  fill(p.gru.W_z);
  fill(p.gru.U_z);
  fill(p.gru.W_r);
  fill(p.gru.U_r);
  fill(p.gru.W_h);
  fill(p.gru.U_h);
  // The head is a 1 x h row: fan_in = h, fan_out = 1.
  const double a = std::sqrt(6.0 / static_cast<double>(h_hidden + 1));
  std::uniform_real_distribution<double> dist(-a, a);
  for (Eigen::Index i = 0; i < p.w_o.size(); ++i) p.w_o[i] = dist(rng);
  return p;
}

/// acc += scale * g, array by array.
inline void add_scaled(ModelParams& acc, double scale, const ModelParams& g) {
  acc.W_e += scale * g.W_e;
  acc.b_e += scale * g.b_e;
  acc.gru.W_z += scale * g.gru.W_z;
  acc.gru.U_z += scale * g.gru.U_z;
  acc.gru.b_z += scale * g.gru.b_z;
  acc.gru.W_r += scale * g.gru.W_r;
  acc.gru.U_r += scale * g.gru.U_r;
  acc.gru.b_r += scale * g.gru.b_r;
  acc.gru.W_h += scale * g.gru.W_h;
  acc.gru.U_h += scale * g.gru.U_h;
  acc.gru.b_h += scale * g.gru.b_h;
  acc.w_o += scale * g.w_o;
  acc.b_o += scale * g.b_o;
}

/// Penalty value on W_e; its (sub)gradient is added to `grad` when given.
inline double apply_penalty(const TrainConfig& c, const Matrix& W_e, Matrix* grad) {
  if (c.penalty == Penalty::kNone || c.lambda == 0.0) return 0.0;
  double l1_share = 0.0;
  double l2_share = 0.0;
  switch (c.penalty) {
    case Penalty::kL1: l1_share = 1.0; break;
    case Penalty::kL2: l2_share = 1.0; break;
    case Penalty::kElasticNet:
      l1_share = c.l1_ratio;
      l2_share = 1.0 - c.l1_ratio;
      break;
    case Penalty::kNone: break;
  }
  const double value =
      c.lambda * (l1_share * W_e.cwiseAbs().sum() + l2_share * W_e.squaredNorm());
  if (grad) {
    const Matrix sign = W_e.unaryExpr([](double w) { return double((w > 0.0) - (w < 0.0)); });
    *grad += c.lambda * (l1_share * sign + 2.0 * l2_share * W_e);
  }
  return value;
}

/// Mean teacher-forcing NLL of standardized rows.
inline double mean_nll(const OrdinalModel& m, const Matrix& X, std::span<const std::int64_t> labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    total += teacher_forcing_nll(m, X.row(i).transpose(), labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(X.rows());
}

/// Fits standardization and parameters on `data`.
inline FitResult fit(const Dataset& data, const TrainConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  data.validate();
  if (data.size() < 2) throw DataError("training needs at least 2 samples");

  const Eigen::Index d = data.d_features();
  const int n_bits = tree_depth(data.k_states);
  const Eigen::Index h = config.h_hidden.value_or(n_bits);
  if (h > d) {
    warn("hidden size " + std::to_string(h) + " exceeds the feature count " + std::to_string(d));
  }

  FitResult result;
  OrdinalModel& model = result.model;
  model = OrdinalModel::zeros(data.k_states, d, h);
  model.standardizer = fit_standardizer(data.features);
  model.params = init_params(d, h, config.seed);
  model.label_dictionary = data.label_dictionary;
  model.feature_names = data.feature_names;
  const Matrix X = model.standardizer.transform(data.features);

  TrainHistory& history = result.history;
  history.initial_loss = mean_nll(model, X, data.labels);

  // Separate stream from the initializer.
  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> theta = flatten(model.params);
  std::vector<double> first_moment(theta.size(), 0.0);
  std::vector<double> second_moment(theta.size(), 0.0);
  std::size_t adam_step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      ModelParams grad = ModelParams::zeros(d, h);
      for (std::size_t k = begin; k < end; ++k) {
        const auto row = static_cast<Eigen::Index>(order[k]);
        auto lg = teacher_forcing_loss(model, X.row(row).transpose(), data.labels[order[k]]);
        epoch_total += lg.loss;
        add_scaled(grad, 1.0, lg.gradient);
      }
      const double inv = 1.0 / static_cast<double>(end - begin);
      ModelParams mean_grad = ModelParams::zeros(d, h);
      add_scaled(mean_grad, inv, grad);
      apply_penalty(config, model.params.W_e, &mean_grad.W_e);

      const std::vector<double> g = flatten(mean_grad);
      double norm2 = 0.0;
      for (double v : g) norm2 += v * v;
      history.max_batch_gradient_norm = std::max(history.max_batch_gradient_norm, std::sqrt(norm2));

      if (config.optimizer == Optimizer::kGradientDescent) {
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= config.learning_rate * g[i];
      } else {
        ++adam_step;
        const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam_step));
        const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam_step));
        for (std::size_t i = 0; i < theta.size(); ++i) {
          first_moment[i] = config.beta1 * first_moment[i] + (1.0 - config.beta1) * g[i];
          second_moment[i] = config.beta2 * second_moment[i] + (1.0 - config.beta2) * g[i] * g[i];
          const double m_hat = first_moment[i] / c1;
          const double v_hat = second_moment[i] / c2;
          theta[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
      }
      assign_flat(model.params, theta);
      ++history.update_steps;
    }
    const double mean_loss = epoch_total / static_cast<double>(order.size());
    if (!std::isfinite(mean_loss) ||
        !std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); })) {
      throw TrainingDivergedError("training diverged at epoch " + std::to_string(epoch + 1), epoch + 1);
    }
    history.epoch_loss.push_back(mean_loss);
    history.epochs_completed = epoch + 1;
  }
  history.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

struct GradientCheckReport {
  double max_relative_error = 0.0;
  /// Array holding the worst entry, e.g. "gru.U_h".
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool passed = true;
};

/// Denominator floor of the relative error; below it the error is absolute.
inline constexpr double kGradientCheckFloor = 1e-3;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), kGradientCheckFloor});
}

/// Compares `analytic` against central differences of the teacher-forcing
/// loss at (x, y).
inline GradientCheckReport compare_gradients(const OrdinalModel& model, const Vector& x,
                                             std::int64_t y, const ModelParams& analytic,
                                             double tolerance = 1e-5, double step = 1e-6) {
  OrdinalModel probe = model;
  std::vector<std::pair<std::string_view, std::span<const double>>> reference;
  for_each_array(analytic, [&](std::string_view name, std::span<const double> s) {
    reference.emplace_back(name, s);
  });

  GradientCheckReport report;
  std::size_t array = 0;
  for_each_array(probe.params, [&](std::string_view name, std::span<double> values) {
    const auto expected = reference[array++].second;
    if (expected.size() != values.size()) {
      throw ShapeError("analytic gradient for " + std::string(name) + " has the wrong size");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = teacher_forcing_nll(probe, x, y);
      values[i] = saved - step;
      const double down = teacher_forcing_nll(probe, x, y);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(expected[i], numeric);
      if (err > report.max_relative_error || report.worst_parameter.empty()) {
        report.max_relative_error = err;
        report.worst_parameter = std::string(name);
        report.worst_index = i;
        report.analytic = expected[i];
        report.numeric = numeric;
      }
    }
  });
  report.passed = report.max_relative_error < tolerance;
  return report;
}

inline GradientCheckReport gradient_check(const OrdinalModel& model, const Vector& x, std::int64_t y,
                                          double tolerance = 1e-5) {
  const auto lg = teacher_forcing_loss(model, x, y);
  return compare_gradients(model, x, y, lg.gradient, tolerance);
}

}  // namespace bsord
