#pragma once

// Agreement metrics for ordinal predictions, percentile bootstrap intervals,
// and the k-fold cross-validation harness.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bsord/data.hpp"
#include "bsord/errors.hpp"
#include "bsord/model.hpp"
#include "bsord/training.hpp"

namespace bsord {

struct PredictionSet {
  std::vector<std::int64_t> truth;
  std::vector<std::int64_t> predicted;
  std::int64_t k_states = 0;

  std::size_t size() const noexcept { return truth.size(); }
  bool empty() const noexcept { return truth.empty(); }

  void validate() const {
    if (truth.empty()) throw DataError("prediction set is empty");
    if (truth.size() != predicted.size()) throw ShapeError("truth and prediction counts differ");
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] < 0 || truth[i] >= k_states || predicted[i] < 0 || predicted[i] >= k_states) {
        throw InvalidStateError("prediction pair " + std::to_string(i) + " lies outside [0, " +
                                std::to_string(k_states) + ")");
      }
    }
  }
};

inline double accuracy(const PredictionSet& p) {
  p.validate();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hits += p.truth[i] == p.predicted[i];
  return static_cast<double>(hits) / static_cast<double>(p.size());
}

/// Mean squared rank difference.
inline double mse(const PredictionSet& p) {
  p.validate();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = static_cast<double>(p.predicted[i] - p.truth[i]);
    total += e * e;
  }
  return total / static_cast<double>(p.size());
}

struct KappaBreakdown {
  /// sum_ij (i-j)^2 O_ij
  double observed_disagreement = 0.0;
  /// sum_ij (i-j)^2 E_ij with E the outer product of the marginals / N
  double expected_disagreement = 0.0;
  double value = 1.0;
  /// Expected disagreement is zero: both marginals sit on one common state.
  bool degenerate = false;
};

inline KappaBreakdown kappa_breakdown(const PredictionSet& p) {
  p.validate();
  const auto k = static_cast<std::size_t>(p.k_states);
  std::vector<double> observed(k * k, 0.0);
  std::vector<double> row(k, 0.0);
  std::vector<double> col(k, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto a = static_cast<std::size_t>(p.truth[i]);
    const auto b = static_cast<std::size_t>(p.predicted[i]);
    observed[a * k + b] += 1.0;
    row[a] += 1.0;
    col[b] += 1.0;
  }
  const double n = static_cast<double>(p.size());
  KappaBreakdown out;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double w = static_cast<double>((static_cast<std::int64_t>(i) - static_cast<std::int64_t>(j)) *
                                           (static_cast<std::int64_t>(i) - static_cast<std::int64_t>(j)));
      out.observed_disagreement += w * observed[i * k + j];
      out.expected_disagreement += w * row[i] * col[j] / n;
    }
  }
  if (out.expected_disagreement == 0.0) {
    out.degenerate = true;
    out.value = 1.0;
  } else {
    out.value = 1.0 - out.observed_disagreement / out.expected_disagreement;
  }
  return out;
}

/// Quadratic-weighted Cohen kappa. Returns 1 when the expected disagreement
/// is zero (see kappa_breakdown().degenerate).
inline double quadratic_kappa(const PredictionSet& p) { return kappa_breakdown(p).value; }

using Metric = std::function<double(const PredictionSet&)>;

struct Interval {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

namespace detail {
/// Linear-interpolation quantile of sorted values.
inline double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}
}  // namespace detail

/// Percentile bootstrap over resampled (truth, prediction) pairs. The
/// interval is widened to contain the point estimate if needed.
inline Interval bootstrap_ci(const PredictionSet& p, const Metric& metric,
                             std::size_t n_resamples = 1000, double level = 0.95,
                             std::uint64_t seed = 0) {
  p.validate();
  if (n_resamples < 1) throw ConfigError("bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");

  Interval out;
  out.point = metric(p);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
  PredictionSet sample;
  sample.k_states = p.k_states;
  sample.truth.resize(p.size());
  sample.predicted.resize(p.size());
  std::vector<double> stats;
  stats.reserve(n_resamples);
  for (std::size_t r = 0; r < n_resamples; ++r) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto j = pick(rng);
      sample.truth[i] = p.truth[j];
      sample.predicted[i] = p.predicted[j];
    }
    stats.push_back(metric(sample));
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = 1.0 - level;
  out.lower = std::min(out.point, detail::quantile(stats, alpha / 2.0));
  out.upper = std::max(out.point, detail::quantile(stats, 1.0 - alpha / 2.0));
  return out;
}

/// Mixes a master seed with a stream index (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct FoldMetrics {
  std::size_t fold = 0;
  std::size_t n_test = 0;
  double accuracy = 0.0;
  double quadratic_kappa = 0.0;
  double mse = 0.0;
};

struct CvOptions {
  std::size_t k_folds = 10;
  std::size_t n_resamples = 1000;
  double level = 0.95;
  /// Folds trained concurrently. Results do not depend on it.
  std::size_t jobs = 1;
};

struct CvReport {
  std::size_t k_folds = 0;
  std::uint64_t seed = 0;
  TrainConfig config;
  std::size_t n_samples = 0;
  Eigen::Index d_features = 0;
  std::int64_t k_states = 0;
  std::size_t n_resamples = 0;
  double level = 0.0;
  Interval accuracy;
  Interval quadratic_kappa;
  Interval mse;
  bool kappa_degenerate = false;
  std::vector<FoldMetrics> folds;
  /// Pooled out-of-fold predictions, in sample order.
  PredictionSet pooled;
};

struct FoldOutcome {
  OrdinalModel model;
  std::vector<std::size_t> test_indices;
  std::vector<std::int64_t> predictions;
  TrainHistory history;
};

/// Trains on every fold but `fold` and predicts the held-out rows. The model
/// standardizer is fitted on the training rows only.
inline FoldOutcome run_fold(const Dataset& data, const FoldPlan& plan, std::size_t fold,
                            const TrainConfig& config) {
  FoldOutcome out;
  const auto train_rows = plan.training_indices(fold);
  auto fitted = fit(data.subset(train_rows), config);
  out.model = std::move(fitted.model);
  out.history = std::move(fitted.history);
  out.test_indices = plan.folds[fold];
  out.predictions.reserve(out.test_indices.size());
  for (auto i : out.test_indices) {
    const Eigen::VectorXd raw = data.features.row(static_cast<Eigen::Index>(i)).transpose();
    out.predictions.push_back(
        predict_class(out.model, out.model.standardize(std::span(raw.data(), static_cast<std::size_t>(raw.size())))));
  }
  return out;
}

namespace detail {
[[noreturn]] inline void rethrow_for_fold(std::exception_ptr e, std::size_t fold) {
  const std::string prefix = "fold " + std::to_string(fold) + ": ";
  try {
    std::rethrow_exception(e);
  } catch (const TrainingDivergedError& err) {
    throw TrainingDivergedError(prefix + err.what(), err.epoch());
  } catch (const SchemaError& err) {
    throw SchemaError(prefix + err.what());
  } catch (const ConfigError& err) {
    throw ConfigError(prefix + err.what());
  } catch (const DataError& err) {
    throw DataError(prefix + err.what());
  } catch (const Error& err) {
    throw Error(prefix + err.what());
  }
}
}  // namespace detail

inline CvReport cross_validate(const Dataset& data, const TrainConfig& config, std::uint64_t seed,
                               const CvOptions& options = {}) {
  data.validate();
  config.validate();
  const FoldPlan plan = kfold_split(data.labels, options.k_folds, seed);

  std::vector<FoldOutcome> outcomes(plan.size());
  std::vector<std::exception_ptr> errors(plan.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t f = next++; f < plan.size(); f = next++) {
      try {
        TrainConfig fold_config = config;
        fold_config.seed = derive_seed(seed, f);
        outcomes[f] = run_fold(data, plan, f, fold_config);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, plan.size());
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  for (std::size_t f = 0; f < errors.size(); ++f) {
    if (errors[f]) detail::rethrow_for_fold(errors[f], f);
  }

  CvReport report;
  report.k_folds = options.k_folds;
  report.seed = seed;
  report.config = config;
  report.n_samples = data.size();
  report.d_features = data.d_features();
  report.k_states = data.k_states;
  report.n_resamples = options.n_resamples;
  report.level = options.level;

  report.pooled.k_states = data.k_states;
  report.pooled.truth = data.labels;
  report.pooled.predicted.assign(data.size(), 0);
  for (std::size_t f = 0; f < outcomes.size(); ++f) {
    const auto& o = outcomes[f];
    PredictionSet fold_set;
    fold_set.k_states = data.k_states;
    for (std::size_t i = 0; i < o.test_indices.size(); ++i) {
      report.pooled.predicted[o.test_indices[i]] = o.predictions[i];
      fold_set.truth.push_back(data.labels[o.test_indices[i]]);
      fold_set.predicted.push_back(o.predictions[i]);
    }
    report.folds.push_back(
        {f, fold_set.size(), accuracy(fold_set), quadratic_kappa(fold_set), mse(fold_set)});
  }

  const std::uint64_t boot_seed = derive_seed(seed, 1u << 20);
  report.accuracy = bootstrap_ci(report.pooled, accuracy, options.n_resamples, options.level, boot_seed);
  report.quadratic_kappa =
      bootstrap_ci(report.pooled, quadratic_kappa, options.n_resamples, options.level, boot_seed + 1);
  report.mse = bootstrap_ci(report.pooled, mse, options.n_resamples, options.level, boot_seed + 2);
  report.kappa_degenerate = kappa_breakdown(report.pooled).degenerate;
  return report;
}

inline nlohmann::json report_to_json(const CvReport& r) {
  auto interval = [](const Interval& i) {
    return nlohmann::json{{"point", i.point}, {"lower", i.lower}, {"upper", i.upper}};
  };
  nlohmann::json j;
  j["format_version"] = 1;
  j["seed"] = r.seed;
  j["k_folds"] = r.k_folds;
  j["dataset"] = {{"n_samples", r.n_samples}, {"d_features", r.d_features}, {"k_states", r.k_states}};
  j["config"] = config_to_json(r.config);
  j["bootstrap"] = {{"n_resamples", r.n_resamples}, {"level", r.level}};
  j["metrics"] = {{"accuracy", interval(r.accuracy)},
                  {"quadratic_kappa", interval(r.quadratic_kappa)},
                  {"mse", interval(r.mse)}};
  j["kappa_degenerate"] = r.kappa_degenerate;
  auto folds = nlohmann::json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"n_test", f.n_test},
                     {"accuracy", f.accuracy},
                     {"quadratic_kappa", f.quadratic_kappa},
                     {"mse", f.mse}});
  }
  j["per_fold"] = std::move(folds);
  return j;
}

/// Aligned text table: metric, point estimate, confidence interval.
inline std::string render_report_table(const CvReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << r.k_folds << "-fold cross-validation, " << r.n_samples << " samples, " << r.k_states
      << " states, seed " << r.seed << '\n';
  const int level = static_cast<int>(std::lround(r.level * 100));
  out << std::left << std::setw(18) << "metric" << std::right << std::setw(10) << "point"
      << "   " << level << "% CI\n";
  auto line = [&](const char* name, const Interval& i) {
    out << std::left << std::setw(18) << name << std::right << std::setw(10) << i.point << "   ["
        << i.lower << ", " << i.upper << "]\n";
  };
  line("accuracy", r.accuracy);
  line("quadratic_kappa", r.quadratic_kappa);
  line("mse", r.mse);
  return out.str();
}

}  // namespace bsord
