#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bsord/errors.hpp"

namespace bsord {

/// Standard deviations below this mark a column as constant.
inline constexpr double kConstantFeatureStd = 1e-12;

struct FeatureStats {
  double mean = 0.0;
  double std = 1.0;

  bool is_constant() const noexcept { return std < kConstantFeatureStd; }
  friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

/// Per-column affine map to zero mean and unit (population) variance.
/// Constant columns map to 0.
class Standardizer {
 public:
  Standardizer() = default;
  explicit Standardizer(std::vector<FeatureStats> stats) : stats_(std::move(stats)) {}

  std::size_t size() const noexcept { return stats_.size(); }
  const std::vector<FeatureStats>& stats() const noexcept { return stats_; }

  Eigen::VectorXd transform(std::span<const double> row) const {
    if (row.size() != stats_.size()) {
      throw ShapeError("row has " + std::to_string(row.size()) + " features, standardizer expects " +
                       std::to_string(stats_.size()));
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(row.size()));
    for (std::size_t j = 0; j < row.size(); ++j) {
      const auto& s = stats_[j];
      out[static_cast<Eigen::Index>(j)] = s.is_constant() ? 0.0 : (row[j] - s.mean) / s.std;
    }
    return out;
  }

  /// Row-wise transform of an N x d matrix.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& features) const {
    if (static_cast<std::size_t>(features.cols()) != stats_.size()) {
      throw ShapeError("matrix has " + std::to_string(features.cols()) +
                       " columns, standardizer expects " + std::to_string(stats_.size()));
    }
    Eigen::MatrixXd out(features.rows(), features.cols());
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      const auto& s = stats_[static_cast<std::size_t>(j)];
      if (s.is_constant()) {
        out.col(j).setZero();
      } else {
        out.col(j) = (features.col(j).array() - s.mean) / s.std;
      }
    }
    return out;
  }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;

 private:
  std::vector<FeatureStats> stats_;
};

/// Column means and population standard deviations of an N x d matrix.
inline Standardizer fit_standardizer(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) {
    throw DataError("standardization needs at least 2 rows, got " +
                    std::to_string(features.rows()));
  }
  const double n = static_cast<double>(features.rows());
  std::vector<FeatureStats> stats(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    const double mean = features.col(j).sum() / n;
    const double var = (features.col(j).array() - mean).square().sum() / n;
    stats[static_cast<std::size_t>(j)] = {mean, std::sqrt(var)};
  }
  return Standardizer(std::move(stats));
}

}  // namespace bsord
