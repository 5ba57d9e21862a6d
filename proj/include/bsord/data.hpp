#pragma once

// CSV ingestion, ordinal label ranking, fold plans and synthetic fixtures.
//
// CSV dialect: comma separated, first row is the header, '.' decimal point,
// no quoting. Surrounding whitespace of a cell is ignored.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bsord/encoding.hpp"
#include "bsord/errors.hpp"

namespace bsord {

struct Dataset {
  Eigen::MatrixXd features;  // N x d
  std::vector<std::int64_t> labels;
  std::int64_t k_states = 0;
  std::vector<std::string> feature_names;
  /// Original target value for each rank, ascending.
  std::vector<std::string> label_dictionary;

  std::size_t size() const noexcept { return labels.size(); }
  Eigen::Index d_features() const noexcept { return features.cols(); }

  void validate() const {
    if (k_states < 2) throw DataError("dataset needs at least 2 ordinal states");
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
      throw ShapeError("feature rows and label count differ");
    }
    for (auto y : labels) {
      if (y < 0 || y >= k_states) {
        throw InvalidStateError("label " + std::to_string(y) + " outside [0, " +
                                std::to_string(k_states) + ")");
      }
    }
    if (!features.allFinite()) throw DataError("dataset contains non-finite feature values");
  }

  /// Rows selected by index, in the given order.
  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
      out.labels.push_back(labels[rows[i]]);
    }
    out.k_states = k_states;
    out.feature_names = feature_names;
    out.label_dictionary = label_dictionary;
    return out;
  }
};

/// Header plus rows of raw cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_row(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  CsvTable table;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    if (!have_header) {
      if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
      table.header = detail::split_row(line);
      have_header = true;
      continue;
    }
    auto cells = detail::split_row(line);
    if (cells.size() != table.header.size()) {
      throw SchemaError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(table.header.size()) + " cells, found " +
                        std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (!have_header || table.rows.empty()) throw DataError(path + " holds no data rows");
  return table;
}

/// Every column except `exclude`, parsed as double.
inline Eigen::MatrixXd parse_features(const CsvTable& table, std::optional<std::size_t> exclude,
                                      std::vector<std::string>* names = nullptr) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c != exclude) cols.push_back(c);
  }
  Eigen::MatrixXd features(static_cast<Eigen::Index>(table.rows.size()),
                           static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto& cell = table.rows[r][cols[j]];
      const auto v = detail::parse_double(cell);
      // Rows are reported 1-based counting the header as row 1.
      if (!v) {
        throw ParseError("row " + std::to_string(r + 2) + ", column '" + table.header[cols[j]] +
                             "': cannot parse '" + cell + "' as a number",
                         r + 2, cols[j]);
      }
      if (!std::isfinite(*v)) {
        throw DataError("row " + std::to_string(r + 2) + ", column '" + table.header[cols[j]] +
                        "': non-finite value");
      }
      features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = *v;
    }
  }
  if (names) {
    names->clear();
    for (auto c : cols) names->push_back(table.header[c]);
  }
  return features;
}

/// Maps target cells to ranks 0..K-1, by ascending numeric value or by the
/// position in `explicit_order`.
inline void rank_labels(const std::vector<std::string>& targets,
                        const std::optional<std::vector<std::string>>& explicit_order,
                        std::vector<std::int64_t>& ranks, std::vector<std::string>& dictionary) {
  ranks.clear();
  dictionary.clear();
  if (explicit_order) {
    std::map<std::string, std::int64_t> rank_of;
    for (const auto& v : *explicit_order) {
      if (!rank_of.emplace(v, static_cast<std::int64_t>(rank_of.size())).second) {
        throw LabelError("label order lists '" + v + "' twice");
      }
    }
    for (const auto& t : targets) {
      auto it = rank_of.find(t);
      if (it == rank_of.end()) throw LabelError("target value '" + t + "' is not in the label order");
      ranks.push_back(it->second);
    }
    dictionary = *explicit_order;
    return;
  }

  std::vector<double> values;
  values.reserve(targets.size());
  std::map<double, std::string> spelling;
  for (const auto& t : targets) {
    const auto v = detail::parse_double(t);
    if (!v || !std::isfinite(*v)) {
      throw LabelError("target value '" + t +
                       "' is not numeric; give an explicit label order for categorical targets");
    }
    values.push_back(*v);
    spelling.emplace(*v, t);
  }
  std::map<double, std::int64_t> rank_of;
  for (const auto& [v, s] : spelling) {
    rank_of.emplace(v, static_cast<std::int64_t>(dictionary.size()));
    dictionary.push_back(s);
  }
  for (double v : values) ranks.push_back(rank_of.at(v));
}

inline Dataset load_csv(const std::string& path, const std::string& target_column,
                        const std::optional<std::vector<std::string>>& explicit_order = std::nullopt) {
  const CsvTable table = read_csv(path);
  const auto target = table.column(target_column);
  if (!target) throw SchemaError("target column '" + target_column + "' not found in " + path);

  Dataset ds;
  ds.features = parse_features(table, target, &ds.feature_names);
  if (ds.features.cols() == 0) throw SchemaError(path + " has no feature columns");
  std::vector<std::string> targets;
  targets.reserve(table.rows.size());
  for (const auto& row : table.rows) targets.push_back(row[*target]);
  rank_labels(targets, explicit_order, ds.labels, ds.label_dictionary);
  ds.k_states = static_cast<std::int64_t>(ds.label_dictionary.size());
  if (ds.k_states < 2) throw DataError(path + ": target has fewer than 2 distinct states");
  ds.validate();
  return ds;
}

namespace detail {
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
}  // namespace detail

/// Writes features and the original label values; shortest round-trip
/// formatting keeps every double exact.
inline void write_csv(const Dataset& ds, const std::string& path, const std::string& target_column = "y") {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (const auto& name : ds.feature_names) out << name << ',';
  out << target_column << '\n';
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      out << detail::format_double(ds.features(i, j)) << ',';
    }
    const auto y = ds.labels[static_cast<std::size_t>(i)];
    out << (ds.label_dictionary.empty() ? std::to_string(y)
                                        : ds.label_dictionary[static_cast<std::size_t>(y)])
        << '\n';
  }
}

struct FoldPlan {
  std::vector<std::vector<std::size_t>> folds;
  std::uint64_t seed = 0;
  bool stratified = false;

  std::size_t size() const noexcept { return folds.size(); }

  /// Every index not in fold `f`, ascending.
  std::vector<std::size_t> training_indices(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) out.insert(out.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

inline nlohmann::json fold_plan_to_json(const FoldPlan& plan) {
  return {{"seed", plan.seed}, {"stratified", plan.stratified}, {"folds", plan.folds}};
}

/// Deterministic k-fold partition. Stratified by label when every class has
/// at least k members, else a plain shuffled split.
inline FoldPlan kfold_split(std::span<const std::int64_t> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold split needs k >= 2");
  if (labels.size() < k) {
    throw DataError("cannot split " + std::to_string(labels.size()) + " samples into " +
                    std::to_string(k) + " folds");
  }
  std::mt19937_64 rng(seed);

  std::map<std::int64_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  const bool stratified = std::all_of(by_class.begin(), by_class.end(),
                                      [&](const auto& kv) { return kv.second.size() >= k; });

  std::vector<std::size_t> order;
  order.reserve(labels.size());
  if (stratified) {
    for (auto& [label, members] : by_class) {
      std::shuffle(members.begin(), members.end(), rng);
      order.insert(order.end(), members.begin(), members.end());
    }
  } else {
    order.resize(labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }

  FoldPlan plan;
  plan.seed = seed;
  plan.stratified = stratified;
  plan.folds.resize(k);
  for (std::size_t i = 0; i < order.size(); ++i) plan.folds[i % k].push_back(order[i]);
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

/// Latent-variable fixture: x ~ N(0, I), s = <w, x> + noise, labels are
/// equal-frequency bins of s.
inline Dataset synthesize(std::size_t n_samples, Eigen::Index d_features, std::int64_t k_states,
                          double noise_std, std::uint64_t seed) {
  if (n_samples == 0 || d_features < 1) throw ConfigError("synthetic dataset needs positive sizes");
  if (k_states < 2) throw InvalidStateError("synthetic dataset needs at least 2 states");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::VectorXd w(d_features);
  for (Eigen::Index j = 0; j < d_features; ++j) w[j] = normal(rng);
  w /= w.norm();

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(n_samples), d_features);
  std::vector<double> latent(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (Eigen::Index j = 0; j < d_features; ++j) {
      ds.features(static_cast<Eigen::Index>(i), j) = normal(rng);
    }
    latent[i] = ds.features.row(static_cast<Eigen::Index>(i)).dot(w);
  }
  if (noise_std > 0.0) {
    for (auto& s : latent) s += noise_std * normal(rng);
  }

  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return latent[a] < latent[b]; });
  ds.labels.resize(n_samples);
  const auto k = static_cast<std::size_t>(k_states);
  for (std::size_t r = 0; r < n_samples; ++r) {
    ds.labels[order[r]] = static_cast<std::int64_t>(r * k / n_samples);
  }
  ds.k_states = k_states;
  for (Eigen::Index j = 0; j < d_features; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  for (std::int64_t y = 0; y < k_states; ++y) ds.label_dictionary.push_back(std::to_string(y));
  return ds;
}

}  // namespace bsord
