#pragma once

// JSON form of OrdinalModel. Matrices are stored as arrays of rows.
// nlohmann/json prints doubles with max_digits10 digits, so every parameter
// survives a save/load cycle bit for bit.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "bsord/errors.hpp"
#include "bsord/model.hpp"

namespace bsord {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json vector_to_json(const Vector& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) {
    throw SchemaError(std::string("model document is missing field '") + name + "'");
  }
  return j.at(name);
}

inline double number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError("model field " + where + " must be a number");
  return j.get<double>();
}

inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                               const std::string& name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw SchemaError("model field " + name + " must have " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw SchemaError("model field " + name + " must have " + std::to_string(cols) +
                        " columns");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = number(row[static_cast<std::size_t>(c)], name);
    }
  }
  return m;
}

inline Vector vector_from_json(const nlohmann::json& j, Eigen::Index size, const std::string& name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) {
    throw SchemaError("model field " + name + " must have " + std::to_string(size) + " entries");
  }
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = number(j[static_cast<std::size_t>(i)], name);
  return v;
}

inline std::int64_t count(const nlohmann::json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number_integer()) throw SchemaError(std::string("model field ") + name + " must be an integer");
  return v.get<std::int64_t>();
}

}  // namespace detail

inline nlohmann::json model_to_json(const OrdinalModel& m) {
  using detail::matrix_to_json;
  using detail::vector_to_json;
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["k_states"] = m.k_states;
  j["n_bits"] = m.n_bits;
  j["d_features"] = m.d_features;
  j["h_hidden"] = m.h_hidden;
  auto stats = nlohmann::json::array();
  for (const auto& s : m.standardizer.stats()) stats.push_back({{"mean", s.mean}, {"std", s.std}});
  j["standardization"] = std::move(stats);
  j["W_e"] = matrix_to_json(m.params.W_e);
  j["b_e"] = vector_to_json(m.params.b_e);
  const auto& g = m.params.gru;
  j["gru"] = {
      {"W_z", matrix_to_json(g.W_z)}, {"U_z", matrix_to_json(g.U_z)}, {"b_z", vector_to_json(g.b_z)},
      {"W_r", matrix_to_json(g.W_r)}, {"U_r", matrix_to_json(g.U_r)}, {"b_r", vector_to_json(g.b_r)},
      {"W_h", matrix_to_json(g.W_h)}, {"U_h", matrix_to_json(g.U_h)}, {"b_h", vector_to_json(g.b_h)},
  };
  j["w_o"] = vector_to_json(m.params.w_o);
  j["b_o"] = m.params.b_o;
  j["label_dictionary"] = m.label_dictionary;
  j["feature_names"] = m.feature_names;
  return j;
}

inline OrdinalModel model_from_json(const nlohmann::json& j) {
  using detail::field;
  using detail::matrix_from_json;
  using detail::vector_from_json;

  if (detail::count(j, "format_version") != kModelFormatVersion) {
    throw SchemaError("unsupported model format_version");
  }
  OrdinalModel m;
  m.k_states = detail::count(j, "k_states");
  m.n_bits = static_cast<int>(detail::count(j, "n_bits"));
  m.d_features = detail::count(j, "d_features");
  m.h_hidden = detail::count(j, "h_hidden");
  if (m.k_states < 2 || m.d_features < 1 || m.h_hidden < 1) {
    throw SchemaError("model dimensions must be positive and k_states >= 2");
  }
  const auto d = m.d_features;
  const auto h = m.h_hidden;

  const auto& stats_json = field(j, "standardization");
  if (!stats_json.is_array() || static_cast<Eigen::Index>(stats_json.size()) != d) {
    throw SchemaError("standardization must have one entry per feature");
  }
  std::vector<FeatureStats> stats;
  for (const auto& s : stats_json) {
    stats.push_back({detail::number(field(s, "mean"), "standardization.mean"),
                     detail::number(field(s, "std"), "standardization.std")});
  }
  m.standardizer = Standardizer(std::move(stats));

  m.params.W_e = matrix_from_json(field(j, "W_e"), h, d, "W_e");
  m.params.b_e = vector_from_json(field(j, "b_e"), h, "b_e");
  const auto& g = field(j, "gru");
  auto& p = m.params.gru;
  p.W_z = matrix_from_json(field(g, "W_z"), h, kTokenSize, "gru.W_z");
  p.U_z = matrix_from_json(field(g, "U_z"), h, h, "gru.U_z");
  p.b_z = vector_from_json(field(g, "b_z"), h, "gru.b_z");
  p.W_r = matrix_from_json(field(g, "W_r"), h, kTokenSize, "gru.W_r");
  p.U_r = matrix_from_json(field(g, "U_r"), h, h, "gru.U_r");
  p.b_r = vector_from_json(field(g, "b_r"), h, "gru.b_r");
  p.W_h = matrix_from_json(field(g, "W_h"), h, kTokenSize, "gru.W_h");
  p.U_h = matrix_from_json(field(g, "U_h"), h, h, "gru.U_h");
  p.b_h = vector_from_json(field(g, "b_h"), h, "gru.b_h");
  m.params.w_o = vector_from_json(field(j, "w_o"), h, "w_o");
  m.params.b_o = detail::number(field(j, "b_o"), "b_o");

  if (j.contains("label_dictionary")) {
    m.label_dictionary = j.at("label_dictionary").get<std::vector<std::string>>();
  }
  if (j.contains("feature_names")) {
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw SchemaError(std::string("invalid model document: ") + e.what());
  }
  return m;
}

inline void save_model(const OrdinalModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << model_to_json(m).dump(2) << '\n';
}

inline OrdinalModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("model file " + path + " is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace bsord
