#pragma once

// Binary-search ordinal model.
//
// An affine projection of the (standardized) features initialises the state
// of a GRU. The GRU reads the decision path of the target one bit at a time,
// starting from a neutral START token, and a single logistic head shared by
// all steps gives the probability that the next bit is 1. The probability of
// a state is the product of the bit probabilities along its path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "bsord/encoding.hpp"
#include "bsord/errors.hpp"
#include "bsord/neuralnet.hpp"
#include "bsord/standardize.hpp"

namespace bsord {

/// Size of every token vector fed to the GRU.
inline constexpr Eigen::Index kTokenSize = 2;

/// Learnable arrays of the model. Also used as the gradient container.
struct ModelParams {
  Matrix W_e;  // hidden x features
  Vector b_e;  // hidden
  GruParams gru;
  Vector w_o;  // hidden
  double b_o = 0.0;

  static ModelParams zeros(Eigen::Index features, Eigen::Index hidden) {
    ModelParams p;
    p.W_e = Matrix::Zero(hidden, features);
    p.b_e = Vector::Zero(hidden);
    p.gru = GruParams::zeros(hidden, kTokenSize);
    p.w_o = Vector::Zero(hidden);
    return p;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.W_e == b.W_e && a.b_e == b.b_e && a.gru == b.gru && a.w_o == b.w_o &&
           a.b_o == b.b_o;
  }
};

namespace detail {
template <class T>
auto as_span(T& array) {
  return std::span(array.data(), static_cast<std::size_t>(array.size()));
}
}  // namespace detail

/// Calls fn(name, span) for every parameter array, in a fixed order. Storage
/// order inside each span is Eigen's (column-major); callers that need a
/// layout-independent order should go through the named arrays.
template <class Params, class Fn>
  requires std::is_same_v<std::remove_const_t<Params>, ModelParams>
void for_each_array(Params& p, Fn&& fn) {
  using detail::as_span;
  fn(std::string_view("W_e"), as_span(p.W_e));
  fn(std::string_view("b_e"), as_span(p.b_e));
  fn(std::string_view("gru.W_z"), as_span(p.gru.W_z));
  fn(std::string_view("gru.U_z"), as_span(p.gru.U_z));
  fn(std::string_view("gru.b_z"), as_span(p.gru.b_z));
  fn(std::string_view("gru.W_r"), as_span(p.gru.W_r));
  fn(std::string_view("gru.U_r"), as_span(p.gru.U_r));
  fn(std::string_view("gru.b_r"), as_span(p.gru.b_r));
  fn(std::string_view("gru.W_h"), as_span(p.gru.W_h));
  fn(std::string_view("gru.U_h"), as_span(p.gru.U_h));
  fn(std::string_view("gru.b_h"), as_span(p.gru.b_h));
  fn(std::string_view("w_o"), as_span(p.w_o));
  fn(std::string_view("b_o"), std::span(&p.b_o, 1));
}

inline std::size_t parameter_count(const ModelParams& p) {
  std::size_t n = 0;
  for_each_array(p, [&](std::string_view, auto span) { n += span.size(); });
  return n;
}

/// Concatenation of every array in for_each_array order.
inline std::vector<double> flatten(const ModelParams& p) {
  std::vector<double> flat;
  flat.reserve(parameter_count(p));
  for_each_array(p, [&](std::string_view, auto span) { flat.insert(flat.end(), span.begin(), span.end()); });
  return flat;
}

/// Inverse of flatten for a params object of matching shape.
inline void assign_flat(ModelParams& p, std::span<const double> flat) {
  if (flat.size() != parameter_count(p)) {
    throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) +
                     " entries, expected " + std::to_string(parameter_count(p)));
  }
  std::size_t offset = 0;
  for_each_array(p, [&](std::string_view, std::span<double> span) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), span.size(), span.begin());
    offset += span.size();
  });
}

struct OrdinalModel {
  std::int64_t k_states = 0;
  int n_bits = 0;
  Eigen::Index d_features = 0;
  Eigen::Index h_hidden = 0;
  ModelParams params;
  Standardizer standardizer;
  /// Original target value of each rank. Optional.
  std::vector<std::string> label_dictionary;
  std::vector<std::string> feature_names;

  /// Zero-parameter model with identity standardization.
  static OrdinalModel zeros(std::int64_t k_states, Eigen::Index d_features,
                            Eigen::Index h_hidden) {
    if (d_features < 1) throw ShapeError("model needs at least one feature");
    if (h_hidden < 1) throw ShapeError("hidden size must be at least 1");
    OrdinalModel m;
    m.k_states = k_states;
    m.n_bits = tree_depth(k_states);
    if (m.n_bits > kMaxTreeDepth) {
      throw InvalidStateError("at most 2^" + std::to_string(kMaxTreeDepth) +
                              " states are supported");
    }
    m.d_features = d_features;
    m.h_hidden = h_hidden;
    m.params = ModelParams::zeros(d_features, h_hidden);
    m.standardizer =
        Standardizer(std::vector<FeatureStats>(static_cast<std::size_t>(d_features)));
    return m;
  }

  /// Throws unless every dimension and invariant is consistent.
  void validate() const {
    if (n_bits != tree_depth(k_states)) {
      throw ShapeError("n_bits " + std::to_string(n_bits) + " does not match " +
                       std::to_string(k_states) + " states");
    }
    if (n_bits > kMaxTreeDepth) throw InvalidStateError("too many states");
    if (d_features < 1 || h_hidden < 1) throw ShapeError("model dimensions must be positive");
    if (params.W_e.rows() != h_hidden || params.W_e.cols() != d_features) {
      throw ShapeError("W_e must be " + std::to_string(h_hidden) + "x" +
                       std::to_string(d_features));
    }
    if (params.b_e.size() != h_hidden) throw ShapeError("b_e must have h_hidden entries");
    if (params.w_o.size() != h_hidden) throw ShapeError("w_o must have h_hidden entries");
    params.gru.validate();
    if (params.gru.hidden_size() != h_hidden || params.gru.input_size() != kTokenSize) {
      throw ShapeError("GRU must map 2-dimensional tokens to h_hidden states");
    }
    if (standardizer.size() != static_cast<std::size_t>(d_features)) {
      throw ShapeError("standardizer size does not match d_features");
    }
    if (!label_dictionary.empty() &&
        label_dictionary.size() != static_cast<std::size_t>(k_states)) {
      throw ShapeError("label dictionary must have one entry per state");
    }
    if (!feature_names.empty() && feature_names.size() != static_cast<std::size_t>(d_features)) {
      throw ShapeError("feature names must have one entry per feature");
    }
    for_each_array(params, [](std::string_view name, auto span) {
      for (double v : span) {
        if (!std::isfinite(v)) throw DataError("parameter " + std::string(name) + " is not finite");
      }
    });
  }

  Vector standardize(std::span<const double> raw_row) const {
    return standardizer.transform(raw_row);
  }
};

enum class TokenSymbol { kBitZero, kBitOne, kStart };

using Token = Eigen::Vector2d;

inline Token embed_token(TokenSymbol s) {
  switch (s) {
    case TokenSymbol::kBitZero: return {0.0, 1.0};
    case TokenSymbol::kBitOne: return {1.0, 0.0};
    case TokenSymbol::kStart: break;
  }
  return {0.0, 0.0};
}

inline Token embed_bit(std::uint8_t bit) {
  return embed_token(bit ? TokenSymbol::kBitOne : TokenSymbol::kBitZero);
}

/// W_e x + b_e for a standardized feature vector.
inline Vector initial_state(const OrdinalModel& m, const Vector& x) {
  if (x.size() != m.d_features) {
    throw ShapeError("feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                     std::to_string(m.d_features));
  }
  return m.params.W_e * x + m.params.b_e;
}

inline double bit_logit(const OrdinalModel& m, const Vector& h) {
  if (h.size() != m.h_hidden) {
    throw ShapeError("hidden state has " + std::to_string(h.size()) + " entries, expected " +
                     std::to_string(m.h_hidden));
  }
  return m.params.w_o.dot(h) + m.params.b_o;
}

/// P(next bit = 1 | state h).
inline double bit_probability(const OrdinalModel& m, const Vector& h) {
  return sigmoid(bit_logit(m, h));
}

/// GRU input sequence under teacher forcing: START followed by every bit of
/// the path except the last.
inline std::vector<Vector> teacher_forcing_inputs(const BitCode& code) {
  std::vector<Vector> inputs;
  inputs.reserve(code.size());
  inputs.emplace_back(embed_token(TokenSymbol::kStart));
  for (std::size_t i = 0; i + 1 < code.size(); ++i) inputs.emplace_back(embed_bit(code[i]));
  return inputs;
}

struct LossAndGradient {
  double loss = 0.0;
  ModelParams gradient;
};

namespace detail {
inline void check_state(const OrdinalModel& m, std::int64_t y) {
  if (y < 0 || y >= m.k_states) {
    throw InvalidStateError("state " + std::to_string(y) + " outside [0, " +
                            std::to_string(m.k_states) + ")");
  }
}

/// -log P(bit | logit).
inline double bit_nll(double logit, std::uint8_t bit) {
  return bit ? softplus(-logit) : softplus(logit);
}
}  // namespace detail

/// Negative log-likelihood of state y's path under teacher forcing.
inline double teacher_forcing_nll(const OrdinalModel& m, const Vector& x, std::int64_t y) {
  detail::check_state(m, y);
  const BitCode code = encode_state(y, m.n_bits);
  Vector h = initial_state(m, x);
  double loss = 0.0;
  for (std::size_t i = 0; i < code.size(); ++i) {
    const Vector token = i == 0 ? Vector(embed_token(TokenSymbol::kStart)) : Vector(embed_bit(code[i - 1]));
    h = gru_step(m.params.gru, token, h).h;
    loss += detail::bit_nll(bit_logit(m, h), code[i]);
  }
  return loss;
}

/// Teacher-forcing NLL of one sample and its gradient with respect to every
/// model parameter.
inline LossAndGradient teacher_forcing_loss(const OrdinalModel& m, const Vector& x,
                                            std::int64_t y) {
  detail::check_state(m, y);
  const BitCode code = encode_state(y, m.n_bits);
  const Vector h0 = initial_state(m, x);
  const auto fwd = gru_forward(m.params.gru, teacher_forcing_inputs(code), h0);

  LossAndGradient out;
  out.gradient = ModelParams::zeros(m.d_features, m.h_hidden);
  std::vector<Vector> grad_outputs(fwd.outputs.size());
  for (std::size_t i = 0; i < code.size(); ++i) {
    const Vector& h = fwd.outputs[i];
    const double logit = bit_logit(m, h);
    out.loss += detail::bit_nll(logit, code[i]);
    const double d_logit = sigmoid(logit) - static_cast<double>(code[i]);
    out.gradient.w_o += d_logit * h;
    out.gradient.b_o += d_logit;
    grad_outputs[i] = d_logit * m.params.w_o;
  }
  auto back = gru_backward(m.params.gru, fwd.trace, grad_outputs);
  out.gradient.gru = std::move(back.params);
  out.gradient.W_e.noalias() = back.h0 * x.transpose();
  out.gradient.b_e = back.h0;
  return out;
}

enum class InferenceMode {
  /// Depth-first walk reusing the GRU state of shared prefixes.
  kTreeTraversal,
  /// Runs every full path independently. Reference implementation.
  kEnumeration,
};

struct LeafLogProbabilities {
  /// log P(path) for each of the 2^n leaves, indexed by decoded path value.
  std::vector<double> log_probs;
  std::size_t gru_steps = 0;
};

inline LeafLogProbabilities leaf_log_probabilities(const OrdinalModel& m, const Vector& x,
                                                   InferenceMode mode = InferenceMode::kTreeTraversal) {
  const int n = m.n_bits;
  const std::size_t leaves = std::size_t{1} << n;
  LeafLogProbabilities out;
  out.log_probs.assign(leaves, 0.0);
  const Vector h0 = initial_state(m, x);

  if (mode == InferenceMode::kEnumeration) {
    for (std::size_t y = 0; y < leaves; ++y) {
      const BitCode code = encode_state(static_cast<std::int64_t>(y), n);
      const auto fwd = gru_forward(m.params.gru, teacher_forcing_inputs(code), h0);
      out.gru_steps += fwd.outputs.size();
      double log_p = 0.0;
      for (std::size_t i = 0; i < code.size(); ++i) {
        log_p -= detail::bit_nll(bit_logit(m, fwd.outputs[i]), code[i]);
      }
      out.log_probs[y] = log_p;
    }
    return out;
  }

  // h is the GRU output after consuming the prefix; depth counts the bits
  // decided so far.
  std::function<void(const Vector&, int, std::size_t, double)> walk =
      [&](const Vector& h, int depth, std::size_t prefix, double log_p) {
        const double logit = bit_logit(m, h);
        for (std::uint8_t bit = 0; bit < 2; ++bit) {
          const double child_log_p = log_p - detail::bit_nll(logit, bit);
          const std::size_t child = (prefix << 1) | bit;
          if (depth + 1 == n) {
            out.log_probs[child] = child_log_p;
          } else {
            ++out.gru_steps;
            walk(gru_step(m.params.gru, embed_bit(bit), h).h, depth + 1, child, child_log_p);
          }
        }
      };
  ++out.gru_steps;
  walk(gru_step(m.params.gru, embed_token(TokenSymbol::kStart), h0).h, 0, 0, 0.0);
  return out;
}

/// Distribution over the k_states valid states for a standardized input.
inline std::vector<double> predict_distribution(const OrdinalModel& m, const Vector& x,
                                                InferenceMode mode = InferenceMode::kTreeTraversal) {
  const auto leaves = leaf_log_probabilities(m, x, mode);
  const auto k = static_cast<std::size_t>(m.k_states);

  std::vector<double> probs(leaves.log_probs.size());
  std::transform(leaves.log_probs.begin(), leaves.log_probs.end(), probs.begin(),
                 [](double lp) { return std::exp(lp); });
  double valid_mass = 0.0;
  for (std::size_t j = 0; j < k; ++j) valid_mass += probs[j];
  if (valid_mass >= 1e-300) return truncate_renormalize(probs, m.k_states).probs;

  // Every valid leaf underflowed in linear space; normalise in log space.
  const double top = *std::max_element(leaves.log_probs.begin(), leaves.log_probs.begin() + static_cast<std::ptrdiff_t>(k));
  if (!std::isfinite(top)) return truncate_renormalize(std::vector<double>(k, 0.0), m.k_states).probs;
  std::vector<double> shifted(k);
  for (std::size_t j = 0; j < k; ++j) shifted[j] = std::exp(leaves.log_probs[j] - top);
  return truncate_renormalize(shifted, m.k_states).probs;
}

/// Index of the largest entry; ties go to the lowest index.
inline std::int64_t argmax(std::span<const double> probs) {
  if (probs.empty()) throw ShapeError("argmax of an empty distribution");
  std::size_t best = 0;
  for (std::size_t j = 1; j < probs.size(); ++j) {
    if (probs[j] > probs[best]) best = j;
  }
  return static_cast<std::int64_t>(best);
}

inline std::int64_t predict_class(const OrdinalModel& m, const Vector& x) {
  return argmax(predict_distribution(m, x));
}

/// Initial-state embedding of every row of a standardized N x d matrix.
inline Matrix project(const OrdinalModel& m, const Matrix& features) {
  if (features.cols() != m.d_features) {
    throw ShapeError("feature matrix has " + std::to_string(features.cols()) +
                     " columns, model expects " + std::to_string(m.d_features));
  }
  if (m.h_hidden >= m.d_features) {
    warn("hidden size " + std::to_string(m.h_hidden) + " is not below the feature count " +
         std::to_string(m.d_features) + "; the projection does not compress");
  }
  Matrix out(features.rows(), m.h_hidden);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out.row(i) = initial_state(m, features.row(i).transpose()).transpose();
  }
  return out;
}

}  // namespace bsord
