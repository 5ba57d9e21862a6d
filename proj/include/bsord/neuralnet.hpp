#pragma once

// Gated recurrent unit: forward pass, unrolling, and backpropagation
// through time.
//
//   z_t  = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
//   r_t  = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
//   hc_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
//   h_t  = (1 - z_t) * hc_t + z_t * h_{t-1}

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bsord/errors.hpp"

namespace bsord {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Logistic function, evaluated without overflow for large |a|.
inline double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

/// log(1 + exp(a)) without overflow or loss of precision for large |a|.
inline double softplus(double a) {
  if (a > 0.0) return a + std::log1p(std::exp(-a));
  return std::log1p(std::exp(a));
}

inline Vector sigmoid(const Vector& a) {
  return a.unaryExpr([](double v) { return sigmoid(v); });
}

struct GruParams {
  Matrix W_z, W_r, W_h;  // hidden x input
  Matrix U_z, U_r, U_h;  // hidden x hidden
  Vector b_z, b_r, b_h;  // hidden

  static GruParams zeros(Eigen::Index hidden, Eigen::Index input) {
    GruParams p;
    p.W_z = p.W_r = p.W_h = Matrix::Zero(hidden, input);
    p.U_z = p.U_r = p.U_h = Matrix::Zero(hidden, hidden);
    p.b_z = p.b_r = p.b_h = Vector::Zero(hidden);
    return p;
  }

  Eigen::Index hidden_size() const { return b_z.size(); }
  Eigen::Index input_size() const { return W_z.cols(); }

  /// Throws ShapeError unless all nine arrays agree on hidden and input sizes.
  void validate() const {
    const auto h = hidden_size();
    const auto d = input_size();
    auto check = [&](const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
      if (m.rows() != rows || m.cols() != cols) {
        throw ShapeError(std::string("GRU array ") + name + " is " + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()) + ", expected " + std::to_string(rows) +
                         "x" + std::to_string(cols));
      }
    };
    check(W_z, h, d, "W_z");
    check(W_r, h, d, "W_r");
    check(W_h, h, d, "W_h");
    check(U_z, h, h, "U_z");
    check(U_r, h, h, "U_r");
    check(U_h, h, h, "U_h");
    check(b_z, h, 1, "b_z");
    check(b_r, h, 1, "b_r");
    check(b_h, h, 1, "b_h");
  }

  friend bool operator==(const GruParams& a, const GruParams& b) {
    return a.W_z == b.W_z && a.W_r == b.W_r && a.W_h == b.W_h && a.U_z == b.U_z &&
           a.U_r == b.U_r && a.U_h == b.U_h && a.b_z == b.b_z && a.b_r == b.b_r &&
           a.b_h == b.b_h;
  }
};

/// Values cached by one step for the backward pass.
struct GruStepTrace {
  Vector x;
  Vector h_prev;
  Vector z;
  Vector r;
  Vector candidate;
  Vector h;
};

using GruTrace = std::vector<GruStepTrace>;

struct GruStepResult {
  Vector h;
  GruStepTrace trace;
};

inline GruStepResult gru_step(const GruParams& p, const Vector& x, const Vector& h_prev) {
  if (x.size() != p.input_size()) {
    throw ShapeError("GRU input has " + std::to_string(x.size()) + " entries, expected " +
                     std::to_string(p.input_size()));
  }
  if (h_prev.size() != p.hidden_size()) {
    throw ShapeError("GRU state has " + std::to_string(h_prev.size()) + " entries, expected " +
                     std::to_string(p.hidden_size()));
  }
  GruStepTrace t;
  t.x = x;
  t.h_prev = h_prev;
  t.z = sigmoid(Vector(p.W_z * x + p.U_z * h_prev + p.b_z));
  t.r = sigmoid(Vector(p.W_r * x + p.U_r * h_prev + p.b_r));
  t.candidate = (p.W_h * x + p.U_h * t.r.cwiseProduct(h_prev) + p.b_h).array().tanh().matrix();
  t.h = (1.0 - t.z.array()) * t.candidate.array() + t.z.array() * h_prev.array();
  Vector h = t.h;
  return {std::move(h), std::move(t)};
}

struct GruForwardResult {
  std::vector<Vector> outputs;
  GruTrace trace;
};

inline GruForwardResult gru_forward(const GruParams& p, const std::vector<Vector>& inputs,
                                    const Vector& h0) {
  if (inputs.empty()) throw ShapeError("GRU forward pass needs a non-empty input sequence");
  GruForwardResult out;
  out.outputs.reserve(inputs.size());
  out.trace.reserve(inputs.size());
  Vector h = h0;
  for (const auto& x : inputs) {
    auto step = gru_step(p, x, h);
    h = step.h;
    out.outputs.push_back(std::move(step.h));
    out.trace.push_back(std::move(step.trace));
  }
  return out;
}

struct GruGradients {
  GruParams params;
  std::vector<Vector> inputs;
  Vector h0;
};

/// Gradients of sum_t <grad_outputs[t], h_t> with respect to every
/// parameter, every input and the initial state.
inline GruGradients gru_backward(const GruParams& p, const GruTrace& trace,
                                 const std::vector<Vector>& grad_outputs) {
  if (grad_outputs.size() != trace.size()) {
    throw ShapeError("got " + std::to_string(grad_outputs.size()) +
                     " output gradients for a trace of " + std::to_string(trace.size()) +
                     " steps");
  }
  if (trace.empty()) throw ShapeError("cannot backpropagate through an empty trace");

  const auto hidden = p.hidden_size();
  GruGradients g;
  g.params = GruParams::zeros(hidden, p.input_size());
  g.inputs.resize(trace.size());

  Vector dh = Vector::Zero(hidden);
  for (std::size_t i = trace.size(); i-- > 0;) {
    const auto& t = trace[i];
    if (grad_outputs[i].size() != hidden) {
      throw ShapeError("output gradient at step " + std::to_string(i) + " has " +
                       std::to_string(grad_outputs[i].size()) + " entries, expected " +
                       std::to_string(hidden));
    }
    dh += grad_outputs[i];

    const Vector d_candidate = dh.cwiseProduct(Vector::Ones(hidden) - t.z);
    const Vector dz = dh.cwiseProduct(t.h_prev - t.candidate);
    Vector dh_prev = dh.cwiseProduct(t.z);

    const Vector da_h =
        d_candidate.array() * (1.0 - t.candidate.array().square());
    const Vector reset_state = t.r.cwiseProduct(t.h_prev);
    g.params.W_h.noalias() += da_h * t.x.transpose();
    g.params.U_h.noalias() += da_h * reset_state.transpose();
    g.params.b_h += da_h;
    const Vector d_reset_state = p.U_h.transpose() * da_h;
    const Vector dr = d_reset_state.cwiseProduct(t.h_prev);
    dh_prev += d_reset_state.cwiseProduct(t.r);

    const Vector da_z = dz.array() * t.z.array() * (1.0 - t.z.array());
    g.params.W_z.noalias() += da_z * t.x.transpose();
    g.params.U_z.noalias() += da_z * t.h_prev.transpose();
    g.params.b_z += da_z;
    dh_prev.noalias() += p.U_z.transpose() * da_z;

    const Vector da_r = dr.array() * t.r.array() * (1.0 - t.r.array());
    g.params.W_r.noalias() += da_r * t.x.transpose();
    g.params.U_r.noalias() += da_r * t.h_prev.transpose();
    g.params.b_r += da_r;
    dh_prev.noalias() += p.U_r.transpose() * da_r;

    g.inputs[i] = p.W_h.transpose() * da_h + p.W_z.transpose() * da_z + p.W_r.transpose() * da_r;
    dh = std::move(dh_prev);
  }
  g.h0 = std::move(dh);
  return g;
}

}  // namespace bsord
