/*
 * Copyright 2026 The sslstm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ssl/lstm.hpp"

#include <cmath>

namespace ssl {
namespace {

Vec sigmoid(const Vec& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

}  // namespace

LstmParams LstmParams::zeros(int hidden, int input) {
  LstmParams p;
  for (int g = 0; g < 4; ++g) {
    p.weights[g] = Mat::Zero(hidden, hidden + input);
    p.biases[g] = Vec::Zero(hidden);
  }
  return p;
}

LstmParams LstmParams::random(int hidden, int input, Rng& rng) {
  LstmParams p = zeros(hidden, input);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden + input));
  for (int g = 0; g < 4; ++g) {
    for (Eigen::Index j = 0; j < p.weights[g].cols(); ++j) {
      for (Eigen::Index i = 0; i < p.weights[g].rows(); ++i) {
        p.weights[g](i, j) = scale * (2.0 * rng.uniform() - 1.0);
      }
    }
  }
  p.biases[kForgetGate].setConstant(1.0);
  return p;
}

void LstmParams::validate() const {
  const int h = hidden_size();
  const auto cols = weights[0].cols();
  if (cols < h) throw ShapeError("lstm: weight matrix narrower than hidden size");
  for (int g = 0; g < 4; ++g) {
    if (weights[g].rows() != h || weights[g].cols() != cols || biases[g].size() != h) {
      throw ShapeError("lstm: inconsistent gate shapes");
    }
  }
}

LstmStepCache lstm_forward_cached(const LstmParams& params, const LstmState& state, const Vec& input) {
  const int h = params.hidden_size();
  if (input.size() != params.input_size()) throw ShapeError("lstm_step: input size mismatch");
  if (state.hidden.size() != h || state.cell.size() != h) throw ShapeError("lstm_step: state size mismatch");

  LstmStepCache c;
  c.joint.resize(h + input.size());
  c.joint << state.hidden, input;
  c.cell_prev = state.cell;

  c.gates[kInputGate] = sigmoid(params.weights[kInputGate] * c.joint + params.biases[kInputGate]);
  c.gates[kForgetGate] = sigmoid(params.weights[kForgetGate] * c.joint + params.biases[kForgetGate] +
                                 Vec::Constant(h, params.forget_bias_offset));
  c.gates[kOutputGate] = sigmoid(params.weights[kOutputGate] * c.joint + params.biases[kOutputGate]);
  c.gates[kCandidate] = (params.weights[kCandidate] * c.joint + params.biases[kCandidate]).array().tanh();

  c.cell = c.gates[kForgetGate].cwiseProduct(state.cell) + c.gates[kInputGate].cwiseProduct(c.gates[kCandidate]);
  c.tanh_cell = c.cell.array().tanh();
  c.hidden = c.gates[kOutputGate].cwiseProduct(c.tanh_cell);
  return c;
}

LstmState lstm_step(const LstmParams& params, const LstmState& state, const Vec& input) {
  LstmStepCache c = lstm_forward_cached(params, state, input);
  return {std::move(c.hidden), std::move(c.cell)};
}

std::vector<LstmState> lstm_unroll(const LstmParams& params, const std::vector<Vec>& inputs,
                                   const LstmState& initial) {
  if (inputs.empty()) throw ShapeError("lstm_unroll: empty input sequence");
  std::vector<LstmState> out;
  out.reserve(inputs.size());
  const LstmState* prev = &initial;
  for (const Vec& x : inputs) {
    out.push_back(lstm_step(params, *prev, x));
    prev = &out.back();
  }
  return out;
}

LstmStepGrad lstm_backward(const LstmParams& params, const LstmStepCache& c, const Vec& d_hidden,
                           const Vec& d_cell, LstmParams& grad) {
  const int h = params.hidden_size();
  const Vec& ig = c.gates[kInputGate];
  const Vec& fg = c.gates[kForgetGate];
  const Vec& og = c.gates[kOutputGate];
  const Vec& cand = c.gates[kCandidate];

  const Vec d_out = d_hidden.cwiseProduct(c.tanh_cell);
  const Vec dc = d_cell + d_hidden.cwiseProduct(og).cwiseProduct((1.0 - c.tanh_cell.array().square()).matrix());

  std::array<Vec, 4> d_pre;
  d_pre[kInputGate] = dc.cwiseProduct(cand).array() * ig.array() * (1.0 - ig.array());
  d_pre[kForgetGate] = dc.cwiseProduct(c.cell_prev).array() * fg.array() * (1.0 - fg.array());
  d_pre[kOutputGate] = d_out.array() * og.array() * (1.0 - og.array());
  d_pre[kCandidate] = dc.cwiseProduct(ig).array() * (1.0 - cand.array().square());

  Vec d_joint = Vec::Zero(c.joint.size());
  for (int g = 0; g < 4; ++g) {
    grad.weights[g].noalias() += d_pre[g] * c.joint.transpose();
    grad.biases[g] += d_pre[g];
    d_joint.noalias() += params.weights[g].transpose() * d_pre[g];
  }

  LstmStepGrad out;
  out.d_hidden_prev = d_joint.head(h);
  out.d_input = d_joint.tail(c.joint.size() - h);
  out.d_cell_prev = dc.cwiseProduct(fg);
  return out;
}

}  // namespace ssl
