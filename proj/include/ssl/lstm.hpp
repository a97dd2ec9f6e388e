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

#pragma once

#include <array>
#include <vector>

#include "ssl/numerics.hpp"

namespace ssl {

enum Gate : int { kInputGate = 0, kForgetGate = 1, kOutputGate = 2, kCandidate = 3 };

// Single-layer LSTM cell. Every gate maps the concatenation [hidden; input]
// through its own hidden x (hidden + input) matrix. The forget gate also
// receives a fixed (untrained) scalar offset.
struct LstmParams {
  std::array<Mat, 4> weights;
  std::array<Vec, 4> biases;
  double forget_bias_offset = 0.0;

  int hidden_size() const { return static_cast<int>(biases[0].size()); }
  int input_size() const { return static_cast<int>(weights[0].cols()) - hidden_size(); }

  static LstmParams zeros(int hidden, int input);
  // Weights uniform in +-1/sqrt(hidden + input), forget bias +1, other biases 0.
  static LstmParams random(int hidden, int input, Rng& rng);

  // Throws ShapeError if the tensors disagree.
  void validate() const;
};

struct LstmState {
  Vec hidden;
  Vec cell;

  static LstmState zeros(int hidden) { return {Vec::Zero(hidden), Vec::Zero(hidden)}; }
};

LstmState lstm_step(const LstmParams& params, const LstmState& state, const Vec& input);

// out[i] = lstm_step(out[i-1], inputs[i]) with out[-1] = initial. Callers put
// the start input (embedding or start token) at inputs[0].
std::vector<LstmState> lstm_unroll(const LstmParams& params, const std::vector<Vec>& inputs,
                                   const LstmState& initial);

// Intermediate values of one forward step, kept for backpropagation.
struct LstmStepCache {
  Vec joint;  // [hidden_prev; input]
  Vec cell_prev;
  std::array<Vec, 4> gates;  // post-activation
  Vec cell;
  Vec tanh_cell;
  Vec hidden;
};

LstmStepCache lstm_forward_cached(const LstmParams& params, const LstmState& state, const Vec& input);

// Backpropagates d_hidden/d_cell (gradients w.r.t. this step's outputs) into
// `grad` and returns the gradients for the previous state and the input.
struct LstmStepGrad {
  Vec d_hidden_prev;
  Vec d_cell_prev;
  Vec d_input;
};
LstmStepGrad lstm_backward(const LstmParams& params, const LstmStepCache& cache,
                           const Vec& d_hidden, const Vec& d_cell, LstmParams& grad);

}  // namespace ssl
