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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssl/lstm.hpp"
#include "ssl/numerics.hpp"

namespace ssl {

// Gaussian transition head: z_t ~ N(mean, diag(exp(log_var))) with
// mean = W s_t + b, plus z_{t-1} when `residual` is set. `start` is the
// learned z_0 fed to the LSTM (and used as z_0 by the residual term).
struct GaussianTransitionHead {
  using Latent = Vec;
  using Prior = GaussianDist;

  Mat weight;
  Vec bias;
  Vec log_var;
  Vec start;
  bool residual = true;

  // Feed the LSTM z_{t-1} - z_{t-2} instead of z_{t-1}; the dynamics become
  // translation invariant.
  bool increment_input = false;
  // Fixed (untrained) multiplier on the LSTM input, so small latents still
  // move the gates.
  double input_scale = 1.0;

  static GaussianTransitionHead zeros(int latent_dim, int hidden, double log_var = 0.0, bool residual = true,
                                      bool increment_input = false);

  int latent_dim() const { return static_cast<int>(bias.size()); }
  int input_size() const { return latent_dim(); }
  const Vec& start_latent() const { return start; }
  // LSTM input for latent z, whose own predecessor is `before`.
  Vec encode(const Vec& z, const Vec& before) const {
    return increment_input ? Vec(input_scale * (z - before)) : Vec(input_scale * z);
  }

  GaussianDist prior(const Vec& hidden, const Vec& previous) const;
  double log_prob(const Vec& hidden, const Vec& previous, const Vec& z) const;
  Vec draw(const GaussianDist& prior, Rng& rng) const { return mvn_sample(prior, rng); }

  // Adds the gradient of -log p(z | hidden, previous) into `grad` and returns
  // it. d_hidden receives the gradient w.r.t. the hidden state.
  double nll_backward(const Vec& hidden, const Vec& previous, bool previous_is_start, const Vec& z,
                      GaussianTransitionHead& grad, Vec& d_hidden) const;
  void input_backward(const Vec& d_input, bool z_is_start, bool before_is_start, GaussianTransitionHead& grad) const {
    if (z_is_start) grad.start += input_scale * d_input;
    if (increment_input && before_is_start) grad.start -= input_scale * d_input;
  }

  template <class F, class... Heads>
  static void visit(F&& f, Heads&... heads) {
    f(heads.weight...);
    f(heads.bias...);
    f(heads.log_var...);
    f(heads.start...);
  }
};

// Topical transition head: theta_t = softmax(W s_t + b) over K topics. The
// LSTM input is a one-hot over K + 1 symbols, index K being the start token.
struct TopicalTransitionHead {
  using Latent = int;
  using Prior = Vec;

  Mat weight;
  Vec bias;

  static TopicalTransitionHead zeros(int topics, int hidden);

  int num_topics() const { return static_cast<int>(bias.size()); }
  int input_size() const { return num_topics() + 1; }
  int start_latent() const { return num_topics(); }
  Vec encode(int z, int before = 0) const;

  Vec prior(const Vec& hidden, int previous) const;
  double log_prob(const Vec& hidden, int previous, int z) const;
  int draw(const Vec& prior, Rng& rng) const { return categorical_sample(prior, rng); }
  double nll_backward(const Vec& hidden, int previous, bool previous_is_start, int z,
                      TopicalTransitionHead& grad, Vec& d_hidden) const;
  void input_backward(const Vec&, bool, bool, TopicalTransitionHead&) const {}

  template <class F, class... Heads>
  static void visit(F&& f, Heads&... heads) {
    f(heads.weight...);
    f(heads.bias...);
  }
};

// The transition parameters omega: LSTM cell plus output head.
template <class Head>
struct TransitionNet {
  using Latent = typename Head::Latent;
  using Path = std::vector<Latent>;

  LstmParams lstm;
  Head head;

  LstmState initial_state() const { return LstmState::zeros(lstm.hidden_size()); }
  // s_1 = LSTM(s_0, z_0).
  LstmState first_state() const {
    return lstm_step(lstm, initial_state(), head.encode(head.start_latent(), head.start_latent()));
  }
  // `before` is the latent preceding z (the start latent when z = z_1).
  LstmState advance(const LstmState& state, const Latent& z, const Latent& before) const {
    return lstm_step(lstm, state, head.encode(z, before));
  }

  // LSTM states s_1..s_T driving the transition of a length-T path.
  std::vector<LstmState> unroll(const Path& path) const;

  // -log p_omega(z_{1:T}).
  double path_nll(const Path& path) const;

  // Ancestral sample of z_{1:T} from the transition alone.
  Path sample_path(int length, Rng& rng) const;

  // Calls f on matching tensors of every net, in a fixed order.
  template <class F, class... Nets>
  static void visit(F&& f, Nets&... nets) {
    for (int g = 0; g < 4; ++g) f(nets.lstm.weights[g]...);
    for (int g = 0; g < 4; ++g) f(nets.lstm.biases[g]...);
    Head::visit(f, nets.head...);
  }

  TransitionNet zeros_like() const;
  std::size_t parameter_count() const;
};

using GaussianNet = TransitionNet<GaussianTransitionHead>;
using TopicalNet = TransitionNet<TopicalTransitionHead>;

GaussianNet make_gaussian_net(int latent_dim, int hidden, Rng& rng, double log_var = 0.0, bool residual = true,
                              bool increment_input = false);
TopicalNet make_topical_net(int topics, int hidden, Rng& rng);

// p(z_t | z_{1:t-1}) from the head applied to s_t.
template <class Head>
typename Head::Prior transition_prior(const TransitionNet<Head>& net, const LstmState& state,
                                      const typename Head::Latent& previous) {
  return net.head.prior(state.hidden, previous);
}

template <class Head>
struct GradResult {
  TransitionNet<Head> grad;
  double loss = 0.0;  // mean over paths of -log p_omega(z_{1:T})
};

// Exact reverse-mode gradient of the mean path NLL. Paths are split into a
// fixed set of chunks reduced in index order, so results do not depend on
// `threads`.
template <class Head>
GradResult<Head> bptt_grad(const TransitionNet<Head>& net,
                           std::span<const std::vector<typename Head::Latent>> paths, int threads = 1);

enum class OptimizerKind { sgd, adam };

struct OptimConfig {
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  int steps = 50;
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

template <class Head>
struct FitResult {
  TransitionNet<Head> net;
  std::vector<double> losses;  // loss before each optimizer step
  double initial_loss = 0.0;
  double final_loss = 0.0;     // loss of the returned net
};

// Runs config.steps optimizer steps with global-norm clipping and returns the
// iterate with the lowest training loss (the starting point included).
// Throws NumericalError if the loss becomes non-finite; the input net is left
// to the caller as the rollback point.
template <class Head>
FitResult<Head> fit_mle(const TransitionNet<Head>& net, std::span<const std::vector<typename Head::Latent>> paths,
                        const OptimConfig& config, int threads = 1);

}  // namespace ssl
