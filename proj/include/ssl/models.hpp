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
#include <vector>

#include "ssl/numerics.hpp"
#include "ssl/transition.hpp"

namespace ssl {

// Forward messages at one step: alpha = log p(x_t | z_{1:t-1}) and the
// filtered posterior gamma = p(z_t | z_{1:t-1}, x_t).
template <class Gamma>
struct Message {
  double log_alpha;
  Gamma gamma;
};

// x = C z + b + eps, eps ~ N(0, R).
struct GaussianEmission {
  Mat C;
  Vec b;
  Mat R;

  int obs_dim() const { return static_cast<int>(b.size()); }
  int latent_dim() const { return static_cast<int>(C.cols()); }
  void validate() const;
  double log_prob(const Vec& z, const Vec& x) const;
};

// Conjugate update of a Gaussian prior N(m, S) against the emission. Uses the
// gain form with a Joseph-stabilised covariance, which equals
// V = (S^-1 + C' R^-1 C)^-1 and mean V (C' R^-1 (x - b) + S^-1 m).
Message<GaussianDist> gauss_messages(const GaussianDist& prior, const GaussianEmission& emission, const Vec& x);

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Topic-word distributions phi (K x V, rows on the simplex) with the
// word-topic counts they were estimated from.
struct TopicMatrix {
  Mat phi;
  CountMatrix counts;
  double beta = 1.01;

  static TopicMatrix uniform(int topics, int vocab, double beta = 1.01);
  int num_topics() const { return static_cast<int>(phi.rows()); }
  int vocab_size() const { return static_cast<int>(phi.cols()); }

  // Replaces counts with those of the given assignments and refreshes phi.
  void rebuild(std::span<const std::vector<int>> documents, std::span<const std::vector<int>> topics);
};

// Smallest phi entry after a MAP update; rows are renormalised afterwards.
inline constexpr double kPhiFloor = 1e-12;

// Dirichlet MAP estimate of phi; beta <= 1 uses the posterior mean instead.
Mat topic_map_update(const CountMatrix& counts, double beta);

// Throws NumericalError("zero-probability observation") when alpha = -inf.
Message<Vec> topical_messages(const Vec& theta, const TopicMatrix& topics, int word);

struct EmissionFit {
  GaussianEmission emission;
  bool ridge_applied = false;
};

// Least-squares regression of x on [z; 1]. A rank-deficient design gets a
// 1e-6 ridge (flagged in the result).
EmissionFit gauss_emission_mle(std::span<const Vec> latents, std::span<const Vec> observations);

// Gaussian SSL: LSTM transition with Gaussian head, linear-Gaussian emission.
struct GaussianSsl {
  using Latent = Vec;
  using Observation = Vec;
  using Gamma = GaussianDist;
  using Prior = GaussianDist;
  struct Carry {
    LstmState lstm;
    Vec previous;
  };

  GaussianNet net;
  GaussianEmission emission;

  Carry initial_carry() const { return {net.first_state(), net.head.start}; }
  Carry advance(const Carry& c, const Vec& z) const { return {net.advance(c.lstm, z, c.previous), z}; }
  GaussianDist prior(const Carry& c) const { return net.head.prior(c.lstm.hidden, c.previous); }
  Message<GaussianDist> message(const Carry& c, const Vec& x) const { return gauss_messages(prior(c), emission, x); }
  Vec draw(const GaussianDist& gamma, Rng& rng) const { return mvn_sample(gamma, rng); }
  double emission_log_prob(const Vec& z, const Vec& x) const { return emission.log_prob(z, x); }
  Vec prior_mean(const GaussianDist& p) const { return p.mean; }
};

// Topical SSL: softmax topic transition, multinomial word emission.
struct TopicalSsl {
  using Latent = int;
  using Observation = int;
  using Gamma = Vec;
  using Prior = Vec;
  using Carry = LstmState;

  TopicalNet net;
  TopicMatrix topics;

  Carry initial_carry() const { return net.first_state(); }
  Carry advance(const Carry& c, int z) const { return net.advance(c, z, 0); }  // topical input ignores `before`
  Vec prior(const Carry& c) const { return net.head.prior(c.hidden, 0); }
  // Returns log_alpha = -inf (and an empty gamma) instead of throwing, so a
  // single impossible particle does not abort a pass.
  Message<Vec> message(const Carry& c, int word) const;
  int draw(const Vec& gamma, Rng& rng) const { return categorical_sample(gamma, rng); }
  double emission_log_prob(int z, int word) const { return std::log(topics.phi(z, word)); }
  int prior_mean(const Vec& theta) const;  // mode
};

// Linear-Gaussian transition N(A z_{t-1}, Q) from a fixed z_0, used in place
// of the LSTM head when comparing against a Kalman filter.
struct LinearGaussianModel {
  using Latent = Vec;
  using Observation = Vec;
  using Gamma = GaussianDist;
  using Prior = GaussianDist;
  using Carry = Vec;

  Mat A;
  Mat Q;
  Vec z0;
  GaussianEmission emission;

  Carry initial_carry() const { return z0; }
  Carry advance(const Carry&, const Vec& z) const { return z; }
  GaussianDist prior(const Carry& c) const { return {A * c, Q}; }
  Message<GaussianDist> message(const Carry& c, const Vec& x) const { return gauss_messages(prior(c), emission, x); }
  Vec draw(const GaussianDist& gamma, Rng& rng) const { return mvn_sample(gamma, rng); }
  double emission_log_prob(const Vec& z, const Vec& x) const { return emission.log_prob(z, x); }
  Vec prior_mean(const GaussianDist& p) const { return p.mean; }
};

}  // namespace ssl
