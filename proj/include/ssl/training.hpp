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
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ssl/inference.hpp"
#include "ssl/models.hpp"
#include "ssl/transition.hpp"

namespace ssl {

enum class ScheduleKind { linear, doubling };
enum class InferenceKind { pg, factored };
enum class HeadKind { gaussian, topical };

std::string to_string(ScheduleKind kind);
std::string to_string(InferenceKind kind);
std::string to_string(HeadKind kind);
ScheduleKind schedule_from_string(const std::string& name);
InferenceKind inference_from_string(const std::string& name);
HeadKind head_from_string(const std::string& name);

struct TrainConfig {
  int em_iterations = 50;
  int particles_start = 1;
  int particles_max = 8;
  ScheduleKind schedule = ScheduleKind::linear;
  int doubling_ramp = 0;  // 0: spread the doublings over the run
  InferenceKind inference = InferenceKind::pg;
  int sweeps = 1;         // S-step sweeps per sequence per iteration
  double resample_threshold = kAlwaysResample;  // S-step ESS fraction; >= 1 resamples every step
  OptimConfig optimizer;
  std::uint64_t seed = 1;
  HeadKind head = HeadKind::gaussian;
  int threads = 1;
#ifdef NDEBUG
  bool check_improvement = false;
#else
  bool check_improvement = true;
#endif

  void validate() const;
};

int particle_schedule(int epoch, const TrainConfig& config);

struct IterationMetrics {
  int iter = 0;
  int particles = 0;
  double mean_log_marginal = 0.0;
  double m_step_loss = 0.0;
  double wall_ms = 0.0;
};

void write_metrics_line(const IterationMetrics& m, std::ostream& out);

template <class Model>
struct TrainState {
  int epoch = 0;
  std::vector<LatentPath<Model>> paths;  // previous S-step draw per sequence
  std::vector<IterationMetrics> metrics;
};

// Model initialisation. Gaussian emission starts at C = I, b = 0, R = emission_var I.
struct GaussianInit {
  int latent_dim = 2;
  int hidden = 4;
  double transition_var = 0.005;
  double emission_var = 0.01;
  bool residual = true;
  bool increment_input = true;
  double input_scale = 1.0;
};

struct TopicalInit {
  int topics = 5;
  int hidden = 16;
  double beta = 1.01;
};

GaussianSsl init_gaussian_ssl(const GaussianInit& init, std::span<const std::vector<Vec>> sequences, Rng rng);
TopicalSsl init_topical_ssl(const TopicalInit& init, int vocab_size, Rng rng);

// Objective the M-step maximises: sum log p(z*) + sum log p(x | z*), plus the
// Dirichlet log prior on phi for the topical head.
double joint_objective(const GaussianSsl& model, std::span<const std::vector<Vec>> data,
                       std::span<const LatentPath<GaussianSsl>> paths);
double joint_objective(const TopicalSsl& model, std::span<const std::vector<int>> data,
                       std::span<const LatentPath<TopicalSsl>> paths);

// Runs EM iterations state.epoch .. config.em_iterations - 1 in place. On an
// abort the model holds the parameters from before the failing M-step.
// Metrics lines go to `metrics` when non-null.
template <class Model>
void stochastic_em(Model& model, std::span<const std::vector<typename Model::Observation>> data,
                   const TrainConfig& config, TrainState<Model>& state, std::ostream* metrics = nullptr);

template <class Model>
struct TrainResult {
  Model model;
  TrainState<Model> state;
};

template <class Model>
TrainResult<Model> stochastic_em(const Model& initial, std::span<const std::vector<typename Model::Observation>> data,
                                 const TrainConfig& config, std::ostream* metrics = nullptr) {
  TrainResult<Model> out{initial, {}};
  stochastic_em(out.model, data, config, out.state, metrics);
  return out;
}

// Predictive of z_{t+1} given x_{1:t}: every particle is pushed through the
// transition and the results mixed by the final weights.
struct FilterPrediction {
  Vec filtered_mean;         // E[z_t | x_{1:t}]
  GaussianDist next_state;   // moment-matched mixture for z_{t+1}
  GaussianDist next_observation;
};

template <class Model>
FilterPrediction filter_predict(const Model& model, std::span<const Vec> prefix, int num_particles, Rng& rng) {
  if (prefix.empty()) throw DataError("filter_predict: empty prefix");
  const auto res = smc_pass(model, prefix, num_particles, rng);
  const auto& sys = res.system;
  const int t = sys.num_steps() - 1;
  const int k = static_cast<int>(sys.particles[t][0].size());
  FilterPrediction out;
  out.filtered_mean = Vec::Zero(k);
  Vec mean = Vec::Zero(k);
  Mat second = Mat::Zero(k, k);
  for (int p = 0; p < sys.num_particles(); ++p) {
    const double w = sys.norm_weights[t][p];
    if (w == 0.0) continue;
    out.filtered_mean += w * sys.particles[t][p];
    const GaussianDist next = model.prior(model.advance(sys.carries[t][p], sys.particles[t][p]));
    mean += w * next.mean;
    second += w * (next.cov + next.mean * next.mean.transpose());
  }
  Mat cov = second - mean * mean.transpose();
  cov = 0.5 * (cov + cov.transpose());
  out.next_state = {mean, cov};
  const GaussianEmission& e = model.emission;
  out.next_observation = {e.C * mean + e.b, e.C * cov * e.C.transpose() + e.R};
  return out;
}

enum class RolloutMode { sample, mean };

// Feeds the transition head's draw (or mean/mode) back into the LSTM for
// `horizon` steps, starting from the carry that drives the next step.
template <StateSpaceModel Model>
LatentPath<Model> blind_rollout(const Model& model, typename Model::Carry carry, int horizon, RolloutMode mode,
                                Rng& rng) {
  if (horizon < 0) throw DataError("blind_rollout: negative horizon");
  LatentPath<Model> out;
  out.reserve(static_cast<std::size_t>(horizon));
  for (int h = 0; h < horizon; ++h) {
    const auto prior = model.prior(carry);
    out.push_back(mode == RolloutMode::mean ? model.prior_mean(prior) : model.draw(prior, rng));
    carry = model.advance(carry, out.back());
  }
  return out;
}

}  // namespace ssl
