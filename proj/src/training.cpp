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

#include "ssl/training.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "ssl/parallel.hpp"

namespace ssl {

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::linear ? "linear" : "doubling"; }
std::string to_string(InferenceKind kind) { return kind == InferenceKind::pg ? "pg" : "factored"; }
std::string to_string(HeadKind kind) { return kind == HeadKind::gaussian ? "gaussian" : "topical"; }

ScheduleKind schedule_from_string(const std::string& name) {
  if (name == "linear") return ScheduleKind::linear;
  if (name == "doubling") return ScheduleKind::doubling;
  throw DataError("unknown schedule '" + name + "'");
}

InferenceKind inference_from_string(const std::string& name) {
  if (name == "pg") return InferenceKind::pg;
  if (name == "factored") return InferenceKind::factored;
  throw DataError("unknown inference '" + name + "'");
}

HeadKind head_from_string(const std::string& name) {
  if (name == "gaussian") return HeadKind::gaussian;
  if (name == "topical") return HeadKind::topical;
  throw DataError("unknown head '" + name + "'");
}

void TrainConfig::validate() const {
  if (em_iterations < 0) throw DataError("em_iterations must be nonnegative");
  if (particles_start < 1) throw DataError("particles_start must be positive");
  if (particles_max < particles_start) throw DataError("particles_start must not exceed particles_max");
  if (doubling_ramp < 0) throw DataError("doubling_ramp must be nonnegative");
  if (sweeps < 1) throw DataError("sweeps must be positive");
  if (!(resample_threshold >= 0.0)) throw DataError("resample_threshold must be nonnegative");
  if (threads < 1) throw DataError("threads must be positive");
  optimizer.validate();
}

int particle_schedule(int epoch, const TrainConfig& config) {
  if (epoch < 0) throw DataError("particle_schedule: negative epoch");
  const int K = config.particles_max;
  const int start = config.particles_start;
  const int last = std::max(1, config.em_iterations - 1);
  if (config.schedule == ScheduleKind::linear) {
    const long long step = static_cast<long long>(epoch) * (K - start) / last;
    return static_cast<int>(std::min<long long>(K, start + step));
  }
  if (epoch >= last) return K;
  int ramp = config.doubling_ramp;
  if (ramp == 0) {
    const int doublings = std::bit_width(static_cast<unsigned>(std::max(1, (K - 1) / start)));
    ramp = std::max(1, last / std::max(1, doublings));
  }
  const int shift = std::min(epoch / ramp, 30);
  const long long p = static_cast<long long>(start) << shift;
  return static_cast<int>(std::min<long long>(K, p));
}

void write_metrics_line(const IterationMetrics& m, std::ostream& out) {
  char buffer[256];
  std::snprintf(buffer, sizeof buffer,
                "{\"iter\":%d,\"P\":%d,\"mean_log_marginal\":%.17g,\"m_step_loss\":%.17g,\"wall_ms\":%.3f}\n", m.iter,
                m.particles, m.mean_log_marginal, m.m_step_loss, m.wall_ms);
  out << buffer;
}

GaussianSsl init_gaussian_ssl(const GaussianInit& init, std::span<const std::vector<Vec>> sequences, Rng rng) {
  if (sequences.empty() || sequences[0].empty()) throw DataError("init: empty dataset");
  if (!(init.transition_var > 0.0) || !(init.emission_var > 0.0)) throw DataError("init: variances must be positive");
  const int d = static_cast<int>(sequences[0][0].size());
  const int k = init.latent_dim;
  GaussianSsl model;
  Rng net_rng = rng.split("net");
  model.net = make_gaussian_net(k, init.hidden, net_rng, std::log(init.transition_var), init.residual,
                                init.increment_input);
  model.emission.C = Mat::Identity(d, k);
  model.emission.b = Vec::Zero(d);
  model.emission.R = init.emission_var * Mat::Identity(d, d);
  // z_0 starts at the mean first observation, projected onto the latent axes.
  Vec first = Vec::Zero(d);
  for (const auto& seq : sequences) first += seq.at(0);
  first /= static_cast<double>(sequences.size());
  model.net.head.start = model.emission.C.transpose() * first;
  model.net.head.input_scale = init.input_scale;
  return model;
}

TopicalSsl init_topical_ssl(const TopicalInit& init, int vocab_size, Rng rng) {
  if (init.topics < 1 || vocab_size < 1) throw DataError("init: topics and vocabulary must be positive");
  TopicalSsl model;
  Rng net_rng = rng.split("net");
  model.net = make_topical_net(init.topics, init.hidden, net_rng);
  model.topics = TopicMatrix::uniform(init.topics, vocab_size, init.beta);
  return model;
}

double joint_objective(const GaussianSsl& model, std::span<const std::vector<Vec>> data,
                       std::span<const LatentPath<GaussianSsl>> paths) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total -= model.net.path_nll(paths[i]);
    for (std::size_t t = 0; t < data[i].size(); ++t) total += model.emission.log_prob(paths[i][t], data[i][t]);
  }
  return total;
}

double joint_objective(const TopicalSsl& model, std::span<const std::vector<int>> data,
                       std::span<const LatentPath<TopicalSsl>> paths) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total -= model.net.path_nll(paths[i]);
    for (std::size_t t = 0; t < data[i].size(); ++t) total += std::log(model.topics.phi(paths[i][t], data[i][t]));
  }
  if (model.topics.beta > 1.0) total += (model.topics.beta - 1.0) * model.topics.phi.array().log().sum();
  return total;
}

namespace {

void update_emission(GaussianSsl& model, std::span<const std::vector<Vec>> data,
                     std::span<const LatentPath<GaussianSsl>> paths) {
  std::vector<Vec> z, x;
  for (std::size_t i = 0; i < data.size(); ++i) {
    z.insert(z.end(), paths[i].begin(), paths[i].end());
    x.insert(x.end(), data[i].begin(), data[i].end());
  }
  model.emission = gauss_emission_mle(z, x).emission;
}

void update_emission(TopicalSsl& model, std::span<const std::vector<int>> data,
                     std::span<const LatentPath<TopicalSsl>> paths) {
  model.topics.rebuild(data, paths);
}

template <class Model>
LatentPath<Model> draw_sequence(const Model& model, std::span<const typename Model::Observation> x,
                                const LatentPath<Model>& cached, int P, const TrainConfig& config, Rng& rng,
                                double& log_marginal) {
  LatentPath<Model> path = cached;
  for (int s = 0; s < config.sweeps; ++s) {
    if (config.inference == InferenceKind::factored) {
      auto draw = factored_draw(model, x, path, rng);
      path = std::move(draw.path);
      log_marginal = draw.log_alpha_sum;
    } else {
      const auto ref = make_reference(model, std::move(path));
      const auto res = conditional_smc_pass(model, x, ref, P, rng, Proposal::optimal, config.resample_threshold);
      path = draw_final_path(res.system, rng);
      log_marginal = res.log_marginal;
    }
  }
  return path;
}

template <class Model>
LatentPath<Model> initial_path(const Model& model, std::span<const typename Model::Observation> x, int P, Rng& rng) {
  const auto res = smc_pass(model, x, P, rng);
  return draw_final_path(res.system, rng);
}

// Runs `body` and retries once on a fresh stream if the particles collapse.
template <class Body>
auto with_retry(std::size_t sequence, const Rng& stream, Body&& body) {
  Rng rng = stream;
  try {
    return body(rng);
  } catch (const ParticleCollapse&) {
    Rng retry = stream.split("retry");
    try {
      return body(retry);
    } catch (const ParticleCollapse& e) {
      throw NumericalError("sequence " + std::to_string(sequence) + ": " + e.what() + " (after retry)");
    }
  }
}

}  // namespace

template <class Model>
void stochastic_em(Model& model, std::span<const std::vector<typename Model::Observation>> data,
                   const TrainConfig& config, TrainState<Model>& state, std::ostream* metrics) {
  config.validate();
  if (data.empty()) throw DataError("stochastic_em: empty dataset");
  for (const auto& seq : data) {
    if (seq.empty()) throw DataError("stochastic_em: empty sequence");
  }
  const Rng root(config.seed);
  const std::size_t n = data.size();

  if (state.epoch >= config.em_iterations) return;

  if (state.paths.empty()) {
    const Rng init_stream = root.split("init_paths");
    state.paths.resize(n);
    parallel_for(n, config.threads, [&](std::size_t i) {
      state.paths[i] = with_retry(i, init_stream.split(i), [&](Rng& rng) {
        return initial_path(model, std::span(data[i]), config.particles_start, rng);
      });
    });
  }
  if (state.paths.size() != n) throw DataError("stochastic_em: cached path count does not match the dataset");
  for (std::size_t i = 0; i < n; ++i) {
    if (state.paths[i].size() != data[i].size()) throw DataError("stochastic_em: cached path length mismatch");
  }

  const Rng sstep = root.split("sstep");
  for (; state.epoch < config.em_iterations; ++state.epoch) {
    const auto started = std::chrono::steady_clock::now();
    const int P = particle_schedule(state.epoch, config);

    // S-step. Parameters are read-only here.
    std::vector<LatentPath<Model>> drawn(n);
    std::vector<double> log_marginal(n, 0.0);
    const Rng epoch_stream = sstep.split(static_cast<std::uint64_t>(state.epoch));
    parallel_for(n, config.threads, [&](std::size_t i) {
      drawn[i] = with_retry(i, epoch_stream.split(i), [&](Rng& rng) {
        return draw_sequence(model, std::span(data[i]), state.paths[i], P, config, rng, log_marginal[i]);
      });
    });

    // M-step.
    const Model before = model;
    const double objective_before =
        config.check_improvement ? joint_objective(model, data, std::span<const LatentPath<Model>>(drawn)) : 0.0;
    double m_loss = 0.0;
    try {
      auto fit = fit_mle(model.net, std::span<const LatentPath<Model>>(drawn), config.optimizer, config.threads);
      model.net = std::move(fit.net);
      m_loss = fit.final_loss;
      update_emission(model, data, drawn);
      if (!std::isfinite(m_loss)) throw NumericalError("non-finite M-step loss");
    } catch (const NumericalError& e) {
      model = before;
      throw NumericalError("M-step aborted at iteration " + std::to_string(state.epoch) + ", parameters rolled back: " +
                           e.what());
    }
    if (config.check_improvement) {
      const double after = joint_objective(model, data, std::span<const LatentPath<Model>>(drawn));
      if (after < objective_before - 1e-6 - 1e-12 * std::abs(objective_before)) {
        model = before;
        throw NumericalError("M-step decreased the joint objective at iteration " + std::to_string(state.epoch));
      }
    }
    state.paths = std::move(drawn);

    IterationMetrics m;
    m.iter = state.epoch;
    m.particles = P;
    double sum = 0.0;
    for (double v : log_marginal) sum += v;
    m.mean_log_marginal = sum / static_cast<double>(n);
    m.m_step_loss = m_loss;
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    state.metrics.push_back(m);
    if (metrics != nullptr) {
      write_metrics_line(m, *metrics);
      metrics->flush();
    }
  }
}

template void stochastic_em<GaussianSsl>(GaussianSsl&, std::span<const std::vector<Vec>>, const TrainConfig&,
                                         TrainState<GaussianSsl>&, std::ostream*);
template void stochastic_em<TopicalSsl>(TopicalSsl&, std::span<const std::vector<int>>, const TrainConfig&,
                                        TrainState<TopicalSsl>&, std::ostream*);

}  // namespace ssl
