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

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ssl/errors.hpp"
#include "ssl/models.hpp"
#include "ssl/numerics.hpp"

namespace ssl {

// What sequential Monte Carlo needs from a model: a deterministic recurrent
// carry (the LSTM state s_t plus whatever the head reads), the forward
// messages given that carry, and a sampler for gamma.
template <class M>
concept StateSpaceModel = requires(const M& m, const typename M::Carry& carry, const typename M::Latent& z,
                                   const typename M::Observation& x, const typename M::Gamma& gamma, Rng& rng) {
  { m.initial_carry() } -> std::convertible_to<typename M::Carry>;
  { m.advance(carry, z) } -> std::convertible_to<typename M::Carry>;
  { m.message(carry, x) } -> std::convertible_to<Message<typename M::Gamma>>;
  { m.draw(gamma, rng) } -> std::convertible_to<typename M::Latent>;
};

// Models whose transition prior can itself serve as proposal.
template <class M>
concept PriorProposalModel = StateSpaceModel<M> && requires(const M& m, const typename M::Carry& carry,
                                                            const typename M::Latent& z,
                                                            const typename M::Observation& x) {
  { m.prior(carry) } -> std::convertible_to<typename M::Gamma>;
  { m.emission_log_prob(z, x) } -> std::convertible_to<double>;
};

template <class Model>
using LatentPath = std::vector<typename Model::Latent>;

// Storage is step-major: field[t][p].
template <class Model>
struct ParticleSystem {
  using Latent = typename Model::Latent;
  using Carry = typename Model::Carry;

  std::vector<std::vector<Latent>> particles;
  // ancestors[t][p]: slot at step t-1 that particle p at step t extends.
  // Identity at t = 0, where every particle starts from the shared z_0.
  std::vector<std::vector<int>> ancestors;
  std::vector<std::vector<double>> log_weights;   // log alpha-tilde_t^p, plus carried log W_{t-1}^p when not resampled
  std::vector<std::vector<double>> norm_weights;  // alpha_t^p
  std::vector<double> log_alpha_tilde;            // log sum_p W_{t-1}^p alpha-tilde_t^p (W uniform after resampling)
  std::vector<char> resampled;                    // whether ancestors at t were drawn (always 0 at t = 0)
  std::vector<std::vector<Carry>> carries;        // s_t used for step t messages

  int num_particles() const { return particles.empty() ? 0 : static_cast<int>(particles[0].size()); }
  int num_steps() const { return static_cast<int>(particles.size()); }
};

template <class Model>
struct SmcResult {
  ParticleSystem<Model> system;
  double log_marginal = 0.0;  // sum_t log_alpha_tilde[t]
};

template <class Model>
struct ReferencePath {
  LatentPath<Model> path;
  std::vector<typename Model::Carry> carries;  // carries[t] drives step t
};

enum class Proposal { optimal, transition_prior };

// Resample before step t only when ESS(W_{t-1}) < threshold * P. Any
// threshold >= 1 resamples at every step.
inline constexpr double kAlwaysResample = 1.0;

// 1 / sum_p w_p^2 for simplex weights.
inline double effective_sample_size(std::span<const double> norm_weights) {
  double sum_sq = 0.0;
  for (double w : norm_weights) sum_sq += w * w;
  return 1.0 / sum_sq;
}

template <StateSpaceModel Model>
ReferencePath<Model> make_reference(const Model& model, LatentPath<Model> path) {
  ReferencePath<Model> ref;
  ref.carries.reserve(path.size());
  for (std::size_t t = 0; t < path.size(); ++t) {
    ref.carries.push_back(t == 0 ? model.initial_carry() : model.advance(ref.carries.back(), path[t - 1]));
  }
  ref.path = std::move(path);
  return ref;
}

// Follows ancestor pointers back from `final_index` at the last step.
template <class Model>
LatentPath<Model> trace_path(const ParticleSystem<Model>& system, int final_index) {
  const int T = system.num_steps();
  const int P = system.num_particles();
  if (final_index < 0 || final_index >= P) throw DataError("trace_path: final index out of range");
  LatentPath<Model> path(static_cast<std::size_t>(T));
  int index = final_index;
  for (int t = T - 1; t >= 0; --t) {
    path[t] = system.particles[t][index];
    if (t > 0) {
      index = system.ancestors[t][index];
      if (index < 0 || index >= P) throw DataError("trace_path: corrupt ancestor index at t=" + std::to_string(t));
    }
  }
  return path;
}

namespace detail {

// Shared propagation loop for plain and conditional SMC. With a reference,
// slot 0 keeps ancestor 0 and the reference latents at every step.
template <StateSpaceModel Model>
SmcResult<Model> propagate(const Model& model, std::span<const typename Model::Observation> observations,
                           int num_particles, Rng& rng, const ReferencePath<Model>* reference,
                           Proposal proposal, double resample_threshold) {
  if (num_particles < 1) throw DataError("smc: need at least one particle");
  if (observations.empty()) throw DataError("smc: empty observation sequence");
  const int T = static_cast<int>(observations.size());
  const int P = num_particles;
  if (reference != nullptr && static_cast<int>(reference->path.size()) != T) {
    throw DataError("conditional smc: reference length does not match the observations");
  }

  using Carry = typename Model::Carry;
  using Gamma = typename Model::Gamma;
  SmcResult<Model> result;
  ParticleSystem<Model>& sys = result.system;
  sys.particles.resize(T);
  sys.ancestors.assign(T, std::vector<int>(P));
  sys.log_weights.assign(T, std::vector<double>(P));
  sys.norm_weights.resize(T);
  sys.log_alpha_tilde.resize(T);
  sys.carries.resize(T);
  sys.resampled.assign(T, 0);
  const bool always = !(resample_threshold < 1.0);
  const double log_p = std::log(static_cast<double>(P));
  const int first_free = reference != nullptr ? 1 : 0;

  // Children of the same parent share carry and message; only draws differ.
  std::vector<int> group_of(P);
  std::vector<int> group_parent;
  std::vector<Message<Gamma>> group_message;
  std::vector<Carry> group_carry;

  for (int t = 0; t < T; ++t) {
    std::vector<int>& anc = sys.ancestors[t];
    // A zero-weight slot holds no valid latent, so it forces a resample.
    const bool resample =
        t > 0 && (always || effective_sample_size(sys.norm_weights[t - 1]) < resample_threshold * P ||
                  std::find(sys.norm_weights[t - 1].begin(), sys.norm_weights[t - 1].end(), 0.0) !=
                      sys.norm_weights[t - 1].end());
    if (!resample) {
      for (int p = 0; p < P; ++p) anc[p] = p;
    } else {
      sys.resampled[t] = 1;
      if (reference != nullptr) anc[0] = 0;
      const CategoricalSampler sampler(sys.norm_weights[t - 1]);
      for (int p = first_free; p < P; ++p) anc[p] = sampler.draw(rng);
    }
    const bool carry_weights = t > 0 && !resample;

    group_parent.clear();
    group_message.clear();
    group_carry.clear();
    std::vector<int> group_by_parent(P, -1);
    for (int p = 0; p < P; ++p) {
      const int parent = t == 0 ? 0 : anc[p];
      int& g = group_by_parent[parent];
      if (g < 0) {
        g = static_cast<int>(group_parent.size());
        group_parent.push_back(parent);
        if (t == 0) {
          group_carry.push_back(reference != nullptr ? reference->carries[0] : model.initial_carry());
        } else if (reference != nullptr && parent == 0) {
          group_carry.push_back(reference->carries[t]);
        } else {
          group_carry.push_back(model.advance(sys.carries[t - 1][parent], sys.particles[t - 1][parent]));
        }
        if (proposal == Proposal::optimal) {
          group_message.push_back(model.message(group_carry.back(), observations[t]));
        } else if constexpr (PriorProposalModel<Model>) {
          group_message.push_back({0.0, model.prior(group_carry.back())});
        } else {
          throw DataError("smc: model does not support the transition-prior proposal");
        }
      }
      group_of[p] = g;
    }

    std::vector<typename Model::Latent>& row = sys.particles[t];
    row.resize(P);
    std::vector<double>& logw = sys.log_weights[t];
    for (int p = 0; p < P; ++p) {
      const Message<Gamma>& msg = group_message[group_of[p]];
      const bool pinned = reference != nullptr && p == 0;
      if (proposal == Proposal::optimal) {
        logw[p] = msg.log_alpha;
        if (pinned) {
          row[p] = reference->path[t];
        } else if (msg.log_alpha == -std::numeric_limits<double>::infinity()) {
          row[p] = typename Model::Latent{};  // weight zero, never resampled
        } else {
          row[p] = model.draw(msg.gamma, rng);
        }
      } else if constexpr (PriorProposalModel<Model>) {
        row[p] = pinned ? reference->path[t] : model.draw(msg.gamma, rng);
        logw[p] = model.emission_log_prob(row[p], observations[t]);
      }
    }

    std::vector<Carry>& carry_row = sys.carries[t];
    carry_row.clear();
    carry_row.reserve(P);
    for (int p = 0; p < P; ++p) carry_row.push_back(group_carry[group_of[p]]);

    if (carry_weights) {
      const std::vector<double>& prev = sys.norm_weights[t - 1];
      for (int p = 0; p < P; ++p) logw[p] += std::log(prev[p]);
    }
    const double total = log_sum_exp(logw);
    if (!(total > -std::numeric_limits<double>::infinity()) || std::isnan(total)) {
      throw ParticleCollapse(t + 1, "P=" + std::to_string(P) + (reference != nullptr ? ", conditional" : ""));
    }
    std::vector<double>& w = sys.norm_weights[t];
    w.resize(P);
    for (int p = 0; p < P; ++p) w[p] = std::exp(logw[p] - total);
    sys.log_alpha_tilde[t] = carry_weights ? total : total - log_p;
    result.log_marginal += sys.log_alpha_tilde[t];
  }
  return result;
}

}  // namespace detail

// Sequential Monte Carlo with multinomial resampling (every step by default).
// With the optimal proposal each particle's weight is its alpha message,
// independent of the value drawn from gamma.
template <StateSpaceModel Model>
SmcResult<Model> smc_pass(const Model& model, std::span<const typename Model::Observation> observations,
                          int num_particles, Rng& rng, Proposal proposal = Proposal::optimal,
                          double resample_threshold = kAlwaysResample) {
  return detail::propagate(model, observations, num_particles, rng,
                           static_cast<const ReferencePath<Model>*>(nullptr), proposal, resample_threshold);
}

// Conditional SMC: slot 0 carries the reference path and its lineage.
template <StateSpaceModel Model>
SmcResult<Model> conditional_smc_pass(const Model& model, std::span<const typename Model::Observation> observations,
                                      const ReferencePath<Model>& reference, int num_particles, Rng& rng,
                                      Proposal proposal = Proposal::optimal,
                                      double resample_threshold = kAlwaysResample) {
  return detail::propagate(model, observations, num_particles, rng, &reference, proposal, resample_threshold);
}

// Draws r ~ alpha_T and traces its lineage.
template <class Model>
LatentPath<Model> draw_final_path(const ParticleSystem<Model>& system, Rng& rng) {
  const int r = categorical_sample(system.norm_weights.back(), rng);
  return trace_path(system, r);
}

// One Particle Gibbs transition from the reference path. P = 1 returns the
// reference unchanged.
template <StateSpaceModel Model>
LatentPath<Model> particle_gibbs_sweep(const Model& model, std::span<const typename Model::Observation> observations,
                                       const ReferencePath<Model>& reference, int num_particles, Rng& rng,
                                       double resample_threshold = kAlwaysResample) {
  if (static_cast<std::size_t>(observations.size()) != reference.path.size()) {
    throw DataError("particle_gibbs_sweep: reference length does not match the observations");
  }
  if (num_particles == 1) return reference.path;
  const SmcResult<Model> result =
      conditional_smc_pass(model, observations, reference, num_particles, rng, Proposal::optimal, resample_threshold);
  return draw_final_path(result.system, rng);
}

template <class Model>
struct FactoredDraw {
  LatentPath<Model> path;
  double log_alpha_sum = 0.0;
};

// Factored baseline: z_t ~ gamma_t computed from the previous path's history,
// independently across t.
template <StateSpaceModel Model>
FactoredDraw<Model> factored_draw(const Model& model, std::span<const typename Model::Observation> observations,
                                  const LatentPath<Model>& previous, Rng& rng) {
  if (previous.size() != static_cast<std::size_t>(observations.size())) {
    throw DataError("factored_sample: previous path length does not match the observations");
  }
  FactoredDraw<Model> out;
  out.path.reserve(previous.size());
  typename Model::Carry carry = model.initial_carry();
  for (std::size_t t = 0; t < previous.size(); ++t) {
    if (t > 0) carry = model.advance(carry, previous[t - 1]);
    const auto msg = model.message(carry, observations[t]);
    if (msg.log_alpha == -std::numeric_limits<double>::infinity()) {
      throw NumericalError("zero-probability observation at t=" + std::to_string(t + 1));
    }
    out.log_alpha_sum += msg.log_alpha;
    out.path.push_back(model.draw(msg.gamma, rng));
  }
  return out;
}

template <StateSpaceModel Model>
LatentPath<Model> factored_sample(const Model& model, std::span<const typename Model::Observation> observations,
                                  const LatentPath<Model>& previous, Rng& rng) {
  return factored_draw(model, observations, previous, rng).path;
}

// Per-step diagnostics: t, ess, log_alpha_tilde, unique_ancestors.
template <class Model>
void write_diagnostics_csv(const ParticleSystem<Model>& system, std::ostream& out) {
  out << "t,ess,log_alpha_tilde,unique_ancestors\n";
  char buffer[96];
  for (int t = 0; t < system.num_steps(); ++t) {
    std::vector<char> seen(static_cast<std::size_t>(system.num_particles()), 0);
    int unique = 0;
    for (int a : system.ancestors[t]) {
      if (!seen[a]) {
        seen[a] = 1;
        ++unique;
      }
    }
    std::snprintf(buffer, sizeof buffer, "%d,%.17g,%.17g,%d\n", t + 1, effective_sample_size(system.norm_weights[t]),
                  system.log_alpha_tilde[t], unique);
    out << buffer;
  }
}

}  // namespace ssl
