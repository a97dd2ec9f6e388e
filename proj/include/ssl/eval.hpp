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
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ssl/inference.hpp"
#include "ssl/models.hpp"
#include "ssl/training.hpp"

namespace ssl {

inline constexpr int kDefaultEvalParticles = 64;

struct PerplexityResult {
  double value = 0.0;
  double log_likelihood = 0.0;  // sum over documents of log p-hat(x_{1:T})
  std::size_t tokens = 0;
  int particles = 0;
  std::vector<double> per_document;
};

// Document d uses stream rng.split(d).
PerplexityResult perplexity(const TopicalSsl& model, std::span<const std::vector<int>> documents, int num_particles,
                            const Rng& rng, int threads = 1);

struct TrackingOptions {
  std::size_t train_length = 0;  // first test step
  int particles = kDefaultEvalParticles;
  int horizon = -1;              // blind steps; -1 covers the test segment
};

struct TrackingResult {
  double filtered_rmse = 0.0;
  double blind_rmse = 0.0;
  std::vector<Vec> filtered;  // observation-space estimate per test step
  std::vector<Vec> blind;     // observation-space blind rollout
};

// Per-coordinate RMSE between estimates and truth[offset ...].
double rmse(std::span<const Vec> estimate, std::span<const Vec> truth, std::size_t offset = 0);

// Filtered estimates come from one SMC pass over the full sequence; the
// estimate at step t only sees x_{1:t}. The blind rollout starts from the
// highest-weight particle at the last training step and runs in mean mode.
template <class Model>
TrackingResult tracking_error(const Model& model, std::span<const Vec> observed, std::span<const Vec> truth,
                              const TrackingOptions& options, Rng& rng) {
  if (observed.size() != truth.size()) throw ShapeError("tracking: observed and truth lengths differ");
  const std::size_t T = observed.size();
  const std::size_t n = options.train_length;
  if (n == 0 || n >= T) throw DataError("tracking: train length must leave a nonempty test segment");
  const auto res = smc_pass(model, observed, options.particles, rng);
  const auto& sys = res.system;
  const GaussianEmission& e = model.emission;

  TrackingResult out;
  for (std::size_t t = n; t < T; ++t) {
    Vec mean = Vec::Zero(sys.particles[t][0].size());
    for (int p = 0; p < sys.num_particles(); ++p) mean += sys.norm_weights[t][p] * sys.particles[t][p];
    out.filtered.push_back(e.C * mean + e.b);
  }
  out.filtered_rmse = rmse(out.filtered, truth, n);

  const std::size_t boundary = n - 1;
  const auto& w = sys.norm_weights[boundary];
  const int best = static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
  const auto carry = model.advance(sys.carries[boundary][best], sys.particles[boundary][best]);
  const int horizon = options.horizon < 0 ? static_cast<int>(T - n) : std::min<int>(options.horizon, T - n);
  for (const Vec& z : blind_rollout(model, carry, horizon, RolloutMode::mean, rng)) out.blind.push_back(e.C * z + e.b);
  out.blind_rmse = out.blind.empty() ? 0.0 : rmse(out.blind, truth, n);
  return out;
}

std::int64_t nnz(const CountMatrix& counts);

struct MetricReport {
  std::string name;
  double value = 0.0;
  int particles = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<double> breakdown;
};

// FNV-1a of the text, as 16 hex digits.
std::string config_hash(const std::string& config_text);

void write_metric_json(const MetricReport& report, std::ostream& out);

}  // namespace ssl
