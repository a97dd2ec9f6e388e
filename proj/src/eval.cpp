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

#include "ssl/eval.hpp"

#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "ssl/parallel.hpp"

namespace ssl {

PerplexityResult perplexity(const TopicalSsl& model, std::span<const std::vector<int>> documents, int num_particles,
                            const Rng& rng, int threads) {
  if (documents.empty()) throw DataError("perplexity: empty held-out set");
  if (num_particles < 1) throw DataError("perplexity: need at least one particle");
  PerplexityResult out;
  out.particles = num_particles;
  out.per_document.assign(documents.size(), 0.0);
  parallel_for(documents.size(), threads, [&](std::size_t d) {
    Rng stream = rng.split(static_cast<std::uint64_t>(d));
    try {
      out.per_document[d] = smc_pass(model, std::span<const int>(documents[d]), num_particles, stream).log_marginal;
    } catch (const ParticleCollapse& e) {
      throw NumericalError("perplexity: document " + std::to_string(d) + ": " + e.what());
    }
  });
  for (std::size_t d = 0; d < documents.size(); ++d) {
    out.log_likelihood += out.per_document[d];
    out.tokens += documents[d].size();
  }
  if (out.tokens == 0) throw DataError("perplexity: held-out set has no tokens");
  out.value = std::exp(-out.log_likelihood / static_cast<double>(out.tokens));
  return out;
}

double rmse(std::span<const Vec> estimate, std::span<const Vec> truth, std::size_t offset) {
  if (estimate.empty()) throw DataError("rmse: empty estimate");
  if (offset + estimate.size() > truth.size()) throw ShapeError("rmse: estimate runs past the truth");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const Vec& a = estimate[i];
    const Vec& b = truth[offset + i];
    if (a.size() != b.size()) throw ShapeError("rmse: dimension mismatch");
    sum += (a - b).squaredNorm();
    count += static_cast<std::size_t>(a.size());
  }
  return std::sqrt(sum / static_cast<double>(count));
}

std::int64_t nnz(const CountMatrix& counts) {
  if ((counts.array() < 0).any()) throw DataError("nnz: negative counts");
  return (counts.array() > 0).count();
}

std::string config_hash(const std::string& config_text) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(Rng::hash(config_text)));
  return buffer;
}

void write_metric_json(const MetricReport& report, std::ostream& out) {
  if (!std::isfinite(report.value)) throw NumericalError("metric " + report.name + " is not finite");
  nlohmann::ordered_json j;
  j["metric"] = report.name;
  j["value"] = report.value;
  j["P"] = report.particles;
  j["seed"] = report.seed;
  j["config_hash"] = report.config_hash;
  if (!report.breakdown.empty()) j["breakdown"] = report.breakdown;
  out << j.dump() << '\n';
}

}  // namespace ssl
