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

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ssl/errors.hpp"

namespace ssl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// xoshiro256** seeded through splitmix64. Children created by `split` depend
// only on the parent's seed and the key, never on how many draws the parent
// has made, so per-task streams are reproducible under any scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  Rng split(std::uint64_t key) const;
  Rng split(std::string_view name) const { return split(hash(name)); }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller; one cosine branch, no cached pair.
  double normal();

  static std::uint64_t hash(std::string_view name);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

double log_sum_exp(std::span<const double> values);
inline double log_sum_exp(const std::vector<double>& v) { return log_sum_exp(std::span<const double>(v)); }

Vec softmax(const Vec& logits);

// Turns log-domain weights into simplex weights. Throws if every entry is -inf.
std::vector<double> normalize_log_weights(std::span<const double> log_weights);

struct GaussianDist {
  Vec mean;
  Mat cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

// Lower Cholesky factor of `cov`, retrying with 1e-10*I and then 1e-8*I.
// Throws NumericalError("covariance not positive definite") afterwards.
Mat cholesky_factor(const Mat& cov);

// Throws unless cov is square, matches mean, and is symmetric within 1e-10.
void check_gaussian(const GaussianDist& dist);

double gaussian_logpdf(const Vec& x, const GaussianDist& dist);
Vec mvn_sample(const GaussianDist& dist, Rng& rng);

// Inverse-CDF sampling over a fixed weight vector. Validation and the
// cumulative table are built once, each draw costs one uniform.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(std::span<const double> weights);
  int draw(Rng& rng) const;
  int size() const { return static_cast<int>(cumulative_.size()); }

 private:
  std::vector<double> cumulative_;
  int last_positive_ = 0;
};

int categorical_sample(std::span<const double> weights, Rng& rng);
inline int categorical_sample(const Vec& weights, Rng& rng) {
  return categorical_sample(std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())), rng);
}

}  // namespace ssl
