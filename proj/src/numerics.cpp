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

#include "ssl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ssl {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

Rng Rng::split(std::uint64_t key) const {
  std::uint64_t x = key ^ 0x5851f42d4c957f2dULL;
  std::uint64_t mixed = splitmix64(x);
  std::uint64_t y = seed_ ^ mixed;
  return Rng(splitmix64(y));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // 1 - u lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::hash(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw NumericalError("empty reduction");
  const double max_value = *std::max_element(values.begin(), values.end());
  if (max_value == kNegInf) return kNegInf;
  if (!std::isfinite(max_value)) return max_value;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max_value);
  return max_value + std::log(sum);
}

Vec softmax(const Vec& logits) {
  if (logits.size() == 0) throw NumericalError("empty reduction");
  if (!logits.allFinite()) throw NumericalError("softmax: non-finite logit");
  Vec out = (logits.array() - logits.maxCoeff()).exp();
  out /= out.sum();
  return out;
}

std::vector<double> normalize_log_weights(std::span<const double> log_weights) {
  const double total = log_sum_exp(log_weights);
  if (total == kNegInf) throw NumericalError("all weights are zero");
  std::vector<double> out(log_weights.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_weights[i] - total);
  return out;
}

Mat cholesky_factor(const Mat& cov) {
  if (cov.rows() != cov.cols()) throw ShapeError("covariance must be square");
  const Mat identity = Mat::Identity(cov.rows(), cov.cols());
  for (double jitter : {0.0, 1e-10, 1e-8}) {
    Eigen::LLT<Mat> llt(jitter == 0.0 ? cov : Mat(cov + jitter * identity));
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
      return llt.matrixL();
    }
  }
  throw NumericalError("covariance not positive definite");
}

void check_gaussian(const GaussianDist& dist) {
  if (dist.cov.rows() != dist.mean.size() || dist.cov.cols() != dist.mean.size()) {
    throw ShapeError("gaussian: covariance shape does not match mean");
  }
  if (!dist.mean.allFinite() || !dist.cov.allFinite()) {
    throw NumericalError("gaussian: non-finite parameters");
  }
  if ((dist.cov - dist.cov.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw NumericalError("gaussian: covariance not symmetric");
  }
}

double gaussian_logpdf(const Vec& x, const GaussianDist& dist) {
  check_gaussian(dist);
  if (x.size() != dist.mean.size()) throw ShapeError("gaussian_logpdf: dimension mismatch");
  const Mat chol = cholesky_factor(dist.cov);
  const Vec white = chol.triangularView<Eigen::Lower>().solve(x - dist.mean);
  const double log_det = 2.0 * chol.diagonal().array().log().sum();
  const double k = static_cast<double>(x.size());
  return -0.5 * (k * std::log(2.0 * std::numbers::pi) + log_det + white.squaredNorm());
}

Vec mvn_sample(const GaussianDist& dist, Rng& rng) {
  check_gaussian(dist);
  const Mat chol = cholesky_factor(dist.cov);
  Vec xi(dist.mean.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
  return dist.mean + chol.triangularView<Eigen::Lower>() * xi;
}

CategoricalSampler::CategoricalSampler(std::span<const double> weights) {
  if (weights.empty()) throw NumericalError("categorical: empty weights");
  cumulative_.resize(weights.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw NumericalError("categorical: negative or non-finite weight");
    }
    sum += weights[i];
    cumulative_[i] = sum;
    if (weights[i] > 0.0) last_positive_ = static_cast<int>(i);
  }
  if (std::abs(sum - 1.0) > 1e-9) throw NumericalError("categorical: weights do not sum to 1");
}

int CategoricalSampler::draw(Rng& rng) const {
  const double u = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const int index = static_cast<int>(it - cumulative_.begin());
  return std::min(index, last_positive_);
}

int categorical_sample(std::span<const double> weights, Rng& rng) {
  return CategoricalSampler(weights).draw(rng);
}

}  // namespace ssl
