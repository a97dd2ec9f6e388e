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

#include "ssl/models.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace ssl {
namespace {

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

void GaussianEmission::validate() const {
  if (C.rows() != b.size() || R.rows() != b.size() || R.cols() != b.size()) {
    throw ShapeError("gaussian emission: inconsistent shapes");
  }
  check_gaussian({b, R});
  cholesky_factor(R);
}

double GaussianEmission::log_prob(const Vec& z, const Vec& x) const { return gaussian_logpdf(x, {C * z + b, R}); }

Message<GaussianDist> gauss_messages(const GaussianDist& prior, const GaussianEmission& emission, const Vec& x) {
  const Mat& C = emission.C;
  if (prior.mean.size() != C.cols() || x.size() != C.rows() || emission.R.rows() != C.rows()) {
    throw ShapeError("gauss_messages: dimension mismatch");
  }
  check_gaussian(prior);
  cholesky_factor(prior.cov);

  const Mat S = symmetrize(emission.R + C * prior.cov * C.transpose());
  const Mat chol_s = cholesky_factor(S);
  const Vec predicted = C * prior.mean + emission.b;
  const Vec innovation = x - predicted;

  const auto lower = chol_s.triangularView<Eigen::Lower>();
  const Vec white = lower.solve(innovation);
  const double d = static_cast<double>(x.size());
  const double log_alpha =
      -0.5 * (d * std::log(2.0 * std::numbers::pi) + 2.0 * chol_s.diagonal().array().log().sum() + white.squaredNorm());

  // gain = prior.cov C' S^-1
  Mat cross = C * prior.cov;  // d x k
  lower.solveInPlace(cross);
  lower.transpose().solveInPlace(cross);
  const Mat gain = cross.transpose();

  const Eigen::Index k = prior.mean.size();
  const Mat residual = Mat::Identity(k, k) - gain * C;
  Mat V = symmetrize(residual * prior.cov * residual.transpose() + gain * emission.R * gain.transpose());
  cholesky_factor(V);
  return {log_alpha, {prior.mean + gain * innovation, std::move(V)}};
}

TopicMatrix TopicMatrix::uniform(int topics, int vocab, double beta) {
  TopicMatrix m;
  m.phi = Mat::Constant(topics, vocab, 1.0 / vocab);
  m.counts = CountMatrix::Zero(topics, vocab);
  m.beta = beta;
  return m;
}

void TopicMatrix::rebuild(std::span<const std::vector<int>> documents, std::span<const std::vector<int>> topics) {
  if (documents.size() != topics.size()) throw ShapeError("topic counts: document/assignment count mismatch");
  counts.setZero(num_topics(), vocab_size());
  for (std::size_t d = 0; d < documents.size(); ++d) {
    if (documents[d].size() != topics[d].size()) throw ShapeError("topic counts: assignment length mismatch");
    for (std::size_t t = 0; t < documents[d].size(); ++t) {
      const int z = topics[d][t];
      const int w = documents[d][t];
      if (z < 0 || z >= num_topics() || w < 0 || w >= vocab_size()) throw ShapeError("topic counts: index out of range");
      ++counts(z, w);
    }
  }
  phi = topic_map_update(counts, beta);
}

Mat topic_map_update(const CountMatrix& counts, double beta) {
  if (!(beta > 0.0)) throw DataError("topic_map_update: beta must be positive");
  if ((counts.array() < 0).any()) throw DataError("topic_map_update: negative counts");
  const Eigen::Index V = counts.cols();
  const double vocab = static_cast<double>(V);
  Mat phi(counts.rows(), V);
  for (Eigen::Index k = 0; k < counts.rows(); ++k) {
    const double row_total = static_cast<double>(counts.row(k).sum());
    const double pseudo = beta > 1.0 ? beta - 1.0 : beta;
    const double denominator = row_total + vocab * pseudo;
    for (Eigen::Index v = 0; v < V; ++v) {
      phi(k, v) = std::max((static_cast<double>(counts(k, v)) + pseudo) / denominator, kPhiFloor);
    }
    phi.row(k) /= phi.row(k).sum();
  }
  return phi;
}

Message<Vec> topical_messages(const Vec& theta, const TopicMatrix& topics, int word) {
  if (theta.size() != topics.num_topics()) throw ShapeError("topical_messages: theta size mismatch");
  if (word < 0 || word >= topics.vocab_size()) throw ShapeError("topical_messages: word index out of range");
  Vec joint = theta.cwiseProduct(topics.phi.col(word));
  const double mass = joint.sum();
  if (!(mass > 0.0)) throw NumericalError("zero-probability observation");
  joint /= mass;
  return {std::log(mass), std::move(joint)};
}

Message<Vec> TopicalSsl::message(const Carry& c, int word) const {
  const Vec theta = prior(c);
  Vec joint = theta.cwiseProduct(topics.phi.col(word));
  const double mass = joint.sum();
  if (!(mass > 0.0)) return {-std::numeric_limits<double>::infinity(), Vec()};
  joint /= mass;
  return {std::log(mass), std::move(joint)};
}

int TopicalSsl::prior_mean(const Vec& theta) const {
  Eigen::Index best = 0;
  theta.maxCoeff(&best);
  return static_cast<int>(best);
}

EmissionFit gauss_emission_mle(std::span<const Vec> latents, std::span<const Vec> observations) {
  if (latents.size() != observations.size()) throw ShapeError("gauss_emission_mle: pair count mismatch");
  if (latents.empty()) throw DataError("gauss_emission_mle: no data");
  const Eigen::Index k = latents[0].size();
  const Eigen::Index d = observations[0].size();
  const Eigen::Index n = static_cast<Eigen::Index>(latents.size());
  if (n < k + 1) throw DataError("gauss_emission_mle: need at least k+1 pairs");

  Mat X(n, k + 1);
  Mat Y(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (latents[i].size() != k || observations[i].size() != d) throw ShapeError("gauss_emission_mle: ragged data");
    X.row(i).head(k) = latents[i].transpose();
    X(i, k) = 1.0;
    Y.row(i) = observations[i].transpose();
  }

  EmissionFit fit;
  Mat gram = X.transpose() * X;
  Eigen::ColPivHouseholderQR<Mat> qr(X);
  if (qr.rank() < k + 1) {
    // Collinear design (e.g. a constant latent). Ridge keeps the solve defined.
    gram += 1e-6 * Mat::Identity(k + 1, k + 1);
    fit.ridge_applied = true;
  }
  const Mat coef = gram.ldlt().solve(X.transpose() * Y);  // (k+1) x d
  fit.emission.C = coef.topRows(k).transpose();
  fit.emission.b = coef.row(k).transpose();

  const Mat residual = Y - X * coef;
  Mat R = symmetrize(residual.transpose() * residual / static_cast<double>(n));
  const Mat identity = Mat::Identity(d, d);
  for (double jitter : {0.0, 1e-10, 1e-8, 1e-6}) {
    const Mat candidate = R + jitter * identity;
    Eigen::LLT<Mat> llt(candidate);
    if (llt.info() == Eigen::Success) {
      R = candidate;
      break;
    }
  }
  fit.emission.R = std::move(R);
  return fit;
}

}  // namespace ssl
