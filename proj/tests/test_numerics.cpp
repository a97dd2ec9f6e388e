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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "ssl/numerics.hpp"

namespace ssl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(LogSumExp, TwoEqualTerms) { EXPECT_NEAR(log_sum_exp(std::vector<double>{0.0, 0.0}), std::log(2.0), 1e-15); }

TEST(LogSumExp, NegativeInfinityIsAbsorbed) {
  EXPECT_EQ(log_sum_exp(std::vector<double>{-kInf, 0.0}), 0.0);
  EXPECT_EQ(log_sum_exp(std::vector<double>{-kInf, -kInf}), -kInf);
}

TEST(LogSumExp, EmptyInputThrows) {
  try {
    log_sum_exp(std::vector<double>{});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_STREQ(e.what(), "empty reduction");
  }
}

TEST(LogSumExp, MatchesNaiveSummation) {
  Rng rng(11);
  std::vector<double> v(16);
  for (double& x : v) x = -5.0 + 10.0 * rng.uniform();
  double naive = 0.0;
  for (double x : v) naive += std::exp(x);
  naive = std::log(naive);
  EXPECT_NEAR(log_sum_exp(v), naive, 1e-12 * std::abs(naive));
}

TEST(LogSumExp, BoundedByMaxAndMaxPlusLogN) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 30);
    std::vector<double> v(n);
    for (double& x : v) x = -700.0 + 1400.0 * rng.uniform();
    const double m = *std::max_element(v.begin(), v.end());
    const double l = log_sum_exp(v);
    EXPECT_GE(l, m);
    EXPECT_LE(l, m + std::log(static_cast<double>(n)) + 1e-12);
  }
}

TEST(Softmax, SymmetricInput) {
  const Vec s = softmax(Vec::Zero(3));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s[i], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  Vec v(2);
  v << 1000.0, 0.0;
  const Vec s = softmax(v);
  EXPECT_EQ(s[0], 1.0);
  EXPECT_LT(s[1], 1e-300);
}

TEST(Softmax, MatchesNaiveAndIsShiftInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Vec v(8);
    for (int i = 0; i < 8; ++i) v[i] = -3.0 + 6.0 * rng.uniform();
    const Vec s = softmax(v);
    const Vec naive = v.array().exp() / v.array().exp().sum();
    EXPECT_LT((s - naive).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(s.sum(), 1.0, 1e-12);
    const Vec shifted = softmax((v.array() + (rng.uniform() * 100.0 - 50.0)).matrix());
    EXPECT_LT((s - shifted).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Softmax, NonFiniteThrows) {
  Vec v(2);
  v << 0.0, std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(softmax(v), NumericalError);
}

TEST(GaussianLogpdf, StandardNormalAtZero) {
  const GaussianDist d{Vec::Zero(1), Mat::Identity(1, 1)};
  EXPECT_NEAR(gaussian_logpdf(Vec::Zero(1), d), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(gaussian_logpdf(Vec::Zero(1), d), -0.9189385, 1e-7);
}

Mat random_spd(int k, Rng& rng) {
  Mat a(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) a(i, j) = rng.normal();
  return a * a.transpose() + 0.5 * Mat::Identity(k, k);
}

TEST(GaussianLogpdf, AtMeanIsHalfLogDet) {
  Rng rng(7);
  const Mat cov = random_spd(3, rng);
  const Vec mean = Vec::Random(3);
  const double expected = -0.5 * std::log((2.0 * std::numbers::pi * cov).determinant());
  EXPECT_NEAR(gaussian_logpdf(mean, {mean, cov}), expected, 1e-12);
}

TEST(GaussianLogpdf, MatchesExplicitInverse) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat cov = random_spd(3, rng);
    Vec mean(3), x(3);
    for (int i = 0; i < 3; ++i) {
      mean[i] = rng.normal();
      x[i] = rng.normal();
    }
    const Vec r = x - mean;
    const double expected =
        -0.5 * (std::log((2.0 * std::numbers::pi * cov).determinant()) + r.dot(cov.inverse() * r));
    EXPECT_NEAR(gaussian_logpdf(x, {mean, cov}), expected, 1e-10);
  }
}

TEST(GaussianLogpdf, NonPdCovarianceThrows) {
  Mat cov(2, 2);
  cov << 1.0, 2.0, 2.0, 1.0;
  try {
    gaussian_logpdf(Vec::Zero(2), {Vec::Zero(2), cov});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_STREQ(e.what(), "covariance not positive definite");
  }
}

TEST(GaussianLogpdf, IntegratesToOneOn1dGrid) {
  const double mu = 0.3, sigma = 1.7;
  const GaussianDist d{Vec::Constant(1, mu), Mat::Constant(1, 1, sigma * sigma)};
  const int n = 4001;
  const double lo = mu - 8 * sigma, hi = mu + 8 * sigma, h = (hi - lo) / (n - 1);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    total += w * std::exp(gaussian_logpdf(Vec::Constant(1, lo + i * h), d));
  }
  EXPECT_NEAR(total * h, 1.0, 1e-4);
}

TEST(GaussianLogpdf, IntegratesToOneOn2dGrid) {
  Mat cov(2, 2);
  cov << 1.0, 0.4, 0.4, 0.5;
  const GaussianDist d{Vec::Zero(2), cov};
  const int n = 401;
  const double sx = 1.0, sy = std::sqrt(0.5);
  const double hx = 16 * sx / (n - 1), hy = 16 * sy / (n - 1);
  double total = 0.0;
  Vec x(2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double w = ((i == 0 || i == n - 1) ? 0.5 : 1.0) * ((j == 0 || j == n - 1) ? 0.5 : 1.0);
      x << -8 * sx + i * hx, -8 * sy + j * hy;
      total += w * std::exp(gaussian_logpdf(x, d));
    }
  }
  EXPECT_NEAR(total * hx * hy, 1.0, 1e-4);
}

TEST(MvnSample, DegenerateCovarianceReturnsMean) {
  Rng rng(1);
  Vec mean(2);
  mean << 1.5, -2.0;
  const Vec s = mvn_sample({mean, 1e-20 * Mat::Identity(2, 2)}, rng);
  EXPECT_LT((s - mean).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(MvnSample, MomentsWithinMonteCarloBands) {
  Rng rng(2024);
  Vec mean(2);
  mean << 0.5, -1.0;
  Mat cov(2, 2);
  cov << 2.0, 0.6, 0.6, 1.0;
  const int n = 100000;
  Vec sum = Vec::Zero(2);
  Mat outer = Mat::Zero(2, 2);
  std::vector<Vec> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) draws.push_back(mvn_sample({mean, cov}, rng));
  for (const Vec& d : draws) sum += d;
  const Vec m = sum / n;
  for (const Vec& d : draws) outer += (d - m) * (d - m).transpose();
  const Mat c = outer / (n - 1);
  for (int i = 0; i < 2; ++i) {
    EXPECT_LT(std::abs(m[i] - mean[i]), 5.0 * std::sqrt(cov(i, i) / n));
    for (int j = 0; j < 2; ++j) {
      // var of sample covariance entry: (S_ii S_jj + S_ij^2) / n
      const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / n);
      EXPECT_LT(std::abs(c(i, j) - cov(i, j)), 5.0 * se);
    }
  }
}

TEST(MvnSample, DeterministicUnderSeed) {
  const GaussianDist d{Vec::Zero(3), Mat::Identity(3, 3)};
  Rng a(99), b(99);
  const Vec x = mvn_sample(d, a);
  const Vec y = mvn_sample(d, b);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(x[i], y[i]);
}

TEST(Categorical, PointMass) {
  Rng rng(4);
  const std::vector<double> w{1.0, 0.0, 0.0};
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(categorical_sample(w, rng), 0);
}

TEST(Categorical, FairCoinFrequency) {
  Rng rng(6);
  const std::vector<double> w{0.5, 0.5};
  const CategoricalSampler s(w);
  int zeros = 0;
  for (int i = 0; i < 100000; ++i) zeros += s.draw(rng) == 0;
  EXPECT_GE(zeros / 1e5, 0.49);
  EXPECT_LE(zeros / 1e5, 0.51);
}

TEST(Categorical, ChiSquareUnbiased) {
  Rng rng(12);
  const std::vector<double> w{0.1, 0.2, 0.05, 0.3, 0.35};
  const CategoricalSampler s(w);
  std::vector<int> counts(w.size(), 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[s.draw(rng)];
  double chi2 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double e = n * w[i];
    chi2 += (counts[i] - e) * (counts[i] - e) / e;
  }
  // chi-square(4) upper 0.001 quantile
  EXPECT_LT(chi2, 18.467);
}

TEST(Categorical, DeterministicUnderSeed) {
  const std::vector<double> w{0.2, 0.3, 0.5};
  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(categorical_sample(w, a), categorical_sample(w, b));
}

TEST(Categorical, RejectsInvalidWeights) {
  Rng rng(1);
  EXPECT_THROW(categorical_sample(std::vector<double>{0.5, -0.1, 0.6}, rng), NumericalError);
  EXPECT_THROW(categorical_sample(std::vector<double>{0.5, 0.4}, rng), NumericalError);
  EXPECT_THROW(categorical_sample(std::vector<double>{}, rng), NumericalError);
}

TEST(Categorical, NeverPicksZeroWeight) {
  Rng rng(9);
  const std::vector<double> w{0.0, 0.7, 0.0, 0.3, 0.0};
  for (int i = 0; i < 20000; ++i) {
    const int k = categorical_sample(w, rng);
    EXPECT_TRUE(k == 1 || k == 3);
  }
}

TEST(RngTest, SplitStreamsAreReproducibleAndDistinct) {
  Rng parent(42);
  Rng a = parent.split("sstep");
  parent.next_u64();
  Rng b = parent.split("sstep");
  Rng c = parent.split("mstep");
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(Rng(42).split("sstep").next_u64(), c.next_u64());
  EXPECT_NE(Rng(42).split(1).next_u64(), Rng(42).split(2).next_u64());
}

TEST(RngTest, UniformAndNormalMoments) {
  Rng rng(123);
  const int n = 200000;
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 5.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sn / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(NormalizeLogWeights, SumsToOne) {
  const std::vector<double> lw{-1000.0, -1001.0, -kInf, -999.5};
  const auto w = normalize_log_weights(lw);
  double s = 0.0;
  for (double x : w) s += x;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_EQ(w[2], 0.0);
  EXPECT_THROW(normalize_log_weights(std::vector<double>{-kInf}), NumericalError);
}

}  // namespace
}  // namespace ssl
