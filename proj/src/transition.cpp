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

#include "ssl/transition.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ssl/parallel.hpp"

namespace ssl {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

struct Chunk {
  std::size_t begin;
  std::size_t end;
};

// Fixed partition of the batch; the reduction order never depends on threads.
std::vector<Chunk> make_chunks(std::size_t n) {
  constexpr std::size_t kMaxChunks = 8;
  const std::size_t count = std::min(n, kMaxChunks);
  std::vector<Chunk> chunks;
  for (std::size_t c = 0; c < count; ++c) chunks.push_back({c * n / count, (c + 1) * n / count});
  return chunks;
}

template <class Head>
double single_path_backward(const TransitionNet<Head>& net, const std::vector<typename Head::Latent>& path,
                            TransitionNet<Head>& grad) {
  const std::size_t T = path.size();
  const Head& head = net.head;
  std::vector<LstmStepCache> caches;
  caches.reserve(T);
  LstmState state = net.initial_state();
  for (std::size_t t = 0; t < T; ++t) {
    const auto& z = t == 0 ? head.start_latent() : path[t - 1];
    const auto& before = t <= 1 ? head.start_latent() : path[t - 2];
    const Vec input = head.encode(z, before);
    caches.push_back(lstm_forward_cached(net.lstm, state, input));
    state = {caches.back().hidden, caches.back().cell};
  }

  const int h = net.lstm.hidden_size();
  double loss = 0.0;
  Vec dh_next = Vec::Zero(h);
  Vec dc_next = Vec::Zero(h);
  Vec d_hidden(h);
  for (std::size_t t = T; t-- > 0;) {
    const bool at_start = t == 0;
    const auto& previous = at_start ? head.start_latent() : path[t - 1];
    loss += head.nll_backward(caches[t].hidden, previous, at_start, path[t], grad.head, d_hidden);
    d_hidden += dh_next;
    LstmStepGrad step = lstm_backward(net.lstm, caches[t], d_hidden, dc_next, grad.lstm);
    dh_next = std::move(step.d_hidden_prev);
    dc_next = std::move(step.d_cell_prev);
    head.input_backward(step.d_input, at_start, t <= 1, grad.head);
  }
  return loss;
}

template <class Head>
double mean_nll(const TransitionNet<Head>& net, std::span<const std::vector<typename Head::Latent>> paths,
                int threads) {
  const auto chunks = make_chunks(paths.size());
  std::vector<double> sums(chunks.size(), 0.0);
  parallel_for(chunks.size(), threads, [&](std::size_t c) {
    for (std::size_t i = chunks[c].begin; i < chunks[c].end; ++i) sums[c] += net.path_nll(paths[i]);
  });
  double total = 0.0;
  for (double s : sums) total += s;
  return total / static_cast<double>(paths.size());
}

}  // namespace

GaussianTransitionHead GaussianTransitionHead::zeros(int latent_dim, int hidden, double log_var, bool residual,
                                                    bool increment_input) {
  GaussianTransitionHead h;
  h.weight = Mat::Zero(latent_dim, hidden);
  h.bias = Vec::Zero(latent_dim);
  h.log_var = Vec::Constant(latent_dim, log_var);
  h.start = Vec::Zero(latent_dim);
  h.residual = residual;
  h.increment_input = increment_input;
  return h;
}

GaussianDist GaussianTransitionHead::prior(const Vec& hidden, const Vec& previous) const {
  if (hidden.size() != weight.cols()) throw ShapeError("gaussian head: hidden size mismatch");
  Vec mean = weight * hidden + bias;
  if (residual) {
    if (previous.size() != mean.size()) throw ShapeError("gaussian head: previous latent size mismatch");
    mean += previous;
  }
  return {std::move(mean), log_var.array().exp().matrix().asDiagonal()};
}

double GaussianTransitionHead::log_prob(const Vec& hidden, const Vec& previous, const Vec& z) const {
  Vec mean = weight * hidden + bias;
  if (residual) mean += previous;
  const Vec r = z - mean;
  return -0.5 * (kLog2Pi * static_cast<double>(z.size()) + log_var.sum() +
                 (r.array().square() * (-log_var.array()).exp()).sum());
}

double GaussianTransitionHead::nll_backward(const Vec& hidden, const Vec& previous, bool previous_is_start,
                                            const Vec& z, GaussianTransitionHead& grad, Vec& d_hidden) const {
  Vec mean = weight * hidden + bias;
  if (residual) mean += previous;
  const Vec r = z - mean;
  const Eigen::ArrayXd precision = (-log_var.array()).exp();
  const Eigen::ArrayXd scaled = r.array().square() * precision;
  const Vec d_mean = (-r.array() * precision).matrix();
  grad.weight.noalias() += d_mean * hidden.transpose();
  grad.bias += d_mean;
  grad.log_var += (0.5 * (1.0 - scaled)).matrix();
  if (residual && previous_is_start) grad.start += d_mean;
  d_hidden.noalias() = weight.transpose() * d_mean;
  return 0.5 * (kLog2Pi * static_cast<double>(z.size()) + log_var.sum() + scaled.sum());
}

TopicalTransitionHead TopicalTransitionHead::zeros(int topics, int hidden) {
  return {Mat::Zero(topics, hidden), Vec::Zero(topics)};
}

Vec TopicalTransitionHead::encode(int z, int) const {
  if (z < 0 || z > num_topics()) throw ShapeError("topical head: topic index out of range");
  Vec v = Vec::Zero(input_size());
  v[z] = 1.0;
  return v;
}

Vec TopicalTransitionHead::prior(const Vec& hidden, int) const {
  if (hidden.size() != weight.cols()) throw ShapeError("topical head: hidden size mismatch");
  return softmax(weight * hidden + bias);
}

double TopicalTransitionHead::log_prob(const Vec& hidden, int, int z) const {
  const Vec logits = weight * hidden + bias;
  const double max_logit = logits.maxCoeff();
  return logits[z] - max_logit - std::log((logits.array() - max_logit).exp().sum());
}

double TopicalTransitionHead::nll_backward(const Vec& hidden, int, bool, int z, TopicalTransitionHead& grad,
                                           Vec& d_hidden) const {
  const Vec logits = weight * hidden + bias;
  const double max_logit = logits.maxCoeff();
  const Eigen::ArrayXd e = (logits.array() - max_logit).exp();
  const double sum = e.sum();
  Vec d_logits = (e / sum).matrix();
  d_logits[z] -= 1.0;
  grad.weight.noalias() += d_logits * hidden.transpose();
  grad.bias += d_logits;
  d_hidden.noalias() = weight.transpose() * d_logits;
  return std::log(sum) - (logits[z] - max_logit);
}

template <class Head>
std::vector<LstmState> TransitionNet<Head>::unroll(const Path& path) const {
  std::vector<Vec> inputs;
  inputs.reserve(path.size());
  if (path.empty()) return {};
  const Latent& start = head.start_latent();
  inputs.push_back(head.encode(start, start));
  for (std::size_t t = 0; t + 1 < path.size(); ++t) inputs.push_back(head.encode(path[t], t == 0 ? start : path[t - 1]));
  return lstm_unroll(lstm, inputs, initial_state());
}

template <class Head>
double TransitionNet<Head>::path_nll(const Path& path) const {
  double nll = 0.0;
  LstmState state = first_state();
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (t > 0) state = advance(state, path[t - 1], t == 1 ? head.start_latent() : path[t - 2]);
    nll -= head.log_prob(state.hidden, t == 0 ? head.start_latent() : path[t - 1], path[t]);
  }
  return nll;
}

template <class Head>
auto TransitionNet<Head>::sample_path(int length, Rng& rng) const -> Path {
  Path path;
  path.reserve(static_cast<std::size_t>(std::max(length, 0)));
  LstmState state = first_state();
  for (int t = 0; t < length; ++t) {
    if (t > 0) state = advance(state, path.back(), t == 1 ? head.start_latent() : path[path.size() - 2]);
    path.push_back(head.draw(head.prior(state.hidden, t == 0 ? head.start_latent() : path.back()), rng));
  }
  return path;
}

template <class Head>
TransitionNet<Head> TransitionNet<Head>::zeros_like() const {
  TransitionNet out = *this;
  visit([](auto& t) { t.setZero(); }, out);
  out.lstm.forget_bias_offset = lstm.forget_bias_offset;
  return out;
}

template <class Head>
std::size_t TransitionNet<Head>::parameter_count() const {
  std::size_t n = 0;
  TransitionNet copy = *this;
  visit([&](auto& t) { n += static_cast<std::size_t>(t.size()); }, copy);
  return n;
}

GaussianNet make_gaussian_net(int latent_dim, int hidden, Rng& rng, double log_var, bool residual,
                              bool increment_input) {
  return {LstmParams::random(hidden, latent_dim, rng),
          GaussianTransitionHead::zeros(latent_dim, hidden, log_var, residual, increment_input)};
}

TopicalNet make_topical_net(int topics, int hidden, Rng& rng) {
  return {LstmParams::random(hidden, topics + 1, rng), TopicalTransitionHead::zeros(topics, hidden)};
}

template <class Head>
GradResult<Head> bptt_grad(const TransitionNet<Head>& net, std::span<const std::vector<typename Head::Latent>> paths,
                           int threads) {
  if (paths.empty()) throw DataError("bptt_grad: no paths");
  net.lstm.validate();
  const auto chunks = make_chunks(paths.size());
  std::vector<TransitionNet<Head>> partial(chunks.size(), net.zeros_like());
  std::vector<double> losses(chunks.size(), 0.0);
  parallel_for(chunks.size(), threads, [&](std::size_t c) {
    for (std::size_t i = chunks[c].begin; i < chunks[c].end; ++i) {
      if (paths[i].empty()) throw DataError("bptt_grad: empty path at index " + std::to_string(i));
      const double loss = single_path_backward(net, paths[i], partial[c]);
      if (!std::isfinite(loss)) {
        throw NumericalError("bptt_grad: non-finite loss for path " + std::to_string(i));
      }
      losses[c] += loss;
    }
  });

  GradResult<Head> out{std::move(partial[0]), losses[0]};
  for (std::size_t c = 1; c < chunks.size(); ++c) {
    TransitionNet<Head>::visit([](auto& acc, auto& part) { acc += part; }, out.grad, partial[c]);
    out.loss += losses[c];
  }
  const double scale = 1.0 / static_cast<double>(paths.size());
  TransitionNet<Head>::visit([scale](auto& g) { g *= scale; }, out.grad);
  out.loss *= scale;
  return out;
}

void OptimConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw DataError("optimizer: learning rate must be nonnegative");
  if (!(clip_norm > 0.0)) throw DataError("optimizer: clip norm must be positive");
  if (steps < 0) throw DataError("optimizer: step count must be nonnegative");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
    throw DataError("optimizer: adam decay rates must lie in (0, 1)");
  }
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw DataError("unknown optimizer: " + name);
}

template <class Head>
FitResult<Head> fit_mle(const TransitionNet<Head>& net, std::span<const std::vector<typename Head::Latent>> paths,
                        const OptimConfig& config, int threads) {
  config.validate();
  using Net = TransitionNet<Head>;
  FitResult<Head> result{net, {}, 0.0, 0.0};
  Net current = net;
  Net first_moment = net.zeros_like();
  Net second_moment = net.zeros_like();
  double best_loss = std::numeric_limits<double>::infinity();

  for (int step = 0; step < config.steps; ++step) {
    GradResult<Head> g = [&] {
      try {
        return bptt_grad(current, paths, threads);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string("fit_mle diverged at step ") + std::to_string(step) + ": " + e.what());
      }
    }();
    if (step == 0) result.initial_loss = g.loss;
    result.losses.push_back(g.loss);
    if (g.loss < best_loss) {
      best_loss = g.loss;
      result.net = current;
    }

    double squared_norm = 0.0;
    Net::visit([&](auto& t) { squared_norm += t.squaredNorm(); }, g.grad);
    const double norm = std::sqrt(squared_norm);
    if (norm > config.clip_norm) {
      const double scale = config.clip_norm / norm;
      Net::visit([scale](auto& t) { t *= scale; }, g.grad);
    }

    const double lr = config.learning_rate;
    if (config.kind == OptimizerKind::sgd) {
      Net::visit([lr](auto& p, auto& d) { p -= lr * d; }, current, g.grad);
    } else {
      const double b1 = config.beta1;
      const double b2 = config.beta2;
      const double c1 = 1.0 - std::pow(b1, step + 1);
      const double c2 = 1.0 - std::pow(b2, step + 1);
      const double eps = config.epsilon;
      Net::visit(
          [=](auto& p, auto& d, auto& m, auto& v) {
            m = b1 * m + (1.0 - b1) * d;
            v = (b2 * v.array() + (1.0 - b2) * d.array().square()).matrix();
            p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
          },
          current, g.grad, first_moment, second_moment);
    }
  }

  const double last_loss = mean_nll(current, paths, threads);
  if (!std::isfinite(last_loss)) {
    throw NumericalError("fit_mle diverged after the final step");
  }
  if (config.steps == 0) result.initial_loss = last_loss;
  if (last_loss < best_loss) {
    best_loss = last_loss;
    result.net = std::move(current);
  }
  result.final_loss = best_loss;
  return result;
}

template struct TransitionNet<GaussianTransitionHead>;
template struct TransitionNet<TopicalTransitionHead>;
template GradResult<GaussianTransitionHead> bptt_grad(const GaussianNet&, std::span<const std::vector<Vec>>, int);
template GradResult<TopicalTransitionHead> bptt_grad(const TopicalNet&, std::span<const std::vector<int>>, int);
template FitResult<GaussianTransitionHead> fit_mle(const GaussianNet&, std::span<const std::vector<Vec>>,
                                                   const OptimConfig&, int);
template FitResult<TopicalTransitionHead> fit_mle(const TopicalNet&, std::span<const std::vector<int>>,
                                                  const OptimConfig&, int);

}  // namespace ssl
