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

// Acceptance suite. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "ssl/checkpoint.hpp"
#include "ssl/data.hpp"
#include "ssl/eval.hpp"
#include "ssl/inference.hpp"
#include "ssl/training.hpp"
#include "test_util.hpp"
#include "tiny_models.hpp"

namespace ssl {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vec random_vec(int n, Rng& rng, double scale = 1.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

LstmParams random_lstm(int h, int in, Rng& rng) {
  LstmParams p = LstmParams::zeros(h, in);
  for (int g = 0; g < 4; ++g) {
    for (Eigen::Index i = 0; i < p.weights[g].size(); ++i) p.weights[g].data()[i] = 0.5 * rng.normal();
    p.biases[g] = random_vec(h, rng, 0.5);
  }
  p.forget_bias_offset = 0.25;
  return p;
}

// 1
Outcome gradient_check() {
  constexpr int T = 6, h = 4;
  std::size_t checked = 0, failures = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = Rng(1000).split(seed);
    GaussianNet g{random_lstm(h, 2, rng), GaussianTransitionHead::zeros(2, h, 0.0, seed % 2 == 0, seed % 4 < 2)};
    g.head.weight = random_vec(2 * h, rng).reshaped(2, h);
    g.head.bias = random_vec(2, rng, 0.3);
    g.head.log_var = random_vec(2, rng, 0.3);
    g.head.start = random_vec(2, rng, 0.5);
    std::vector<std::vector<Vec>> gp(3);
    for (auto& p : gp)
      for (int t = 0; t < T; ++t) p.push_back(random_vec(2, rng));
    const auto rg = testing::gradient_check(g, gp);

    constexpr int K = 3;
    TopicalNet n{random_lstm(h, K + 1, rng), TopicalTransitionHead::zeros(K, h)};
    n.head.weight = random_vec(K * h, rng, 1.5).reshaped(K, h);
    n.head.bias = random_vec(K, rng, 0.5);
    std::vector<std::vector<int>> tp(3);
    for (auto& p : tp)
      for (int t = 0; t < T; ++t) p.push_back(static_cast<int>(rng.next_u64() % K));
    const auto rt = testing::gradient_check(n, tp);

    checked += rg.checked + rt.checked;
    failures += rg.failures + rt.failures;
    worst = std::max({worst, rg.worst_relative, rt.worst_relative});
  }
  return {failures == 0, fmt("%zu/%zu entries outside 1e-4, worst relative %.2e", failures, checked, worst)};
}

// 2
Outcome kalman_oracle() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng = Rng(2000).split(seed);
    Mat A(2, 2);
    A << 0.95, 0.2, -0.15, 0.9;
    const Mat Q = 0.1 * Mat::Identity(2, 2);
    GaussianEmission em{Mat::Identity(2, 2), Vec::Zero(2), 0.3 * Mat::Identity(2, 2)};
    em.C << 1.0, 0.5, 0.0, 1.0;
    em.b << 0.2, -0.1;
    Vec z = Vec::Zero(2);
    std::vector<Vec> xs;
    for (int t = 0; t < 20; ++t) {
      z = mvn_sample({A * z, Q}, rng);
      xs.push_back(mvn_sample({em.C * z + em.b, em.R}, rng));
    }
    const auto kf = testing::information_kalman(A, Q, Vec::Zero(2), em, xs);
    for (int t = 0; t < 20; ++t) {
      const auto msg = gauss_messages({kf[t].predicted_mean, kf[t].predicted_cov}, em, xs[t]);
      worst = std::max({worst, (msg.gamma.mean - kf[t].filtered_mean).cwiseAbs().maxCoeff(),
                        (msg.gamma.cov - kf[t].filtered_cov).cwiseAbs().maxCoeff()});
    }
  }
  double gap = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = testing::make_lds_fixture(20, 2100 + seed);
    Rng rng = Rng(2200).split(seed);
    const auto res = smc_pass(f.model, std::span<const Vec>(f.observations), 2048, rng);
    gap = std::max(gap, std::abs(res.log_marginal - f.log_likelihood));
  }
  return {worst < 1e-8 && gap < 0.5,
          fmt("messages max error %.2e (< 1e-8); SMC P=2048 worst gap %.3f nats over 5 LDS (< 0.5)", worst, gap)};
}

const std::vector<int> kWords{0, 1, 1};

// 3
Outcome smc_unbiased() {
  const TopicalSsl model = testing::tiny_topical_model(2, 2, 3000);
  double exact = 0.0;
  for (double j : testing::joint_by_enumeration(model, kWords, testing::all_paths(2, 3))) exact += j;
  Rng rng(3001);
  constexpr int runs = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < runs; ++r) {
    const double z = std::exp(smc_pass(model, std::span<const int>(kWords), 4, rng).log_marginal);
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / runs;
  const double se = std::sqrt((sum_sq / runs - mean * mean) / (runs - 1));
  const double zscore = std::abs(mean - exact) / se;
  return {zscore < 3.0, fmt("mean %.6f exact %.6f, |diff| = %.2f SE", mean, exact, zscore)};
}

// 4
Outcome pg_invariance() {
  const TopicalSsl model = testing::tiny_topical_model(2, 2, 4000);
  const auto paths = testing::all_paths(2, 3);
  const auto posterior = testing::normalized(testing::joint_by_enumeration(model, kWords, paths));
  Rng rng(4001);
  std::vector<double> freq(paths.size(), 0.0);
  constexpr int sweeps = 20000, burn_in = 500;
  auto ref = make_reference(model, std::vector<int>{0, 0, 0});
  for (int s = 0; s < sweeps + burn_in; ++s) {
    ref = make_reference(model, particle_gibbs_sweep(model, std::span<const int>(kWords), ref, 4, rng));
    if (s >= burn_in) freq[testing::path_index(ref.path, 2)] += 1.0 / sweeps;
  }
  const double tv = testing::total_variation(freq, posterior);

  bool exact = true;
  for (const auto& z : paths) {
    const auto r = make_reference(model, z);
    exact = exact && particle_gibbs_sweep(model, std::span<const int>(kWords), r, 1, rng) == z;
  }
  const auto f = testing::make_lds_fixture(15, 4002);
  Rng draw(4003);
  const auto gref = make_reference(f.model, trace_path(smc_pass(f.model, std::span<const Vec>(f.observations), 8, draw).system, 0));
  const auto back = particle_gibbs_sweep(f.model, std::span<const Vec>(f.observations), gref, 1, draw);
  for (std::size_t t = 0; t < back.size(); ++t)
    exact = exact && back[t].size() == gref.path[t].size() &&
            std::memcmp(back[t].data(), gref.path[t].data(), sizeof(double) * back[t].size()) == 0;
  return {tv < 0.02 && exact, fmt("TV %.4f (< 0.02); P=1 returns reference bit-exactly: %s", tv, exact ? "yes" : "no")};
}

// 5. Stochastic EM from the uniform initialisation on a coupled synthetic corpus.
struct TopicalSetup {
  int iterations = 100;
  int particles_max = 16;
  int hidden = 8;
  int steps = 10;
  double learning_rate = 1e-2;
  double resample_threshold = 0.5;
  int docs = 200;
  int doc_length = 100;
};

Outcome pg_beats_factored() {
  const TopicalSetup setup;
  int wins = 0;
  std::string detail;
  for (int s = 0; s < 5; ++s) {
    const Rng root(5000 + s);
    const SyntheticSpec spec;  // K=5, V=50
    const TopicalSsl generator = make_synthetic_generator(spec, root.split("generator"));
    const auto data = gen_topical_corpus(generator, setup.docs, setup.doc_length, root.split("data"));
    const auto parts = split(data.corpus.documents, 0.6);
    TopicalInit ti;
    ti.topics = spec.topics;
    ti.hidden = setup.hidden;
    const TopicalSsl init = init_topical_ssl(ti, spec.vocab, root.split("init"));
    double ppl[2];
    for (int which = 0; which < 2; ++which) {
      TrainConfig cfg;
      cfg.head = HeadKind::topical;
      cfg.em_iterations = setup.iterations;
      cfg.particles_max = setup.particles_max;
      cfg.resample_threshold = setup.resample_threshold;
      cfg.inference = which == 0 ? InferenceKind::pg : InferenceKind::factored;
      cfg.optimizer.steps = setup.steps;
      cfg.optimizer.learning_rate = setup.learning_rate;
      cfg.seed = root.seed();
      const auto r = stochastic_em(init, std::span<const std::vector<int>>(parts.train), cfg);
      ppl[which] = perplexity(r.model, parts.test, kDefaultEvalParticles, root.split("eval")).value;
    }
    wins += ppl[0] < ppl[1];
    detail += fmt("%s%.2f/%.2f", s ? " " : "", ppl[0], ppl[1]);
  }
  return {wins >= 4, fmt("PG wins %d/5 (need 4); pg/factored test perplexity: ", wins) + detail};
}

// 6
Outcome tracking() {
  bool ok = true;
  std::string detail;
  for (TrajectoryKind kind : {TrajectoryKind::sine, TrajectoryKind::circle, TrajectoryKind::swiss_roll}) {
    const TrajectorySpec spec = TrajectorySpec::defaults(kind);
    double filtered = 0.0, blind = 0.0;
    for (int s = 0; s < 5; ++s) {
      const Rng root(7000 + s);
      Rng drng = root.split("data");
      const Trajectory traj = gen_trajectory(spec, drng);
      const std::size_t cut = split_point(traj.observed.size(), 0.6);
      const std::vector<std::vector<Vec>> train{{traj.observed.begin(), traj.observed.begin() + cut}};
      const GaussianSsl init = init_gaussian_ssl(GaussianInit{}, train, root.split("init"));
      TrainConfig cfg;
      cfg.optimizer.steps = 20;
      cfg.optimizer.learning_rate = 1e-2;
      cfg.seed = root.seed();
      const auto r = stochastic_em(init, std::span<const std::vector<Vec>>(train), cfg);
      TrackingOptions opt;
      opt.train_length = cut;
      Rng erng = root.split("eval");
      const auto res = tracking_error(r.model, std::span<const Vec>(traj.observed), std::span<const Vec>(traj.truth), opt, erng);
      filtered += res.filtered_rmse / 5.0;
      blind += res.blind_rmse / 5.0;
    }
    const bool pass = filtered < spec.noise_sigma && blind >= filtered;
    ok = ok && pass;
    detail += fmt("%s%s filtered %.4f blind %.4f sigma %.2f", detail.empty() ? "" : "; ", to_string(kind).c_str(),
                  filtered, blind, spec.noise_sigma);
  }
  return {ok, detail};
}

std::string checkpoint_bytes(const Checkpoint& c) {
  std::ostringstream out;
  write_checkpoint(c, out);
  return out.str();
}

bool round_trips(const Checkpoint& c) {
  const std::string bytes = checkpoint_bytes(c);
  std::istringstream in(bytes);
  return checkpoint_bytes(read_checkpoint(in)) == bytes;
}

// 7
Outcome analytic_identities() {
  bool ok = true;
  std::string detail;
  Rng rng(7100);
  int worst_v = 0;
  double worst_ppl_gap = 0.0;
  for (int V : {2, 7, 50, 1000}) {
    TopicalInit ti;
    ti.topics = 4;
    const TopicalSsl uniform = init_topical_ssl(ti, V, rng.split(V));
    std::vector<std::vector<int>> docs(5);
    for (auto& d : docs)
      for (int t = 0; t < 30; ++t) d.push_back(static_cast<int>(rng.next_u64() % V));
    const double ppl = perplexity(uniform, docs, 16, rng.split("eval")).value;
    if (std::abs(ppl - V) / V >= worst_ppl_gap) {
      worst_ppl_gap = std::abs(ppl - V) / V;
      worst_v = V;
    }
  }
  ok = ok && worst_ppl_gap < 1e-12;
  detail += fmt("uniform perplexity relative gap %.1e (V=%d)", worst_ppl_gap, worst_v);

  double norm_gap = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 20);
    const double scale = i % 3 == 0 ? 700.0 : 5.0;
    Vec logits = random_vec(n, rng, scale);
    norm_gap = std::max(norm_gap, std::abs(softmax(logits).sum() - 1.0));
    std::vector<double> lw(logits.data(), logits.data() + n);
    double s = 0.0;
    for (double w : normalize_log_weights(lw)) s += w;
    norm_gap = std::max(norm_gap, std::abs(s - 1.0));
  }
  ok = ok && norm_gap < 1e-12;
  detail += fmt("; normalization max gap %.1e", norm_gap);

  int round_trip_failures = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = testing::make_lds_fixture(12, 7200 + seed);
    const std::vector<std::vector<Vec>> seqs{f.observations};
    Checkpoint g;
    g.model = init_gaussian_ssl(GaussianInit{}, seqs, rng.split(seed));
    g.gaussian_paths = seqs;
    g.epoch = static_cast<int>(seed);
    g.seed = seed;
    Checkpoint t;
    t.model = testing::tiny_topical_model(3, 6, 7300 + seed);
    t.topical_paths = {{0, 1, 2, 2}, {1}};
    t.config_json = "{\"a\":1}";
    round_trip_failures += !round_trips(g) + !round_trips(t);
  }
  ok = ok && round_trip_failures == 0;
  detail += fmt("; checkpoint round-trip failures %d/20", round_trip_failures);
  return {ok, detail};
}

// 8
std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "ssl_acceptance_cli";
  fs::remove_all(root);
  const std::vector<std::string> commands = {
      "generate --kind swiss_roll --T 150 --seed 4 --out {d}/traj.csv",
      "generate --corpus --K 4 --V 30 --docs 20 --len 30 --seed 5 --generator-out {d}/gen.ckpt --out {d}/corpus.jsonl",
      "train --data {d}/traj.csv --iters 4 --steps 3 --seed 6 --threads 1 --out {d}/g.ckpt",
      "train --data {d}/corpus.jsonl --K 4 --iters 4 --steps 3 --pmax 4 --seed 6 --threads 1 --out {d}/t.ckpt",
      "train --data {d}/corpus.jsonl --K 4 --iters 4 --steps 3 --inference factored --seed 6 --out {d}/f.ckpt",
      "eval --checkpoint {d}/g.ckpt --data {d}/traj.csv --seed 2",
      "eval --checkpoint {d}/t.ckpt --data {d}/corpus.jsonl --P 16 --seed 2",
      "predict --checkpoint {d}/g.ckpt --data {d}/traj.csv --seed 2 --out {d}/pred.csv",
      "paths --checkpoint {d}/t.ckpt --data {d}/corpus.jsonl --doc 2 --P 5 --seed 2",
  };
  std::vector<std::vector<std::pair<std::string, std::string>>> runs(2);
  for (int r = 0; r < 2; ++r) {
    // Same directory both times so echoed paths match.
    const fs::path dir = root / "run";
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (std::size_t i = 0; i < commands.size(); ++i) {
      const std::string args = std::regex_replace(commands[i], std::regex("\\{d\\}"), dir.string());
      const fs::path out = dir / ("stdout" + std::to_string(i) + ".txt");
      const std::string cmd = std::string(SSLSTM_BIN) + " " + args + " >" + out.string() + " 2>/dev/null";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "command failed: " + args};
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::string text = slurp(entry.path());
      // Wall-clock timings are the one nondeterministic field.
      if (entry.path().string().ends_with(".metrics.jsonl"))
        text = std::regex_replace(text, std::regex("\"wall_ms\":[0-9.eE+-]+"), "\"wall_ms\":0");
      runs[r].emplace_back(entry.path().filename().string(), text);
    }
    std::sort(runs[r].begin(), runs[r].end());
  }
  std::string differing;
  if (runs[0].size() != runs[1].size()) differing = "file sets";
  for (std::size_t i = 0; differing.empty() && i < runs[0].size(); ++i)
    if (runs[0][i] != runs[1][i]) differing = runs[0][i].first;
  fs::remove_all(root);
  return {differing.empty(), differing.empty() ? fmt("%zu commands, %zu output files byte-identical", commands.size(),
                                                     runs[0].size())
                                               : "differs: " + differing};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // <= 0: no limit
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace ssl

int main(int argc, char** argv) {
  using namespace ssl;
  const std::vector<Criterion> all = {
      {1, "bptt gradient check", 10, gradient_check},
      {2, "kalman oracle", 30, kalman_oracle},
      {3, "smc unbiasedness", 60, smc_unbiased},
      {4, "particle gibbs invariance", 120, pg_invariance},
      {5, "pg beats factored", 600, pg_beats_factored},
      {6, "tracking", 600, tracking},
      {7, "analytic identities", 60, analytic_identities},
      {8, "cli determinism", 0, cli_determinism},
  };
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s <= 0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::string budget = c.budget_s > 0 ? fmt(" / %.0f s", c.budget_s) : "";
    std::printf("%s [%d] %s: %s (%.1f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                budget.c_str());
    std::fflush(stdout);
  }
  return failures;
}
