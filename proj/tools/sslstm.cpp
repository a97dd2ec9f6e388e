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

// sslstm: generate, train, eval, predict, paths.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ssl/checkpoint.hpp"
#include "ssl/config.hpp"
#include "ssl/data.hpp"
#include "ssl/errors.hpp"
#include "ssl/eval.hpp"
#include "ssl/inference.hpp"
#include "ssl/training.hpp"

namespace fs = std::filesystem;
using namespace ssl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct UsageError : Error {
  using Error::Error;
};

struct Globals {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;
  std::string config;
};

fs::path vocab_path_for(const fs::path& corpus) { return fs::path(corpus).replace_extension(".vocab.json"); }

bool is_trajectory_file(const fs::path& p) { return p.extension() == ".csv"; }

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

// Writes to --out, or stdout when it is empty or "-".
template <class F>
void emit(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out = open_output(path);
  write(out);
  out.flush();
  if (!out) throw DataError("write failed for '" + path + "'");
}

// ---- generate ----

struct GenerateArgs {
  std::string kind = "line";
  int length = 0;
  std::optional<double> noise;
  bool corpus = false;
  int topics = 5;
  int vocab = 50;
  int docs = 200;
  int doc_length = 100;
  std::string generator_out;
  std::vector<std::string> ingest;
  int min_doc_len = 500;
};

int cmd_generate(const Globals& g, const GenerateArgs& a) {
  if (g.out.empty()) throw UsageError("generate: --out is required");
  const Rng root(g.seed);
  if (!a.ingest.empty()) {
    std::vector<fs::path> files(a.ingest.begin(), a.ingest.end());
    const Corpus corpus = ingest_corpus(files, a.vocab, a.min_doc_len);
    save_corpus(corpus, g.out, vocab_path_for(g.out));
    std::cout << "ingested " << corpus.documents.size() << " documents, " << corpus.token_count()
              << " tokens, V=" << corpus.vocab_size() << " -> " << g.out << "\n";
    return kExitOk;
  }
  if (a.corpus) {
    SyntheticSpec spec;
    spec.topics = a.topics;
    spec.vocab = a.vocab;
    spec.band_width = std::max(1, std::min(a.vocab, 2 * a.vocab / std::max(1, a.topics)));
    const TopicalSsl generator = make_synthetic_generator(spec, root.split("generator"));
    const GeneratedCorpus data = gen_topical_corpus(generator, a.docs, a.doc_length, root.split("data"));
    save_corpus(data.corpus, g.out, vocab_path_for(g.out));
    if (!a.generator_out.empty()) {
      Checkpoint c;
      c.model = generator;
      c.seed = g.seed;
      c.topical_paths = data.topics;
      save_checkpoint(c, a.generator_out);
    }
    std::cout << "generated corpus K=" << a.topics << " V=" << a.vocab << " docs=" << a.docs
              << " len=" << a.doc_length << " -> " << g.out << "\n";
    return kExitOk;
  }
  TrajectorySpec spec = TrajectorySpec::defaults(trajectory_from_string(a.kind));
  if (a.length > 0) spec.length = a.length;
  if (a.noise) spec.noise_sigma = *a.noise;
  Rng rng = root.split("data");
  const Trajectory traj = gen_trajectory(spec, rng);
  save_trajectory(traj, g.out);
  std::cout << "generated " << to_string(spec.kind) << " T=" << spec.length << " sigma=" << spec.noise_sigma
            << " -> " << g.out << "\n";
  return kExitOk;
}

// ---- shared loading ----

struct LoadedData {
  bool trajectory = false;
  Trajectory traj;
  Corpus corpus;
};

LoadedData load_data(const std::string& path) {
  LoadedData d;
  if (is_trajectory_file(path)) {
    d.trajectory = true;
    d.traj = load_trajectory(path);
  } else {
    d.corpus = load_corpus(path, vocab_path_for(path));
  }
  return d;
}

RunConfig base_config(const Globals& g) {
  RunConfig c;
  if (!g.config.empty()) c = load_run_config(g.config, c);
  return c;
}

// ---- train ----

struct TrainArgs {
  std::string data;
  std::string head;
  std::string init;
  std::string metrics;
  std::optional<int> iters, pmax, pstart, steps, hidden, topics, sweeps, ramp;
  std::optional<double> lr, resample;
  std::optional<std::string> schedule, inference;
};

RunConfig train_config(const Globals& g, const TrainArgs& a, bool trajectory) {
  RunConfig c = base_config(g);
  c.train.head = trajectory ? HeadKind::gaussian : HeadKind::topical;
  if (!a.head.empty() && head_from_string(a.head) != c.train.head) {
    throw UsageError("train: --head " + a.head + " does not match the data file");
  }
  if (a.iters) c.train.em_iterations = *a.iters;
  if (a.pmax) c.train.particles_max = *a.pmax;
  if (a.pstart) c.train.particles_start = *a.pstart;
  if (a.steps) c.train.optimizer.steps = *a.steps;
  if (a.lr) c.train.optimizer.learning_rate = *a.lr;
  if (a.sweeps) c.train.sweeps = *a.sweeps;
  if (a.resample) c.train.resample_threshold = *a.resample;
  if (a.ramp) c.train.doubling_ramp = *a.ramp;
  if (a.schedule) c.train.schedule = schedule_from_string(*a.schedule);
  if (a.inference) c.train.inference = inference_from_string(*a.inference);
  if (a.hidden) (trajectory ? c.gaussian.hidden : c.topical.hidden) = *a.hidden;
  if (a.topics) c.topical.topics = *a.topics;
  c.train.seed = g.seed;
  c.train.threads = g.threads;
  c.validate();
  return c;
}

int cmd_train(const Globals& g, const TrainArgs& a) {
  if (g.out.empty()) throw UsageError("train: --out is required");
  const LoadedData d = load_data(a.data);
  RunConfig cfg = train_config(g, a, d.trajectory);
  const std::string metrics_path = a.metrics.empty() ? g.out + ".metrics.jsonl" : a.metrics;
  std::ofstream metrics = open_output(metrics_path);
  const Rng root(g.seed);

  Checkpoint c;
  c.seed = g.seed;
  c.config_json = to_json(cfg).dump();
  std::optional<Checkpoint> resume;
  if (!a.init.empty()) resume = load_checkpoint(a.init);

  auto finish = [&](int code) {
    save_checkpoint(c, g.out);
    return code;
  };

  if (d.trajectory) {
    const std::size_t cut = split_point(d.traj.observed.size(), cfg.split_fraction);
    const std::vector<std::vector<Vec>> train{
        std::vector<Vec>(d.traj.observed.begin(), d.traj.observed.begin() + static_cast<std::ptrdiff_t>(cut))};
    TrainState<GaussianSsl> state;
    GaussianSsl model;
    if (resume) {
      if (resume->head() != HeadKind::gaussian) throw DataError("train: --init checkpoint is not gaussian");
      model = std::get<GaussianSsl>(resume->model);
      state.epoch = resume->epoch;
      state.paths = resume->gaussian_paths;
    } else {
      model = init_gaussian_ssl(cfg.gaussian, train, root.split("init"));
    }
    try {
      stochastic_em(model, std::span<const std::vector<Vec>>(train), cfg.train, state, &metrics);
    } catch (const NumericalError&) {
      c.model = model;
      c.epoch = state.epoch;
      c.gaussian_paths = state.paths;
      finish(kExitNumerical);
      throw;
    }
    c.model = model;
    c.epoch = state.epoch;
    c.gaussian_paths = state.paths;
  } else {
    const auto parts = split(d.corpus.documents, cfg.split_fraction);
    TrainState<TopicalSsl> state;
    TopicalSsl model;
    if (resume) {
      if (resume->head() != HeadKind::topical) throw DataError("train: --init checkpoint is not topical");
      model = std::get<TopicalSsl>(resume->model);
      state.epoch = resume->epoch;
      state.paths = resume->topical_paths;
    } else {
      model = init_topical_ssl(cfg.topical, d.corpus.vocab_size(), root.split("init"));
    }
    if (model.topics.vocab_size() != d.corpus.vocab_size()) throw DataError("train: vocabulary size mismatch");
    try {
      stochastic_em(model, std::span<const std::vector<int>>(parts.train), cfg.train, state, &metrics);
    } catch (const NumericalError&) {
      c.model = model;
      c.epoch = state.epoch;
      c.topical_paths = state.paths;
      finish(kExitNumerical);
      throw;
    }
    c.model = model;
    c.epoch = state.epoch;
    c.topical_paths = state.paths;
  }
  finish(kExitOk);
  std::cout << "trained " << to_string(cfg.train.head) << " for " << c.epoch << " iterations -> " << g.out << "\n";
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::optional<int> particles;
  std::string subset = "test";
};

std::vector<std::vector<int>> pick_documents(const Corpus& corpus, double fraction, const std::string& subset) {
  if (subset == "all") return corpus.documents;
  auto parts = split(corpus.documents, fraction);
  if (subset == "train") return parts.train;
  if (subset == "test") return parts.test;
  throw UsageError("eval: --subset must be train, test or all");
}

int cmd_eval(const Globals& g, const EvalArgs& a) {
  const Checkpoint c = load_checkpoint(a.checkpoint);
  RunConfig cfg = apply_json(RunConfig{}, nlohmann::json::parse(c.config_json.empty() ? "{}" : c.config_json));
  if (!g.config.empty()) cfg = load_run_config(g.config, cfg);
  const int P = a.particles.value_or(cfg.eval_particles);
  if (P < 1) throw UsageError("eval: --P must be positive");
  const std::string hash = config_hash(c.config_json);
  const Rng eval = Rng(g.seed).split("eval");
  const LoadedData d = load_data(a.data);
  std::vector<MetricReport> reports;

  if (c.head() == HeadKind::topical) {
    if (d.trajectory) throw DataError("eval: topical checkpoint needs a corpus");
    const auto& model = std::get<TopicalSsl>(c.model);
    if (model.topics.vocab_size() != d.corpus.vocab_size()) throw DataError("eval: vocabulary size mismatch");
    const auto docs = pick_documents(d.corpus, cfg.split_fraction, a.subset);
    const PerplexityResult ppl = perplexity(model, docs, P, eval, g.threads);
    reports.push_back({"perplexity", ppl.value, P, g.seed, hash, {}});
    reports.push_back({"nnz", static_cast<double>(nnz(model.topics.counts)), P, g.seed, hash, {}});
  } else {
    if (!d.trajectory) throw DataError("eval: gaussian checkpoint needs a trajectory csv");
    const auto& model = std::get<GaussianSsl>(c.model);
    TrackingOptions opt;
    opt.train_length = split_point(d.traj.observed.size(), cfg.split_fraction);
    opt.particles = P;
    Rng rng = eval;
    const TrackingResult r = tracking_error(model, d.traj.observed, d.traj.truth, opt, rng);
    reports.push_back({"filtered_rmse", r.filtered_rmse, P, g.seed, hash, {}});
    reports.push_back({"blind_rmse", r.blind_rmse, P, g.seed, hash, {}});
  }
  emit(g.out, [&](std::ostream& out) {
    for (const auto& r : reports) write_metric_json(r, out);
  });
  return kExitOk;
}

// ---- predict ----

struct PredictArgs {
  std::string checkpoint;
  std::string data;
  std::optional<int> horizon;
  std::optional<int> particles;
};

int cmd_predict(const Globals& g, const PredictArgs& a) {
  const Checkpoint c = load_checkpoint(a.checkpoint);
  if (c.head() != HeadKind::gaussian) throw DataError("predict: needs a gaussian checkpoint");
  RunConfig cfg = apply_json(RunConfig{}, nlohmann::json::parse(c.config_json.empty() ? "{}" : c.config_json));
  if (!g.config.empty()) cfg = load_run_config(g.config, cfg);
  const Trajectory traj = load_trajectory(a.data);
  const auto& model = std::get<GaussianSsl>(c.model);
  TrackingOptions opt;
  opt.train_length = split_point(traj.observed.size(), cfg.split_fraction);
  opt.particles = a.particles.value_or(cfg.eval_particles);
  opt.horizon = a.horizon.value_or(cfg.horizon);
  if (opt.particles < 1) throw UsageError("predict: --P must be positive");
  Rng rng = Rng(g.seed).split("eval");
  const TrackingResult r = tracking_error(model, traj.observed, traj.truth, opt, rng);
  emit(g.out, [&](std::ostream& out) {
    out << "t,kind,pred_x,pred_y\n";
    char buffer[128];
    for (std::size_t i = 0; i < r.filtered.size(); ++i) {
      std::snprintf(buffer, sizeof buffer, "%zu,filtered,%.17g,%.17g\n", opt.train_length + i, r.filtered[i][0],
                    r.filtered[i][1]);
      out << buffer;
    }
    for (std::size_t i = 0; i < r.blind.size(); ++i) {
      std::snprintf(buffer, sizeof buffer, "%zu,blind,%.17g,%.17g\n", opt.train_length + i, r.blind[i][0],
                    r.blind[i][1]);
      out << buffer;
    }
  });
  return kExitOk;
}

// ---- paths ----

struct PathsArgs {
  std::string checkpoint;
  std::string data;
  int doc = 0;
  int particles = 8;
};

int cmd_paths(const Globals& g, const PathsArgs& a) {
  const Checkpoint c = load_checkpoint(a.checkpoint);
  if (c.head() != HeadKind::topical) throw DataError("paths: needs a topical checkpoint");
  if (a.particles < 1) throw UsageError("paths: --P must be positive");
  const auto& model = std::get<TopicalSsl>(c.model);
  const Corpus corpus = load_corpus(a.data, vocab_path_for(a.data));
  if (a.doc < 0 || a.doc >= static_cast<int>(corpus.documents.size())) throw UsageError("paths: --doc out of range");
  const std::vector<int>& words = corpus.documents[a.doc];
  Rng rng = Rng(g.seed).split("paths");

  // Reference: the cached S-step draw when the document was trained on, else a fresh SMC draw.
  std::vector<int> reference;
  if (a.doc < static_cast<int>(c.topical_paths.size()) && c.topical_paths[a.doc].size() == words.size()) {
    reference = c.topical_paths[a.doc];
  } else {
    reference = draw_final_path(smc_pass(model, std::span<const int>(words), 1, rng).system, rng);
  }
  const auto ref = make_reference(model, reference);
  const auto res = conditional_smc_pass(model, std::span<const int>(words), ref, a.particles, rng);
  nlohmann::ordered_json j;
  std::vector<int> t(words.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<int>(i);
  std::vector<std::vector<int>> particles;
  for (int p = 0; p < a.particles; ++p) particles.push_back(trace_path(res.system, p));
  j["t"] = t;
  j["particles"] = particles;
  j["weights"] = res.system.norm_weights.back();
  emit(g.out, [&](std::ostream& out) { out << j.dump() << '\n'; });
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"State space LSTM toolkit: stochastic EM with particle Gibbs"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random stream")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker thread cap")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output file (stdout when omitted, where allowed)");
  app.add_option("--config", g.config, "JSON file overriding defaults");
  app.fallthrough();

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Write a synthetic trajectory or corpus, or ingest text files");
  gen->add_option("--kind", ga.kind, "line | sine | circle | swiss_roll")->capture_default_str();
  gen->add_option("--T", ga.length, "Trajectory length");
  gen->add_option("--noise", ga.noise, "Observation noise sigma");
  gen->add_flag("--corpus", ga.corpus, "Generate a synthetic topical corpus");
  gen->add_option("--K", ga.topics, "Topics")->capture_default_str();
  gen->add_option("--V", ga.vocab, "Vocabulary size")->capture_default_str();
  gen->add_option("--docs", ga.docs, "Documents")->capture_default_str();
  gen->add_option("--len", ga.doc_length, "Document length")->capture_default_str();
  gen->add_option("--generator-out", ga.generator_out, "Save the generating model as a checkpoint");
  gen->add_option("--ingest", ga.ingest, "Text files to ingest, one document each");
  gen->add_option("--min-doc-len", ga.min_doc_len, "Drop ingested documents shorter than this")->capture_default_str();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Run stochastic EM");
  train->add_option("--data", ta.data, "Trajectory .csv or corpus .jsonl")->required();
  train->add_option("--head", ta.head, "gaussian | topical (checked against the data)");
  train->add_option("--init", ta.init, "Continue from this checkpoint");
  train->add_option("--metrics", ta.metrics, "Metrics JSON-lines path (default <out>.metrics.jsonl)");
  train->add_option("--iters", ta.iters, "EM iterations");
  train->add_option("--pmax", ta.pmax, "Final particle count K");
  train->add_option("--pstart", ta.pstart, "Initial particle count");
  train->add_option("--schedule", ta.schedule, "linear | doubling");
  train->add_option("--ramp", ta.ramp, "Epochs per doubling (0: automatic)");
  train->add_option("--inference", ta.inference, "pg | factored");
  train->add_option("--sweeps", ta.sweeps, "S-step sweeps per sequence");
  train->add_option("--resample", ta.resample, "S-step resampling ESS fraction (>= 1: every step)");
  train->add_option("--steps", ta.steps, "Optimizer steps per M-step");
  train->add_option("--lr", ta.lr, "Learning rate");
  train->add_option("--hidden", ta.hidden, "LSTM hidden size");
  train->add_option("--K", ta.topics, "Topics (topical head)");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Emit metric JSON lines");
  eval->add_option("--checkpoint", ea.checkpoint, "Checkpoint")->required();
  eval->add_option("--data", ea.data, "Trajectory .csv or corpus .jsonl")->required();
  eval->add_option("--P", ea.particles, "Evaluation particles (default from config, 64)");
  eval->add_option("--subset", ea.subset, "train | test | all (corpora)")->capture_default_str();

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Write filtered and blind predictions as CSV");
  predict->add_option("--checkpoint", pa.checkpoint, "Gaussian checkpoint")->required();
  predict->add_option("--data", pa.data, "Trajectory .csv")->required();
  predict->add_option("--horizon", pa.horizon, "Blind steps (default: test segment)");
  predict->add_option("--P", pa.particles, "Filtering particles");

  PathsArgs xa;
  auto* paths = app.add_subcommand("paths", "Dump one PG sweep's particle paths as JSON");
  paths->add_option("--checkpoint", xa.checkpoint, "Topical checkpoint")->required();
  paths->add_option("--data", xa.data, "Corpus .jsonl")->required();
  paths->add_option("--doc", xa.doc, "Document index")->capture_default_str();
  paths->add_option("--P", xa.particles, "Particles")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(g, ga);
    if (*train) return cmd_train(g, ta);
    if (*eval) return cmd_eval(g, ea);
    if (*predict) return cmd_predict(g, pa);
    if (*paths) return cmd_paths(g, xa);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
