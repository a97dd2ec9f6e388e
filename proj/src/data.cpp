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

#include "ssl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "ssl/errors.hpp"

namespace ssl {

using nlohmann::json;

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::line: return "line";
    case TrajectoryKind::sine: return "sine";
    case TrajectoryKind::circle: return "circle";
    case TrajectoryKind::swiss_roll: return "swiss_roll";
  }
  return "unknown";
}

TrajectoryKind trajectory_from_string(const std::string& name) {
  if (name == "line") return TrajectoryKind::line;
  if (name == "sine") return TrajectoryKind::sine;
  if (name == "circle") return TrajectoryKind::circle;
  if (name == "swiss_roll" || name == "swiss-roll") return TrajectoryKind::swiss_roll;
  throw DataError("unknown trajectory kind '" + name + "'");
}

TrajectorySpec TrajectorySpec::defaults(TrajectoryKind kind) {
  TrajectorySpec spec;
  spec.kind = kind;
  switch (kind) {
    case TrajectoryKind::line:
      spec.step = 0.05;
      spec.noise_sigma = 0.1;
      break;
    case TrajectoryKind::sine:
      spec.step = 0.1;
      spec.noise_sigma = 0.1;
      break;
    case TrajectoryKind::circle:
      spec.step = 2.0 * std::numbers::pi / 50.0;
      spec.noise_sigma = 0.1;
      break;
    case TrajectoryKind::swiss_roll:
      spec.start = 4.0 * std::numbers::pi;
      spec.step = 0.1;
      spec.roll_rate = 0.1;
      spec.noise_sigma = 0.1;
      break;
  }
  return spec;
}

void TrajectorySpec::validate() const {
  if (length < 2) throw DataError("trajectory: length must be at least 2");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw DataError("trajectory: noise sigma must be >= 0");
  if (!std::isfinite(start) || !std::isfinite(step)) throw DataError("trajectory: non-finite parameterisation");
}

Vec TrajectorySpec::point(double s) const {
  Vec p(2);
  switch (kind) {
    case TrajectoryKind::line: p << s, slope * s + intercept; break;
    case TrajectoryKind::sine: p << s, amplitude * std::sin(frequency * s); break;
    case TrajectoryKind::circle: p << center_x + radius * std::cos(s), center_y + radius * std::sin(s); break;
    case TrajectoryKind::swiss_roll: p << roll_rate * s * std::cos(s), roll_rate * s * std::sin(s); break;
  }
  return p;
}

Trajectory gen_trajectory(const TrajectorySpec& spec, Rng& rng) {
  spec.validate();
  Trajectory out;
  out.truth.reserve(spec.length);
  out.observed.reserve(spec.length);
  for (int i = 0; i < spec.length; ++i) {
    Vec truth = spec.point(spec.start + i * spec.step);
    Vec noisy = truth;
    for (Eigen::Index j = 0; j < noisy.size(); ++j) noisy[j] += spec.noise_sigma * rng.normal();
    out.truth.push_back(std::move(truth));
    out.observed.push_back(std::move(noisy));
  }
  return out;
}

void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out) {
  if (trajectory.truth.size() != trajectory.observed.size()) throw ShapeError("trajectory: column length mismatch");
  out << "t,true_x,true_y,obs_x,obs_y\n";
  char buffer[160];
  for (std::size_t t = 0; t < trajectory.truth.size(); ++t) {
    const Vec& a = trajectory.truth[t];
    const Vec& b = trajectory.observed[t];
    if (a.size() != 2 || b.size() != 2) throw ShapeError("trajectory: points must be 2D");
    std::snprintf(buffer, sizeof buffer, "%zu,%.17g,%.17g,%.17g,%.17g\n", t, a[0], a[1], b[0], b[1]);
    out << buffer;
  }
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "t,true_x,true_y,obs_x,obs_y") {
    throw DataError("trajectory csv: expected header t,true_x,true_y,obs_x,obs_y");
  }
  Trajectory out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    double v[5];
    int n = 0;
    while (n < 5 && std::getline(fields, cell, ',')) {
      char* end = nullptr;
      v[n] = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0' || !std::isfinite(v[n])) {
        throw DataError("trajectory csv: bad number at row " + std::to_string(row));
      }
      ++n;
    }
    if (n != 5 || std::getline(fields, cell, ',')) {
      throw DataError("trajectory csv: expected 5 columns at row " + std::to_string(row));
    }
    out.truth.push_back(Vec{{v[1], v[2]}});
    out.observed.push_back(Vec{{v[3], v[4]}});
  }
  if (out.truth.empty()) throw DataError("trajectory csv: no rows");
  return out;
}

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace

void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_trajectory_csv(trajectory, out);
  finish(out, path);
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_trajectory_csv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.size();
  return n;
}

void Corpus::validate() const {
  const int V = vocab_size();
  for (std::size_t d = 0; d < documents.size(); ++d) {
    for (int w : documents[d]) {
      if (w < 0 || w >= V) throw DataError("corpus: token out of range in document " + std::to_string(d));
    }
  }
}

TopicalSsl make_synthetic_generator(const SyntheticSpec& spec, Rng rng) {
  if (spec.topics < 1 || spec.vocab < 1 || spec.band_width < 1 || spec.band_width > spec.vocab) {
    throw DataError("synthetic generator: bad topic/vocabulary/band sizes");
  }
  if (!(spec.band_leak >= 0.0 && spec.band_leak < 1.0)) throw DataError("synthetic generator: leak must be in [0, 1)");
  TopicalSsl model;
  Rng net_rng = rng.split("net");
  model.net = make_topical_net(spec.topics, spec.hidden, net_rng);
  for (auto& w : model.net.lstm.weights) w *= spec.lstm_scale;
  Rng head_rng = rng.split("head");
  for (Eigen::Index i = 0; i < model.net.head.weight.size(); ++i) {
    model.net.head.weight.data()[i] = spec.head_scale * head_rng.normal();
  }
  model.topics = TopicMatrix::uniform(spec.topics, spec.vocab);
  Mat& phi = model.topics.phi;
  const int V = spec.vocab;
  const int K = spec.topics;
  for (int k = 0; k < K; ++k) {
    const int first = static_cast<int>(static_cast<long long>(k) * V / K);
    const double outside = V > spec.band_width ? spec.band_leak / (V - spec.band_width) : 0.0;
    const double inside = (V > spec.band_width ? 1.0 - spec.band_leak : 1.0) / spec.band_width;
    phi.row(k).setConstant(outside);
    for (int j = 0; j < spec.band_width; ++j) phi(k, (first + j) % V) = inside;
  }
  return model;
}

GeneratedCorpus gen_topical_corpus(const TopicalSsl& generator, int num_docs, int doc_length, const Rng& rng) {
  if (num_docs < 1 || doc_length < 1) throw DataError("corpus generator: need positive document count and length");
  const int V = generator.topics.vocab_size();
  GeneratedCorpus out;
  out.corpus.documents.resize(num_docs);
  out.topics.resize(num_docs);
  for (int d = 0; d < num_docs; ++d) {
    Rng stream = rng.split(static_cast<std::uint64_t>(d));
    out.topics[d] = generator.net.sample_path(doc_length, stream);
    auto& doc = out.corpus.documents[d];
    doc.reserve(doc_length);
    for (int z : out.topics[d]) {
      const Vec row = generator.topics.phi.row(z).transpose();
      doc.push_back(categorical_sample(row, stream));
    }
  }
  out.corpus.vocab.types.resize(V);
  out.corpus.vocab.counts.assign(V, 0);
  for (int w = 0; w < V; ++w) out.corpus.vocab.types[w] = "w" + std::to_string(w);
  for (const auto& doc : out.corpus.documents) {
    for (int w : doc) ++out.corpus.vocab.counts[w];
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (c >= 'A' && c <= 'Z') {
      current.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      current.push_back(static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Corpus ingest_corpus(const std::vector<std::filesystem::path>& files, int vocab_size, int min_doc_len) {
  if (vocab_size < 2) throw DataError("ingest: vocabulary size must be at least 2");
  std::vector<std::vector<std::string>> kept;
  for (const auto& file : files) {
    auto in = open_in(file);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw DataError("cannot read '" + file.string() + "'");
    auto tokens = tokenize(buffer.str());
    if (static_cast<int>(tokens.size()) >= min_doc_len && !tokens.empty()) kept.push_back(std::move(tokens));
  }
  if (kept.empty()) throw DataError("ingest: corpus is empty after filtering");

  std::map<std::string, std::int64_t> freq;
  for (const auto& doc : kept) {
    for (const auto& token : doc) ++freq[token];
  }
  std::vector<std::pair<std::string, std::int64_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t retained = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(vocab_size - 2));

  Corpus corpus;
  corpus.vocab.types = {"<s>", "<oov>"};
  corpus.vocab.counts = {0, 0};
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < retained; ++i) {
    index.emplace(ranked[i].first, static_cast<int>(corpus.vocab.types.size()));
    corpus.vocab.types.push_back(ranked[i].first);
    corpus.vocab.counts.push_back(ranked[i].second);
  }
  for (const auto& doc : kept) {
    std::vector<int> ids;
    ids.reserve(doc.size());
    for (const auto& token : doc) {
      const auto it = index.find(token);
      if (it == index.end()) {
        ids.push_back(kOovToken);
        ++corpus.vocab.counts[kOovToken];
      } else {
        ids.push_back(it->second);
      }
    }
    corpus.documents.push_back(std::move(ids));
  }
  return corpus;
}

void write_corpus_jsonl(const std::vector<std::vector<int>>& documents, std::ostream& out) {
  for (const auto& doc : documents) {
    out << "{\"tokens\":[";
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (i > 0) out << ',';
      out << doc[i];
    }
    out << "]}\n";
  }
}

std::vector<std::vector<int>> read_corpus_jsonl(std::istream& in) {
  std::vector<std::vector<int>> docs;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      docs.push_back(json::parse(line).at("tokens").get<std::vector<int>>());
    } catch (const json::exception& e) {
      throw DataError("corpus jsonl line " + std::to_string(row) + ": " + e.what());
    }
  }
  return docs;
}

void write_vocab_json(const Vocabulary& vocab, std::ostream& out) {
  json j;
  j["types"] = vocab.types;
  j["counts"] = vocab.counts;
  out << j.dump() << '\n';
}

Vocabulary read_vocab_json(std::istream& in) {
  Vocabulary vocab;
  try {
    const json j = json::parse(in);
    vocab.types = j.at("types").get<std::vector<std::string>>();
    vocab.counts = j.at("counts").get<std::vector<std::int64_t>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("vocab json: ") + e.what());
  }
  if (vocab.types.size() != vocab.counts.size()) throw DataError("vocab json: types and counts differ in length");
  return vocab;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& jsonl, const std::filesystem::path& vocab_json) {
  auto docs = open_out(jsonl);
  write_corpus_jsonl(corpus.documents, docs);
  finish(docs, jsonl);
  auto vocab = open_out(vocab_json);
  write_vocab_json(corpus.vocab, vocab);
  finish(vocab, vocab_json);
}

Corpus load_corpus(const std::filesystem::path& jsonl, const std::filesystem::path& vocab_json) {
  Corpus corpus;
  {
    auto in = open_in(jsonl);
    try {
      corpus.documents = read_corpus_jsonl(in);
    } catch (const DataError& e) {
      throw DataError(jsonl.string() + ": " + e.what());
    }
  }
  auto in = open_in(vocab_json);
  corpus.vocab = read_vocab_json(in);
  if (corpus.documents.empty()) throw DataError(jsonl.string() + ": no documents");
  corpus.validate();
  return corpus;
}

std::size_t split_point(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw DataError("split: fraction must lie in (0, 1)");
  const auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  if (cut == 0 || cut >= n) throw DataError("split: fraction leaves one side empty");
  return cut;
}

}  // namespace ssl
