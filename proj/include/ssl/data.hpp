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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ssl/models.hpp"
#include "ssl/numerics.hpp"

namespace ssl {

enum class TrajectoryKind { line, sine, circle, swiss_roll };

std::string to_string(TrajectoryKind kind);
TrajectoryKind trajectory_from_string(const std::string& name);

// Curve parameters. Samples sit at parameter values start + i * step.
//   line:       (s, slope * s + intercept)
//   sine:       (s, amplitude * sin(frequency * s))
//   circle:     center + radius * (cos s, sin s)
//   swiss_roll: (roll_rate * s * cos s, roll_rate * s * sin s)
struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::line;
  int length = 300;
  double noise_sigma = 0.1;
  double start = 0.0;
  double step = 0.05;
  double slope = 0.5;
  double intercept = 0.0;
  double amplitude = 1.0;
  double frequency = 1.0;
  double radius = 1.0;
  double center_x = 0.0;
  double center_y = 0.0;
  double roll_rate = 0.1;

  static TrajectorySpec defaults(TrajectoryKind kind);
  void validate() const;
  Vec point(double s) const;
};

struct Trajectory {
  std::vector<Vec> truth;
  std::vector<Vec> observed;
};

Trajectory gen_trajectory(const TrajectorySpec& spec, Rng& rng);

void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out);
Trajectory read_trajectory_csv(std::istream& in);
void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);

inline constexpr int kStartToken = 0;
inline constexpr int kOovToken = 1;

struct Vocabulary {
  std::vector<std::string> types;
  std::vector<std::int64_t> counts;
  int size() const { return static_cast<int>(types.size()); }
};

struct Corpus {
  std::vector<std::vector<int>> documents;
  Vocabulary vocab;

  int vocab_size() const { return vocab.size(); }
  std::size_t token_count() const;
  void validate() const;
};

// Generator for synthetic corpora: an SSL with a scaled random LSTM and head,
// and a banded topic-word matrix in which neighbouring topics share words.
struct SyntheticSpec {
  int topics = 5;
  int vocab = 50;
  int hidden = 8;
  double lstm_scale = 3.0;
  double head_scale = 4.0;
  int band_width = 20;  // words per topic; bands overlap when width * topics > vocab
  double band_leak = 0.01;  // mass spread over the rest of the vocabulary
};

TopicalSsl make_synthetic_generator(const SyntheticSpec& spec, Rng rng);

struct GeneratedCorpus {
  Corpus corpus;
  std::vector<std::vector<int>> topics;
};

// Each document d is drawn from its own stream rng.split(d).
GeneratedCorpus gen_topical_corpus(const TopicalSsl& generator, int num_docs, int doc_length, const Rng& rng);

// Lowercases ASCII, splits on anything that is not [a-z0-9]. One file is one document.
std::vector<std::string> tokenize(const std::string& text);

Corpus ingest_corpus(const std::vector<std::filesystem::path>& files, int vocab_size, int min_doc_len = 500);

void write_corpus_jsonl(const std::vector<std::vector<int>>& documents, std::ostream& out);
std::vector<std::vector<int>> read_corpus_jsonl(std::istream& in);
void write_vocab_json(const Vocabulary& vocab, std::ostream& out);
Vocabulary read_vocab_json(std::istream& in);

void save_corpus(const Corpus& corpus, const std::filesystem::path& jsonl, const std::filesystem::path& vocab_json);
Corpus load_corpus(const std::filesystem::path& jsonl, const std::filesystem::path& vocab_json);

// Prefix split along time (a trajectory) or documents (a corpus): train holds
// the first floor(fraction * n) items. No shuffling.
std::size_t split_point(std::size_t n, double fraction);

template <class T>
struct Split {
  std::vector<T> train;
  std::vector<T> test;
};

template <class T>
Split<T> split(const std::vector<T>& items, double fraction) {
  const std::size_t cut = split_point(items.size(), fraction);
  return {std::vector<T>(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(cut)),
          std::vector<T>(items.begin() + static_cast<std::ptrdiff_t>(cut), items.end())};
}

}  // namespace ssl
