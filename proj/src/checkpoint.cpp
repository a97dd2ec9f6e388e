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

#include "ssl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "ssl/errors.hpp"

namespace ssl {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'S', 'S', 'L', 'C', 'K', 'P', 'T', '1'};
constexpr const char* kGateNames[4] = {"input", "forget", "output", "candidate"};

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  v = to_le(v);
  char bytes[8];
  std::memcpy(bytes, &v, 8);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  char bytes[8];
  if (!in.read(bytes, 8)) throw DataError("checkpoint: truncated");
  std::uint64_t v;
  std::memcpy(&v, bytes, 8);
  return to_le(v);
}

class TensorWriter {
 public:
  void add(const std::string& name, const Mat& m) { push(name, m.rows(), m.cols(), m.data()); }
  void add(const std::string& name, const Vec& v) { push(name, v.size(), 1, v.data()); }

  ordered_json manifest() const { return manifest_; }
  void write_payload(std::ostream& out) const {
    for (double d : payload_) put_u64(out, std::bit_cast<std::uint64_t>(d));
  }

 private:
  void push(const std::string& name, Eigen::Index rows, Eigen::Index cols, const double* data) {
    manifest_.push_back({{"name", name}, {"rows", rows}, {"cols", cols}});
    payload_.insert(payload_.end(), data, data + rows * cols);
  }
  ordered_json manifest_ = ordered_json::array();
  std::vector<double> payload_;
};

class TensorReader {
 public:
  TensorReader(const json& manifest, std::istream& in) {
    for (const auto& entry : manifest) {
      Entry e{entry.at("name").get<std::string>(), entry.at("rows").get<Eigen::Index>(),
              entry.at("cols").get<Eigen::Index>(), {}};
      if (e.rows < 0 || e.cols < 0) throw DataError("checkpoint: negative tensor shape for " + e.name);
      e.data.resize(static_cast<std::size_t>(e.rows * e.cols));
      for (double& d : e.data) d = std::bit_cast<double>(get_u64(in));
      entries_.push_back(std::move(e));
    }
  }

  Mat mat(const std::string& name) {
    const Entry& e = next(name);
    return Eigen::Map<const Mat>(e.data.data(), e.rows, e.cols);
  }
  Vec vec(const std::string& name) {
    const Entry& e = next(name);
    if (e.cols != 1) throw DataError("checkpoint: tensor " + name + " is not a vector");
    return Eigen::Map<const Vec>(e.data.data(), e.rows);
  }
  bool done() const { return cursor_ == entries_.size(); }

 private:
  struct Entry {
    std::string name;
    Eigen::Index rows, cols;
    std::vector<double> data;
  };
  const Entry& next(const std::string& name) {
    if (cursor_ >= entries_.size() || entries_[cursor_].name != name) {
      throw DataError("checkpoint: expected tensor " + name);
    }
    return entries_[cursor_++];
  }
  std::vector<Entry> entries_;
  std::size_t cursor_ = 0;
};

void add_lstm(TensorWriter& w, const LstmParams& p) {
  for (int g = 0; g < 4; ++g) w.add(std::string("lstm.weight.") + kGateNames[g], p.weights[g]);
  for (int g = 0; g < 4; ++g) w.add(std::string("lstm.bias.") + kGateNames[g], p.biases[g]);
}

void read_lstm(TensorReader& r, LstmParams& p) {
  for (int g = 0; g < 4; ++g) p.weights[g] = r.mat(std::string("lstm.weight.") + kGateNames[g]);
  for (int g = 0; g < 4; ++g) p.biases[g] = r.vec(std::string("lstm.bias.") + kGateNames[g]);
}

}  // namespace

void write_checkpoint(const Checkpoint& c, std::ostream& out) {
  TensorWriter w;
  ordered_json header;
  header["schema_version"] = c.schema_version;
  header["head"] = to_string(c.head());
  header["epoch"] = c.epoch;
  header["seed"] = c.seed;
  header["config"] = ordered_json::parse(c.config_json);
  ordered_json meta;
  if (const auto* g = std::get_if<GaussianSsl>(&c.model)) {
    meta["forget_bias_offset"] = g->net.lstm.forget_bias_offset;
    meta["residual"] = g->net.head.residual;
    meta["increment_input"] = g->net.head.increment_input;
    meta["input_scale"] = g->net.head.input_scale;
    add_lstm(w, g->net.lstm);
    w.add("head.weight", g->net.head.weight);
    w.add("head.bias", g->net.head.bias);
    w.add("head.log_var", g->net.head.log_var);
    w.add("head.start", g->net.head.start);
    w.add("emission.C", g->emission.C);
    w.add("emission.b", g->emission.b);
    w.add("emission.R", g->emission.R);
    meta["paths"] = c.gaussian_paths.size();
    for (std::size_t i = 0; i < c.gaussian_paths.size(); ++i) {
      const auto& path = c.gaussian_paths[i];
      Mat m(path.empty() ? 0 : path[0].size(), static_cast<Eigen::Index>(path.size()));
      for (std::size_t t = 0; t < path.size(); ++t) m.col(static_cast<Eigen::Index>(t)) = path[t];
      w.add("path." + std::to_string(i), m);
    }
  } else {
    const auto& t = std::get<TopicalSsl>(c.model);
    meta["forget_bias_offset"] = t.net.lstm.forget_bias_offset;
    meta["beta"] = t.topics.beta;
    add_lstm(w, t.net.lstm);
    w.add("head.weight", t.net.head.weight);
    w.add("head.bias", t.net.head.bias);
    w.add("topics.phi", t.topics.phi);
    w.add("topics.counts", Mat(t.topics.counts.cast<double>()));
    meta["paths"] = c.topical_paths.size();
    for (std::size_t i = 0; i < c.topical_paths.size(); ++i) {
      const auto& path = c.topical_paths[i];
      Vec v(static_cast<Eigen::Index>(path.size()));
      for (std::size_t s = 0; s < path.size(); ++s) v[static_cast<Eigen::Index>(s)] = path[s];
      w.add("path." + std::to_string(i), v);
    }
  }
  header["meta"] = meta;
  header["tensors"] = w.manifest();
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  w.write_payload(out);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw DataError("checkpoint: bad magic");
  const std::uint64_t length = get_u64(in);
  if (length > (1ull << 30)) throw DataError("checkpoint: header too large");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw DataError("checkpoint: truncated header");

  Checkpoint c;
  try {
    const json header = json::parse(text);
    c.schema_version = header.at("schema_version").get<int>();
    if (c.schema_version != kCheckpointSchema) {
      throw DataError("checkpoint: schema version " + std::to_string(c.schema_version) + " (expected " +
                      std::to_string(kCheckpointSchema) + ")");
    }
    c.epoch = header.at("epoch").get<int>();
    c.seed = header.at("seed").get<std::uint64_t>();
    c.config_json = header.at("config").dump();
    const json& meta = header.at("meta");
    const HeadKind head = head_from_string(header.at("head").get<std::string>());
    TensorReader r(header.at("tensors"), in);
    const auto paths = meta.at("paths").get<std::size_t>();
    if (head == HeadKind::gaussian) {
      GaussianSsl g;
      read_lstm(r, g.net.lstm);
      g.net.lstm.forget_bias_offset = meta.at("forget_bias_offset").get<double>();
      g.net.head.weight = r.mat("head.weight");
      g.net.head.bias = r.vec("head.bias");
      g.net.head.log_var = r.vec("head.log_var");
      g.net.head.start = r.vec("head.start");
      g.net.head.residual = meta.at("residual").get<bool>();
      g.net.head.increment_input = meta.at("increment_input").get<bool>();
      g.net.head.input_scale = meta.at("input_scale").get<double>();
      g.emission.C = r.mat("emission.C");
      g.emission.b = r.vec("emission.b");
      g.emission.R = r.mat("emission.R");
      for (std::size_t i = 0; i < paths; ++i) {
        const Mat m = r.mat("path." + std::to_string(i));
        std::vector<Vec> path;
        for (Eigen::Index t = 0; t < m.cols(); ++t) path.push_back(m.col(t));
        c.gaussian_paths.push_back(std::move(path));
      }
      g.net.lstm.validate();
      g.emission.validate();
      c.model = std::move(g);
    } else {
      TopicalSsl t;
      read_lstm(r, t.net.lstm);
      t.net.lstm.forget_bias_offset = meta.at("forget_bias_offset").get<double>();
      t.net.head.weight = r.mat("head.weight");
      t.net.head.bias = r.vec("head.bias");
      t.topics.phi = r.mat("topics.phi");
      t.topics.counts = r.mat("topics.counts").cast<std::int64_t>();
      t.topics.beta = meta.at("beta").get<double>();
      for (std::size_t i = 0; i < paths; ++i) {
        const Vec v = r.vec("path." + std::to_string(i));
        std::vector<int> path(static_cast<std::size_t>(v.size()));
        for (Eigen::Index s = 0; s < v.size(); ++s) path[static_cast<std::size_t>(s)] = static_cast<int>(v[s]);
        c.topical_paths.push_back(std::move(path));
      }
      t.net.lstm.validate();
      c.model = std::move(t);
    }
    if (!r.done()) throw DataError("checkpoint: unexpected extra tensors");
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  } catch (const ShapeError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint: trailing bytes after payload");
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_checkpoint(checkpoint, out);
  out.flush();
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  try {
    return read_checkpoint(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace ssl
