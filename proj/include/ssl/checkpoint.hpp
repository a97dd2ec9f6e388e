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
#include <variant>
#include <vector>

#include "ssl/models.hpp"
#include "ssl/training.hpp"

namespace ssl {

inline constexpr int kCheckpointSchema = 1;

// Layout: 8-byte magic, u64 little-endian header length, JSON header, then
// every tensor listed in the header as raw little-endian f64, column-major.
struct Checkpoint {
  int schema_version = kCheckpointSchema;
  std::variant<GaussianSsl, TopicalSsl> model;
  int epoch = 0;
  std::vector<std::vector<Vec>> gaussian_paths;
  std::vector<std::vector<int>> topical_paths;
  std::uint64_t seed = 0;
  std::string config_json = "{}";

  HeadKind head() const { return model.index() == 0 ? HeadKind::gaussian : HeadKind::topical; }
};

void write_checkpoint(const Checkpoint& checkpoint, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ssl
