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

#include <string>

#include <json.hpp>

#include "ssl/data.hpp"
#include "ssl/eval.hpp"
#include "ssl/training.hpp"

namespace ssl {

// Everything a CLI run can be configured with. JSON keys mirror the field
// names; unknown keys are rejected.
struct RunConfig {
  TrainConfig train;
  GaussianInit gaussian;
  TopicalInit topical;
  double split_fraction = 0.6;
  int eval_particles = kDefaultEvalParticles;
  int horizon = -1;

  void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& config);
// Overrides fields of `base` with those present in `j`.
RunConfig apply_json(RunConfig base, const nlohmann::json& j);
RunConfig load_run_config(const std::string& path, RunConfig base = {});

}  // namespace ssl
