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

#include "ssl/config.hpp"

#include <fstream>
#include <set>

#include "ssl/errors.hpp"

namespace ssl {

using nlohmann::json;
using nlohmann::ordered_json;

void RunConfig::validate() const {
  train.validate();
  if (gaussian.latent_dim < 1 || gaussian.hidden < 1) throw DataError("config: gaussian sizes must be positive");
  if (!(gaussian.input_scale > 0.0)) throw DataError("config: input_scale must be positive");
  if (!(gaussian.transition_var > 0.0) || !(gaussian.emission_var > 0.0)) {
    throw DataError("config: gaussian variances must be positive");
  }
  if (topical.topics < 1 || topical.hidden < 1) throw DataError("config: topical sizes must be positive");
  if (!(topical.beta > 0.0)) throw DataError("config: beta must be positive");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw DataError("config: split_fraction must lie in (0, 1)");
  if (eval_particles < 1) throw DataError("config: eval_particles must be positive");
}

ordered_json to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  const OptimConfig& o = t.optimizer;
  ordered_json j;
  j["train"] = {{"em_iterations", t.em_iterations},
                {"particles_start", t.particles_start},
                {"particles_max", t.particles_max},
                {"schedule", to_string(t.schedule)},
                {"doubling_ramp", t.doubling_ramp},
                {"inference", to_string(t.inference)},
                {"sweeps", t.sweeps},
                {"resample_threshold", t.resample_threshold},
                {"seed", t.seed},
                {"head", to_string(t.head)},
                {"threads", t.threads},
                {"check_improvement", t.check_improvement}};
  j["optimizer"] = {{"kind", to_string(o.kind)}, {"learning_rate", o.learning_rate}, {"clip_norm", o.clip_norm},
                    {"steps", o.steps},          {"beta1", o.beta1},                 {"beta2", o.beta2},
                    {"epsilon", o.epsilon}};
  j["gaussian"] = {{"latent_dim", c.gaussian.latent_dim},
                   {"hidden", c.gaussian.hidden},
                   {"transition_var", c.gaussian.transition_var},
                   {"emission_var", c.gaussian.emission_var},
                   {"residual", c.gaussian.residual},
                   {"increment_input", c.gaussian.increment_input},
                   {"input_scale", c.gaussian.input_scale}};
  j["topical"] = {{"topics", c.topical.topics}, {"hidden", c.topical.hidden}, {"beta", c.topical.beta}};
  j["split_fraction"] = c.split_fraction;
  j["eval_particles"] = c.eval_particles;
  j["horizon"] = c.horizon;
  return j;
}

namespace {

void check_keys(const json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) throw DataError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw DataError("config: unknown key '" + where + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig apply_json(RunConfig c, const json& j) {
  try {
    check_keys(j, "", {"train", "optimizer", "gaussian", "topical", "split_fraction", "eval_particles", "horizon"});
    if (j.contains("train")) {
      const json& t = j["train"];
      check_keys(t, "train.", {"em_iterations", "particles_start", "particles_max", "schedule", "doubling_ramp",
                               "inference", "sweeps", "resample_threshold", "seed", "head", "threads",
                               "check_improvement"});
      read(t, "em_iterations", c.train.em_iterations);
      read(t, "particles_start", c.train.particles_start);
      read(t, "particles_max", c.train.particles_max);
      if (t.contains("schedule")) c.train.schedule = schedule_from_string(t["schedule"].get<std::string>());
      read(t, "doubling_ramp", c.train.doubling_ramp);
      if (t.contains("inference")) c.train.inference = inference_from_string(t["inference"].get<std::string>());
      read(t, "sweeps", c.train.sweeps);
      read(t, "resample_threshold", c.train.resample_threshold);
      read(t, "seed", c.train.seed);
      if (t.contains("head")) c.train.head = head_from_string(t["head"].get<std::string>());
      read(t, "threads", c.train.threads);
      read(t, "check_improvement", c.train.check_improvement);
    }
    if (j.contains("optimizer")) {
      const json& o = j["optimizer"];
      check_keys(o, "optimizer.", {"kind", "learning_rate", "clip_norm", "steps", "beta1", "beta2", "epsilon"});
      if (o.contains("kind")) c.train.optimizer.kind = optimizer_from_string(o["kind"].get<std::string>());
      read(o, "learning_rate", c.train.optimizer.learning_rate);
      read(o, "clip_norm", c.train.optimizer.clip_norm);
      read(o, "steps", c.train.optimizer.steps);
      read(o, "beta1", c.train.optimizer.beta1);
      read(o, "beta2", c.train.optimizer.beta2);
      read(o, "epsilon", c.train.optimizer.epsilon);
    }
    if (j.contains("gaussian")) {
      const json& g = j["gaussian"];
      check_keys(g, "gaussian.", {"latent_dim", "hidden", "transition_var", "emission_var", "residual",
                                    "increment_input", "input_scale"});
      read(g, "latent_dim", c.gaussian.latent_dim);
      read(g, "hidden", c.gaussian.hidden);
      read(g, "transition_var", c.gaussian.transition_var);
      read(g, "emission_var", c.gaussian.emission_var);
      read(g, "residual", c.gaussian.residual);
      read(g, "increment_input", c.gaussian.increment_input);
      read(g, "input_scale", c.gaussian.input_scale);
    }
    if (j.contains("topical")) {
      const json& t = j["topical"];
      check_keys(t, "topical.", {"topics", "hidden", "beta"});
      read(t, "topics", c.topical.topics);
      read(t, "hidden", c.topical.hidden);
      read(t, "beta", c.topical.beta);
    }
    read(j, "split_fraction", c.split_fraction);
    read(j, "eval_particles", c.eval_particles);
    read(j, "horizon", c.horizon);
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return apply_json(std::move(base), j);
}

}  // namespace ssl
