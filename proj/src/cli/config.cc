// Copyright 2026 The vqplan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "vqplan/cli/config.h"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vqplan/common/error.h"
#include "vqplan/common/hash.h"
#include "vqplan/common/strict_json.h"

extern char** environ;

namespace vqplan::cli {

namespace {

void RequireStage(bool ok, const std::string& field, const std::string& stage,
                  const std::string& why) {
  if (!ok) throw ConfigError(field + ": " + why + " (stage " + stage + ")");
}

nlohmann::json ModelToJson(const ModelSettings& m) {
  return {{"config", m.config.ToJson()}, {"train", m.train.ToJson(false)}};
}

// Training settings as they enter stage hashes. Chunking into checkpoints
// leaves the result bit-identical, so checkpoint_every is excluded.
nlohmann::json HashedTrain(const TrainSettings& t, bool codec) {
  nlohmann::json j = t.ToJson(codec);
  j.erase("checkpoint_every");
  return j;
}

nlohmann::json HashedModel(const ModelSettings& m) {
  return {{"config", m.config.ToJson()}, {"train", HashedTrain(m.train, false)}};
}

ModelSettings ModelFromJson(const nlohmann::json& j, const std::string& path) {
  ModelSettings m;
  StrictObject o(j, path);
  if (const auto* c = o.Child("config")) m.config = transition::TransitionConfig::FromJson(*c);
  if (const auto* t = o.Child("train")) {
    m.train = TrainSettings::FromJson(*t, path + ".train", false, m.train);
  }
  o.Finish();
  return m;
}

}  // namespace

nlohmann::json TrainSettings::ToJson(bool codec) const {
  nlohmann::json j = {{"steps", steps},
                      {"batch", batch},
                      {"learning_rate", adam.learning_rate},
                      {"clip_norm", adam.clip_norm},
                      {"log_every", log_every},
                      {"checkpoint_every", checkpoint_every}};
  if (codec) {
    j["restart_every"] = restart_every;
    j["restart_threshold"] = restart_threshold;
  }
  return j;
}

TrainSettings TrainSettings::FromJson(const nlohmann::json& j, const std::string& path,
                                      bool codec, TrainSettings t) {
  StrictObject o(j, path);
  o.Get("steps", t.steps);
  o.Get("batch", t.batch);
  o.Get("learning_rate", t.adam.learning_rate);
  o.Get("clip_norm", t.adam.clip_norm);
  o.Get("log_every", t.log_every);
  o.Get("checkpoint_every", t.checkpoint_every);
  if (codec) {
    o.Get("restart_every", t.restart_every);
    o.Get("restart_threshold", t.restart_threshold);
  }
  o.Finish();
  if (t.steps < 0) throw ConfigError(path + ".steps: must be >= 0");
  if (t.batch < 1) throw ConfigError(path + ".batch: must be >= 1");
  if (!(t.adam.learning_rate > 0.0)) throw ConfigError(path + ".learning_rate: must be > 0");
  if (t.log_every < 1) throw ConfigError(path + ".log_every: must be >= 1");
  if (t.checkpoint_every < 0) throw ConfigError(path + ".checkpoint_every: must be >= 0");
  if (t.restart_every < 0) throw ConfigError(path + ".restart_every: must be >= 0");
  return t;
}

envs::EnvConfig EnvConfigFromJson(const nlohmann::json& j) {
  envs::EnvConfig c;
  StrictObject o(j, "env");
  o.Require("name", c.name);
  if (c.name == "blindmatch") {
    std::string s = envs::OpponentKindName(c.opponent.kind);
    o.Get("opponent", s);
    if (s == "uniform") {
      c.opponent.kind = envs::OpponentKind::kUniform;
    } else if (s == "epsilon_minimax") {
      c.opponent.kind = envs::OpponentKind::kEpsilonMinimax;
    } else {
      throw ConfigError("env.opponent: unknown value '" + s + "'");
    }
    o.Get("opponent_epsilon", c.opponent.epsilon);
    s = envs::StartRuleName(c.start);
    o.Get("start", s);
    if (s == "agent") {
      c.start = envs::StartRule::kAgent;
    } else if (s == "opponent") {
      c.start = envs::StartRule::kOpponent;
    } else if (s == "alternate") {
      c.start = envs::StartRule::kAlternate;
    } else {
      throw ConfigError("env.start: unknown value '" + s + "'");
    }
  } else if (c.name == "goalgrid") {
    o.Get("width", c.width);
    o.Get("height", c.height);
    o.Get("wind", c.wind);
    o.Get("goal", c.goal);
    o.Get("respawn", c.respawn);
    o.Get("episode_cap", c.episode_cap);
  } else {
    throw ConfigError("env.name: unknown environment '" + c.name + "'");
  }
  o.Finish();
  if (c.name == "blindmatch") {
    if (!(c.opponent.epsilon >= 0.0 && c.opponent.epsilon <= 1.0)) {
      throw ConfigError("env.opponent_epsilon: must be in [0, 1]");
    }
  } else {
    envs::MakeEnvironment(c);  // validates the grid fields
  }
  return c;
}

void ExperimentConfig::Validate() const {
  RequireStage(!output_dir.empty(), "output_dir", "all", "missing field");
  RequireStage(data.episodes >= 1, "data.episodes", "gen-data", "must be >= 1");
  RequireStage(data.validation_fraction >= 0.0 && data.validation_fraction < 1.0,
               "data.validation_fraction", "gen-data", "must be in [0, 1)");
  RequireStage(!data.behavior.skill_mixture.empty(), "data.skill_mixture", "gen-data",
               "must be nonempty");
  for (double q : data.behavior.skill_mixture) {
    RequireStage(q >= 0.0 && q <= 1.0, "data.skill_mixture", "gen-data",
                 "entries must be in [0, 1]");
  }
  codec.Validate();
  RequireStage(!models.empty(), "models", "train", "at least one transition model required");
  for (const auto& [name, m] : models) {
    m.config.Validate();
    RequireStage(m.config.variant != transition::PathVariant::kDeterministic,
                 "models." + name + ".config.variant", "train",
                 "a codec-backed model cannot be deterministic; use the baseline section");
    RequireStage(m.config.variant != transition::PathVariant::kPure || codec.factorized,
                 "codec.factorized", "train", "pure models need a factorized codec");
    RequireStage(m.config.variant == transition::PathVariant::kJumpy || codec.stride == 1,
                 "codec.stride", "train", "only jumpy models accept a stride above 1");
  }
  RequireStage(baseline.config.variant == transition::PathVariant::kDeterministic,
               "baseline.config.variant", "train", "must be deterministic");
  baseline.config.Validate();
  frame.Validate();
  search.Validate();
  RequireStage(eval.games >= 1, "eval.games", "play", "must be >= 1");
  RequireStage(!eval.budgets.empty(), "eval.budgets", "budget-sweep", "must be nonempty");
  for (int b : eval.budgets) {
    RequireStage(b >= 1, "eval.budgets", "budget-sweep", "entries must be >= 1");
  }
  RequireStage(eval.mbre_k >= 1, "eval.mbre_k", "eval-mbre", "must be >= 1");
  RequireStage(eval.mbre_horizon >= 0, "eval.mbre_horizon", "eval-mbre", "must be >= 0");
  RequireStage(eval.mbre_prefix >= 1, "eval.mbre_prefix", "eval-mbre", "must be >= 1");
  RequireStage(eval.mbre_truths >= 1, "eval.mbre_truths", "eval-mbre", "must be >= 1");
}

nlohmann::json ExperimentConfig::ToJson() const {
  nlohmann::json models_json = nlohmann::json::object();
  for (const auto& [name, m] : models) models_json[name] = ModelToJson(m);
  return {{"output_dir", output_dir},
          {"seed", seed},
          {"env", envs::EnvConfigToJson(env)},
          {"data",
           {{"episodes", data.episodes},
            {"validation_fraction", data.validation_fraction},
            {"skill_mixture", data.behavior.skill_mixture}}},
          {"codec", codec.ToJson()},
          {"codec_train", codec_train.ToJson(true)},
          {"models", models_json},
          {"baseline", ModelToJson(baseline)},
          {"frame", frame.ToJson()},
          {"frame_train", frame_train.ToJson(false)},
          {"search", search.ToJson()},
          {"eval",
           {{"games", eval.games},
            {"budgets", eval.budgets},
            {"mbre_k", eval.mbre_k},
            {"mbre_horizon", eval.mbre_horizon},
            {"mbre_prefix", eval.mbre_prefix},
            {"mbre_truths", eval.mbre_truths}}}};
}

ExperimentConfig ExperimentConfig::FromJson(const nlohmann::json& j) {
  ExperimentConfig c;
  c.baseline.config.variant = transition::PathVariant::kDeterministic;
  StrictObject o(j, "");
  o.Require("output_dir", c.output_dir);
  o.Get("seed", c.seed);
  const nlohmann::json* env = o.Child("env");
  if (env == nullptr) throw ConfigError("env: missing field (stage gen-data)");
  c.env = EnvConfigFromJson(*env);
  const nlohmann::json* data = o.Child("data");
  if (data == nullptr) throw ConfigError("data: missing field (stage gen-data)");
  {
    StrictObject d(*data, "data");
    if (!d.Has("episodes")) throw ConfigError("data.episodes: missing field (stage gen-data)");
    d.Get("episodes", c.data.episodes);
    d.Get("validation_fraction", c.data.validation_fraction);
    d.Get("skill_mixture", c.data.behavior.skill_mixture);
    d.Finish();
  }
  if (const auto* x = o.Child("codec")) c.codec = codec::CodecConfig::FromJson(*x);
  if (const auto* x = o.Child("codec_train")) {
    c.codec_train = TrainSettings::FromJson(*x, "codec_train", true, c.codec_train);
  }
  if (const auto* x = o.Child("models")) {
    if (!x->is_object()) throw ConfigError("models: expected an object");
    for (const auto& [name, value] : x->items()) {
      c.models[name] = ModelFromJson(value, "models." + name);
    }
  } else {
    c.models["hybrid"] = ModelSettings{};
  }
  if (const auto* x = o.Child("baseline")) {
    nlohmann::json b = *x;
    if (b.contains("config") && b["config"].is_object() && !b["config"].contains("variant")) {
      b["config"]["variant"] = "deterministic";
    }
    c.baseline = ModelFromJson(b, "baseline");
  }
  if (const auto* x = o.Child("frame")) c.frame = eval::FramePredictorConfig::FromJson(*x);
  if (const auto* x = o.Child("frame_train")) {
    c.frame_train = TrainSettings::FromJson(*x, "frame_train", false, c.frame_train);
  }
  if (const auto* x = o.Child("search")) c.search = mcts::SearchConfig::FromJson(*x);
  if (const auto* x = o.Child("eval")) {
    StrictObject e(*x, "eval");
    e.Get("games", c.eval.games);
    e.Get("budgets", c.eval.budgets);
    e.Get("mbre_k", c.eval.mbre_k);
    e.Get("mbre_horizon", c.eval.mbre_horizon);
    e.Get("mbre_prefix", c.eval.mbre_prefix);
    e.Get("mbre_truths", c.eval.mbre_truths);
    e.Finish();
  }
  o.Finish();
  c.Validate();
  return c;
}

std::string DeriveName(const std::string& a, const std::string& b) {
  return HashHex(a + "|" + b);
}

std::uint64_t DeriveSeed(std::uint64_t seed, const std::string& purpose) {
  return Fnv1a64(std::to_string(seed) + "/" + purpose);
}

std::string ExperimentConfig::Hash() const { return HashHex(ToJson().dump()); }

std::string ExperimentConfig::DataHash() const {
  const nlohmann::json j = ToJson();
  return HashHex(nlohmann::json{{"seed", seed}, {"env", j["env"]}, {"data", j["data"]}}.dump());
}

std::string ExperimentConfig::CodecHash() const {
  return DeriveName(DataHash(),
                    nlohmann::json{{"codec", codec.ToJson()}, {"train", HashedTrain(codec_train, true)}}
                        .dump());
}

std::string ExperimentConfig::ModelHash(const std::string& name) const {
  const auto it = models.find(name);
  if (it == models.end()) throw ConfigError("models." + name + ": no such model");
  return DeriveName(CodecHash(), nlohmann::json{{"name", name}, {"model", HashedModel(it->second)}}
                                     .dump());
}

std::string ExperimentConfig::BaselineHash() const {
  return DeriveName(DataHash(), nlohmann::json{{"baseline", HashedModel(baseline)},
                                               {"frame", frame.ToJson()},
                                               {"frame_train", HashedTrain(frame_train, false)}}
                                    .dump());
}

void ApplyEnvOverrides(nlohmann::json& tree,
                       const std::vector<std::pair<std::string, std::string>>& environment) {
  const std::string prefix = kEnvOverridePrefix;
  for (const auto& [key, value] : environment) {
    if (key.rfind(prefix, 0) != 0) continue;
    std::string rest = key.substr(prefix.size());
    std::vector<std::string> path;
    std::size_t pos = 0;
    while (true) {
      const std::size_t next = rest.find("__", pos);
      std::string part = rest.substr(pos, next == std::string::npos ? std::string::npos
                                                                    : next - pos);
      for (char& ch : part) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (part.empty()) throw ConfigError(key + ": malformed override name");
      path.push_back(part);
      if (next == std::string::npos) break;
      pos = next + 2;
    }
    nlohmann::json* node = &tree;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (!node->is_object()) throw ConfigError(key + ": override path crosses a non-object");
      node = &(*node)[path[i]];
      if (node->is_null()) *node = nlohmann::json::object();
    }
    if (!node->is_object()) throw ConfigError(key + ": override path crosses a non-object");
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    (*node)[path.back()] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
  }
}

std::vector<std::pair<std::string, std::string>> ProcessEnvironment() {
  std::vector<std::pair<std::string, std::string>> out;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string entry = *e;
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos) continue;
    out.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
  }
  std::sort(out.begin(), out.end());
  return out;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json tree = nlohmann::json::parse(ss.str(), nullptr, false);
  if (tree.is_discarded()) throw ConfigError("config: '" + path + "' is not valid JSON");
  ApplyEnvOverrides(tree, ProcessEnvironment());
  return ExperimentConfig::FromJson(tree);
}

}  // namespace vqplan::cli
