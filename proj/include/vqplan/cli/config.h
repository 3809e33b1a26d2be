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


#ifndef VQPLAN_CLI_CONFIG_H_
#define VQPLAN_CLI_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vqplan/codec/codec.h"
#include "vqplan/envs/behavior.h"
#include "vqplan/envs/environment.h"
#include "vqplan/eval/mbre.h"
#include "vqplan/mcts/search.h"
#include "vqplan/numerics/optimizer.h"
#include "vqplan/transition/transition.h"

namespace vqplan::cli {

// Prefix of environment overrides: VQPLAN_CFG__SEARCH__BUDGET=50 sets
// search.budget. Values parse as JSON when they can, else as strings.
inline constexpr const char* kEnvOverridePrefix = "VQPLAN_CFG__";

struct TrainSettings {
  std::int64_t steps = 1000;
  int batch = 64;
  numerics::AdamConfig adam;
  int log_every = 100;
  int checkpoint_every = 0;  // 0 = only at the end
  // Codec only.
  int restart_every = 200;
  double restart_threshold = 0.05;

  nlohmann::json ToJson(bool codec) const;
  static TrainSettings FromJson(const nlohmann::json& j, const std::string& path, bool codec,
                                TrainSettings defaults);
};

struct DataSettings {
  std::int64_t episodes = 0;
  double validation_fraction = 0.05;
  envs::BehaviorConfig behavior;
};

struct ModelSettings {
  transition::TransitionConfig config;
  TrainSettings train;
};

struct EvalSettings {
  int games = 400;
  std::vector<int> budgets = {10, 200, 1000};
  int mbre_k = 100;
  int mbre_horizon = 20;
  int mbre_prefix = 4;
  int mbre_truths = 100;
};

struct ExperimentConfig {
  std::string output_dir;
  std::uint64_t seed = 1;
  envs::EnvConfig env;
  DataSettings data;
  codec::CodecConfig codec;
  TrainSettings codec_train;
  // Named transition models trained against the codec.
  std::map<std::string, ModelSettings> models;
  ModelSettings baseline;
  eval::FramePredictorConfig frame;
  TrainSettings frame_train;
  mcts::SearchConfig search;
  EvalSettings eval;

  // ConfigError naming the field and the stage that needs it.
  void Validate() const;
  nlohmann::json ToJson() const;
  // Strict: unknown keys and wrong types are errors.
  static ExperimentConfig FromJson(const nlohmann::json& j);

  std::string Hash() const;
  // Fingerprints of each stage's inputs; downstream artifacts record them.
  std::string DataHash() const;
  std::string CodecHash() const;
  std::string ModelHash(const std::string& name) const;
  std::string BaselineHash() const;
};

std::string DeriveName(const std::string& a, const std::string& b);
std::uint64_t DeriveSeed(std::uint64_t seed, const std::string& purpose);

envs::EnvConfig EnvConfigFromJson(const nlohmann::json& j);

// Applies KEY=VALUE pairs whose key starts with kEnvOverridePrefix.
void ApplyEnvOverrides(nlohmann::json& tree,
                       const std::vector<std::pair<std::string, std::string>>& environment);
std::vector<std::pair<std::string, std::string>> ProcessEnvironment();

// Reads the file, applies overrides from the process environment and
// parses strictly.
ExperimentConfig LoadConfig(const std::string& path);

}  // namespace vqplan::cli

#endif  // VQPLAN_CLI_CONFIG_H_
