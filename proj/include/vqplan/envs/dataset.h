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

#ifndef VQPLAN_ENVS_DATASET_H_
#define VQPLAN_ENVS_DATASET_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqplan/envs/behavior.h"
#include "vqplan/envs/environment.h"

namespace vqplan::envs {

// One logged episode: T observations, T-1 actions and the reward received
// after each action.
struct Trajectory {
  std::int64_t episode_id = 0;
  std::vector<Observation> observations;
  std::vector<int> actions;
  std::vector<double> rewards;
  double skill = 0.0;

  int length() const { return static_cast<int>(observations.size()); }
  double total_reward() const;
};

struct DatasetHeader {
  static constexpr const char* kFormat = "vqplan-trajectories";
  static constexpr int kVersion = 1;

  nlohmann::json env;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string split;
  std::int64_t episodes = 0;
};

// Plays one behavior-policy episode. The episode's randomness comes only
// from `rng`.
Trajectory PlayEpisode(Environment& env, const BehaviorPolicy& behavior, Rng& rng,
                       std::int64_t episode_id);

// Episode i uses Rng(seed).Split(i), so the result does not depend on the
// number of workers.
std::vector<Trajectory> GenerateEpisodes(const EnvConfig& env_config,
                                         const BehaviorConfig& behavior, std::int64_t count,
                                         std::uint64_t seed, int workers = 1);

// Deterministic split on a hash of the episode id.
bool IsValidationEpisode(std::int64_t episode_id, double validation_fraction);

// Line-delimited JSON: a header line, then one record per time step
// {episode_id, t, observation, action, reward, done}. The final step of an
// episode has action -1, reward 0 and done true.
void WriteTrajectories(const std::string& path, const DatasetHeader& header,
                       std::span<const Trajectory> episodes);
std::string SerializeTrajectories(const DatasetHeader& header,
                                  std::span<const Trajectory> episodes);

struct Dataset {
  DatasetHeader header;
  std::vector<Trajectory> episodes;
};

// Throws ArtifactMismatch on a foreign or malformed file.
Dataset ReadTrajectories(const std::string& path);

}  // namespace vqplan::envs

#endif  // VQPLAN_ENVS_DATASET_H_
