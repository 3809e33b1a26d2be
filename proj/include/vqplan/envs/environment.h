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

#ifndef VQPLAN_ENVS_ENVIRONMENT_H_
#define VQPLAN_ENVS_ENVIRONMENT_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqplan/common/rng.h"
#include "vqplan/envs/tictactoe.h"

namespace vqplan::envs {

// Observations are grids of small category ids; models see them one-hot.
using Observation = std::vector<int>;

struct EnvStep {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

enum class StartRule { kAgent, kOpponent, kAlternate };

struct EnvConfig {
  std::string name = "blindmatch";  // "blindmatch" | "goalgrid"
  // BlindMatch.
  OpponentSpec opponent;
  StartRule start = StartRule::kAlternate;
  // GoalGrid.
  int width = 5;
  int height = 5;
  double wind = 0.2;
  int goal = -1;  // initial apple cell, -1 for a random cell
  bool respawn = true;
  int episode_cap = 24;
};

nlohmann::json EnvConfigToJson(const EnvConfig& config);
const char* StartRuleName(StartRule rule);
const char* OpponentKindName(OpponentKind kind);

// Environment instances are independent and single-threaded. Randomness is
// supplied by the caller.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int num_actions() const = 0;
  virtual int num_cells() const = 0;
  virtual int num_categories() const = 0;

  // `episode_index` selects the starting side where that applies.
  virtual Observation Reset(Rng& rng, std::int64_t episode_index) = 0;
  // Throws ContractError on an illegal action or a step after done.
  virtual EnvStep Step(int action, Rng& rng) = 0;
  virtual std::vector<bool> LegalMask() const = 0;
  virtual const Observation& observation() const = 0;
  virtual bool done() const = 0;
};

std::unique_ptr<Environment> MakeEnvironment(const EnvConfig& config);

}  // namespace vqplan::envs

#endif  // VQPLAN_ENVS_ENVIRONMENT_H_
