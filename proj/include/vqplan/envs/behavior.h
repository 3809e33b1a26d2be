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

#ifndef VQPLAN_ENVS_BEHAVIOR_H_
#define VQPLAN_ENVS_BEHAVIOR_H_

#include <memory>
#include <vector>

#include "vqplan/common/rng.h"
#include "vqplan/envs/environment.h"

namespace vqplan::envs {

struct BehaviorConfig {
  // Per-episode skill q is drawn uniformly from this set.
  std::vector<double> skill_mixture = {0.0, 0.5, 0.9};
};

// Logged-data policy: with probability q an oracle-optimal move (uniform
// among ties), otherwise a uniform legal move. On BlindMatch "optimal" is
// the expectimax move against the environment's opponent; on GoalGrid it is
// a move that shortens the Manhattan distance to the apple.
class BehaviorPolicy {
 public:
  explicit BehaviorPolicy(BehaviorConfig config);

  double SampleSkill(Rng& rng) const;
  int Act(const Environment& env, double skill, Rng& rng) const;
  // The oracle-optimal move set in the current state.
  std::vector<int> OptimalMoves(const Environment& env) const;

  const BehaviorConfig& config() const { return config_; }

 private:
  BehaviorConfig config_;
};

}  // namespace vqplan::envs

#endif  // VQPLAN_ENVS_BEHAVIOR_H_
