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

#include "vqplan/envs/behavior.h"

#include <cstdlib>

#include "vqplan/common/error.h"
#include "vqplan/envs/blindmatch.h"
#include "vqplan/envs/goalgrid.h"

namespace vqplan::envs {

BehaviorPolicy::BehaviorPolicy(BehaviorConfig config) : config_(std::move(config)) {
  if (config_.skill_mixture.empty()) throw ConfigError("behavior: skill_mixture is empty");
  for (double q : config_.skill_mixture) {
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("behavior: skill values must be in [0,1]");
  }
}

double BehaviorPolicy::SampleSkill(Rng& rng) const {
  return config_.skill_mixture[rng.UniformInt(static_cast<int>(config_.skill_mixture.size()))];
}

std::vector<int> BehaviorPolicy::OptimalMoves(const Environment& env) const {
  if (const auto* bm = dynamic_cast<const BlindMatch*>(&env)) {
    return bm->oracle().Evaluate(bm->board(), ValueMode::kExpectimax).optimal;
  }
  if (const auto* gg = dynamic_cast<const GoalGrid*>(&env)) {
    const int w = gg->width();
    auto distance = [&](int cell) {
      return std::abs(cell / w - gg->apple() / w) + std::abs(cell % w - gg->apple() % w);
    };
    std::vector<int> moves;
    const int now = distance(gg->agent());
    for (int a = 0; a < 4; ++a) {
      if (distance(gg->Move(gg->agent(), a)) < now) moves.push_back(a);
    }
    return moves;
  }
  throw ContractError("behavior: unsupported environment");
}

int BehaviorPolicy::Act(const Environment& env, double skill, Rng& rng) const {
  const auto mask = env.LegalMask();
  std::vector<int> legal;
  for (int a = 0; a < static_cast<int>(mask.size()); ++a) {
    if (mask[a]) legal.push_back(a);
  }
  if (legal.empty()) throw ContractError("behavior: no legal moves");
  if (rng.Uniform() < skill) {
    const auto best = OptimalMoves(env);
    if (!best.empty()) return best[rng.UniformInt(static_cast<int>(best.size()))];
  }
  return legal[rng.UniformInt(static_cast<int>(legal.size()))];
}

}  // namespace vqplan::envs
