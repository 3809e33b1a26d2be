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

#include "vqplan/envs/goalgrid.h"

#include "vqplan/common/error.h"

namespace vqplan::envs {

GoalGrid::GoalGrid(const EnvConfig& config)
    : width_(config.width),
      height_(config.height),
      wind_(config.wind),
      goal_(config.goal),
      respawn_(config.respawn),
      episode_cap_(config.episode_cap) {
  if (width_ < 1 || height_ < 1 || width_ * height_ < 2) {
    throw ConfigError("goalgrid: grid must hold at least two cells");
  }
  if (!(wind_ >= 0.0 && wind_ <= 1.0)) throw ConfigError("goalgrid: wind must be in [0,1]");
  if (goal_ < -1 || goal_ >= width_ * height_) throw ConfigError("goalgrid: goal out of bounds");
  if (episode_cap_ < 1) throw ConfigError("goalgrid: episode_cap must be >= 1");
  Publish();
}

int GoalGrid::Move(int cell, int direction) const {
  int r = cell / width_;
  int c = cell % width_;
  switch (direction) {
    case kNorth:
      r = r > 0 ? r - 1 : r;
      break;
    case kSouth:
      r = r + 1 < height_ ? r + 1 : r;
      break;
    case kEast:
      c = c + 1 < width_ ? c + 1 : c;
      break;
    case kWest:
      c = c > 0 ? c - 1 : c;
      break;
    default:
      throw ContractError("goalgrid: invalid action " + std::to_string(direction));
  }
  return r * width_ + c;
}

int GoalGrid::RandomCellExcept(int excluded, Rng& rng) const {
  const int cell = rng.UniformInt(width_ * height_ - 1);
  return cell >= excluded ? cell + 1 : cell;
}

void GoalGrid::Place(int agent, int apple) {
  const int n = width_ * height_;
  if (agent < 0 || agent >= n || apple < 0 || apple >= n || agent == apple) {
    throw ContractError("goalgrid: invalid placement");
  }
  agent_ = agent;
  apple_ = apple;
  steps_ = 0;
  done_ = false;
  Publish();
}

Observation GoalGrid::Reset(Rng& rng, std::int64_t) {
  if (goal_ >= 0) {
    apple_ = goal_;
    agent_ = RandomCellExcept(goal_, rng);
  } else {
    agent_ = rng.UniformInt(width_ * height_);
    apple_ = RandomCellExcept(agent_, rng);
  }
  steps_ = 0;
  done_ = false;
  Publish();
  return observation_;
}

EnvStep GoalGrid::Step(int action, Rng& rng) {
  if (done_) throw ContractError("goalgrid: step after the episode ended");
  if (action < 0 || action >= 4) {
    throw ContractError("goalgrid: invalid action " + std::to_string(action));
  }
  int direction = action;
  if (wind_ > 0.0 && rng.Uniform() < wind_) direction = rng.UniformInt(4);
  agent_ = Move(agent_, direction);
  ++steps_;
  EnvStep step;
  if (agent_ == apple_) {
    step.reward = 1.0;
    if (respawn_) {
      apple_ = RandomCellExcept(agent_, rng);
    } else {
      done_ = true;
    }
  }
  if (steps_ >= episode_cap_) done_ = true;
  Publish();
  step.observation = observation_;
  step.done = done_;
  return step;
}

std::vector<bool> GoalGrid::LegalMask() const { return std::vector<bool>(4, !done_); }

void GoalGrid::Publish() {
  observation_.assign(static_cast<std::size_t>(width_) * height_, 0);
  observation_[apple_] = 2;
  observation_[agent_] = 1;
}

}  // namespace vqplan::envs
