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

#ifndef VQPLAN_ENVS_GOALGRID_H_
#define VQPLAN_ENVS_GOALGRID_H_

#include "vqplan/envs/environment.h"

namespace vqplan::envs {

// Agent on a walled grid collecting an apple. With probability `wind` the
// chosen move is replaced by a uniformly random direction. Cells: 0 empty,
// 1 agent, 2 apple. Actions: 0 north, 1 south, 2 east, 3 west.
class GoalGrid : public Environment {
 public:
  static constexpr int kNorth = 0;
  static constexpr int kSouth = 1;
  static constexpr int kEast = 2;
  static constexpr int kWest = 3;

  explicit GoalGrid(const EnvConfig& config);

  int num_actions() const override { return 4; }
  int num_cells() const override { return width_ * height_; }
  int num_categories() const override { return 3; }

  Observation Reset(Rng& rng, std::int64_t episode_index) override;
  EnvStep Step(int action, Rng& rng) override;
  std::vector<bool> LegalMask() const override;
  const Observation& observation() const override { return observation_; }
  bool done() const override { return done_; }

  int width() const { return width_; }
  int height() const { return height_; }
  int agent() const { return agent_; }
  int apple() const { return apple_; }
  void Place(int agent, int apple);
  // Cell reached by moving `direction` from `cell`, clamped at walls.
  int Move(int cell, int direction) const;

 private:
  void Publish();
  int RandomCellExcept(int excluded, Rng& rng) const;

  int width_;
  int height_;
  double wind_;
  int goal_;
  bool respawn_;
  int episode_cap_;
  int agent_ = 0;
  int apple_ = 1;
  int steps_ = 0;
  bool done_ = false;
  Observation observation_;
};

}  // namespace vqplan::envs

#endif  // VQPLAN_ENVS_GOALGRID_H_
