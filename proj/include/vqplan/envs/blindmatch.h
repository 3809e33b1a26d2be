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

#ifndef VQPLAN_ENVS_BLINDMATCH_H_
#define VQPLAN_ENVS_BLINDMATCH_H_

#include <memory>

#include "vqplan/envs/environment.h"

namespace vqplan::envs {

// Tic-tac-toe seen by one player with the opponent folded into the
// dynamics: a step places the agent's mark and, unless the game ended, an
// opponent reply sampled from its policy. Only the post-reply board is
// observed.
class BlindMatch : public Environment {
 public:
  BlindMatch(OpponentSpec opponent, StartRule start);
  // Shares a solved oracle between environments.
  BlindMatch(std::shared_ptr<const TicTacToeOracle> oracle, StartRule start);

  int num_actions() const override { return 9; }
  int num_cells() const override { return 9; }
  int num_categories() const override { return 3; }

  Observation Reset(Rng& rng, std::int64_t episode_index) override;
  EnvStep Step(int action, Rng& rng) override;
  std::vector<bool> LegalMask() const override;
  const Observation& observation() const override { return observation_; }
  bool done() const override { return done_; }

  const Board& board() const { return board_; }
  // Starts from an arbitrary agent-to-move board.
  void SetBoard(const Board& board);
  bool agent_started() const { return agent_started_; }
  const TicTacToeOracle& oracle() const { return *oracle_; }
  std::shared_ptr<const TicTacToeOracle> shared_oracle() const { return oracle_; }

 private:
  void OpponentMove(Rng& rng);
  void Publish();

  std::shared_ptr<const TicTacToeOracle> oracle_;
  StartRule start_;
  Board board_{};
  Observation observation_;
  bool done_ = false;
  bool agent_started_ = true;
};

}  // namespace vqplan::envs

#endif  // VQPLAN_ENVS_BLINDMATCH_H_
