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

#include "vqplan/envs/blindmatch.h"

#include <utility>

#include "vqplan/common/error.h"
#include "vqplan/envs/goalgrid.h"

namespace vqplan::envs {

const char* StartRuleName(StartRule rule) {
  switch (rule) {
    case StartRule::kAgent:
      return "agent";
    case StartRule::kOpponent:
      return "opponent";
    case StartRule::kAlternate:
      return "alternate";
  }
  return "?";
}

const char* OpponentKindName(OpponentKind kind) {
  return kind == OpponentKind::kUniform ? "uniform" : "epsilon_minimax";
}

nlohmann::json EnvConfigToJson(const EnvConfig& c) {
  if (c.name == "blindmatch") {
    return {{"name", c.name},
            {"opponent", OpponentKindName(c.opponent.kind)},
            {"opponent_epsilon", c.opponent.epsilon},
            {"start", StartRuleName(c.start)}};
  }
  return {{"name", c.name},       {"width", c.width},     {"height", c.height},
          {"wind", c.wind},       {"goal", c.goal},       {"respawn", c.respawn},
          {"episode_cap", c.episode_cap}};
}

std::unique_ptr<Environment> MakeEnvironment(const EnvConfig& config) {
  if (config.name == "blindmatch") {
    return std::make_unique<BlindMatch>(config.opponent, config.start);
  }
  if (config.name == "goalgrid") return std::make_unique<GoalGrid>(config);
  throw ConfigError("unknown environment '" + config.name + "'");
}

BlindMatch::BlindMatch(OpponentSpec opponent, StartRule start)
    : BlindMatch(std::make_shared<const TicTacToeOracle>(opponent), start) {}

BlindMatch::BlindMatch(std::shared_ptr<const TicTacToeOracle> oracle, StartRule start)
    : oracle_(std::move(oracle)), start_(start) {
  Publish();
}

void BlindMatch::Publish() {
  observation_.assign(board_.begin(), board_.end());
}

Observation BlindMatch::Reset(Rng& rng, std::int64_t episode_index) {
  board_.fill(kEmpty);
  done_ = false;
  switch (start_) {
    case StartRule::kAgent:
      agent_started_ = true;
      break;
    case StartRule::kOpponent:
      agent_started_ = false;
      break;
    case StartRule::kAlternate:
      agent_started_ = episode_index % 2 == 0;
      break;
  }
  if (!agent_started_) OpponentMove(rng);
  Publish();
  return observation_;
}

void BlindMatch::SetBoard(const Board& board) {
  if (Terminal(board)) throw ContractError("blindmatch: board is already finished");
  board_ = board;
  done_ = false;
  Publish();
}

void BlindMatch::OpponentMove(Rng& rng) {
  const auto policy = oracle_->OpponentPolicy(board_);
  std::vector<double> probs;
  for (const auto& [move, p] : policy) probs.push_back(p);
  board_[policy[rng.Categorical(probs)].first] = kOpponent;
}

EnvStep BlindMatch::Step(int action, Rng& rng) {
  if (done_) throw ContractError("blindmatch: step after the game ended");
  if (action < 0 || action >= 9 || board_[action] != kEmpty) {
    throw ContractError("blindmatch: illegal move " + std::to_string(action));
  }
  board_[action] = kAgent;
  EnvStep step;
  if (Winner(board_) == kAgent) {
    step.reward = 1.0;
    done_ = true;
  } else if (Full(board_)) {
    done_ = true;
  } else {
    OpponentMove(rng);
    if (Winner(board_) == kOpponent) {
      step.reward = -1.0;
      done_ = true;
    } else if (Full(board_)) {
      done_ = true;
    }
  }
  Publish();
  step.observation = observation_;
  step.done = done_;
  return step;
}

std::vector<bool> BlindMatch::LegalMask() const {
  std::vector<bool> mask(9, false);
  if (done_) return mask;
  for (int i = 0; i < 9; ++i) mask[i] = board_[i] == kEmpty;
  return mask;
}

}  // namespace vqplan::envs
