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


#ifndef VQPLAN_EVAL_MATCH_H_
#define VQPLAN_EVAL_MATCH_H_

#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqplan/common/rng.h"
#include "vqplan/envs/environment.h"
#include "vqplan/eval/stats.h"
#include "vqplan/mcts/search.h"
#include "vqplan/transition/transition.h"

namespace vqplan::eval {

// MCTS plays the searched move with the tree shape of its model (VQ or the
// deterministic baseline). QValue unrolls one action and takes argmax of
// r + discount * v. Imitation takes argmax pi. Random is uniform.
enum class AgentKind { kMcts, kQValue, kImitation, kRandom };

const char* AgentKindName(AgentKind kind);
AgentKind ParseAgentKind(const std::string& name);

struct AgentSpec {
  AgentKind kind = AgentKind::kMcts;
  const transition::TransitionModel* model = nullptr;  // not owned; shared read-only
  mcts::SearchConfig search;  // shape is derived from the model
  std::string label;
};

// One agent per worker thread; an MCTS agent owns its search tree.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual int Act(const envs::Environment& env, int move_number, Rng& rng) = 0;
};

std::unique_ptr<Agent> MakeAgent(const AgentSpec& spec);

struct SideCounts {
  int games = 0;
  int wins = 0;
  int draws = 0;
  int losses = 0;
};

struct GameRecord {
  int index = 0;
  double total_reward = 0.0;
  int moves = 0;
  bool agent_started = true;
};

struct MatchReport {
  static constexpr const char* kSchema = "vqplan-match";
  static constexpr int kVersion = 1;

  std::string agent;
  std::string env;
  int budget = 0;
  std::uint64_t seed = 0;
  int games = 0;
  int wins = 0;
  int draws = 0;
  int losses = 0;
  SideCounts agent_first;
  SideCounts opponent_first;
  double mean_return = 0.0;
  std::map<std::string, std::string> hashes;
  std::vector<GameRecord> records;

  double win_rate() const { return games ? static_cast<double>(wins) / games : 0.0; }
  double win_draw_rate() const {
    return games ? static_cast<double>(wins + draws) / games : 0.0;
  }
  Interval win_interval() const { return Wilson(wins, games); }
  Interval win_draw_interval() const { return Wilson(wins + draws, games); }
  nlohmann::json ToJson() const;
};

// Game i draws its environment stream from Rng(seed).Split(i).Split(0) and
// its agent stream from .Split(1); episode i sets the starting side. Games
// run on `workers` threads and are merged by index, so the report does not
// depend on the worker count.
MatchReport PlayMatch(const AgentSpec& agent, const envs::EnvConfig& env, int games,
                      std::uint64_t seed, int workers = 1);

// Replays game `index` of PlayMatch(agent, env, _, seed) with the same
// streams and writes one JSON line per MCTS move: {move, simulations,
// edges} (see mcts::TraceJson). Requires an MCTS agent.
void TraceGame(const AgentSpec& agent, const envs::EnvConfig& env, std::uint64_t seed,
               int index, std::ostream& out);

std::vector<MatchReport> BudgetSweep(const AgentSpec& agent, const envs::EnvConfig& env,
                                     const std::vector<int>& budgets, int games,
                                     std::uint64_t seed, int workers = 1);

// budget,games,wins,draws,losses,win_rate,win_lo,win_hi,win_draw_rate,wd_lo,wd_hi
void WriteSweepCsv(std::ostream& out, const std::vector<MatchReport>& reports);
void WriteMatchCsv(std::ostream& out, const MatchReport& report);

}  // namespace vqplan::eval

#endif  // VQPLAN_EVAL_MATCH_H_
