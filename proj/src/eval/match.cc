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


#include "vqplan/eval/match.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "vqplan/common/error.h"
#include "vqplan/common/hash.h"
#include "vqplan/envs/blindmatch.h"
#include "vqplan/mcts/model.h"

namespace vqplan::eval {

const char* AgentKindName(AgentKind kind) {
  switch (kind) {
    case AgentKind::kMcts: return "mcts";
    case AgentKind::kQValue: return "qvalue";
    case AgentKind::kImitation: return "imitation";
    case AgentKind::kRandom: return "random";
  }
  return "?";
}

AgentKind ParseAgentKind(const std::string& name) {
  if (name == "mcts") return AgentKind::kMcts;
  if (name == "qvalue") return AgentKind::kQValue;
  if (name == "imitation") return AgentKind::kImitation;
  if (name == "random") return AgentKind::kRandom;
  throw ConfigError("agent: unknown kind '" + name + "'");
}

namespace {

int ArgmaxLegal(const std::vector<double>& score, const std::vector<bool>& legal) {
  int best = -1;
  for (int a = 0; a < static_cast<int>(score.size()); ++a) {
    if (legal[a] && (best < 0 || score[a] > score[best])) best = a;
  }
  if (best < 0) throw ContractError("agent: no legal action");
  return best;
}

class RandomAgent : public Agent {
 public:
  int Act(const envs::Environment& env, int, Rng& rng) override {
    std::vector<int> moves;
    const std::vector<bool> legal = env.LegalMask();
    for (int a = 0; a < static_cast<int>(legal.size()); ++a) {
      if (legal[a]) moves.push_back(a);
    }
    if (moves.empty()) throw ContractError("agent: no legal action");
    return moves[rng.UniformInt(static_cast<int>(moves.size()))];
  }
};

class ImitationAgent : public Agent {
 public:
  explicit ImitationAgent(const transition::TransitionModel& model) : model_(model) {}
  int Act(const envs::Environment& env, int, Rng&) override {
    return ArgmaxLegal(model_.Root(env.observation()).policy, env.LegalMask());
  }

 private:
  const transition::TransitionModel& model_;
};

class QValueAgent : public Agent {
 public:
  explicit QValueAgent(const transition::TransitionModel& model) : model_(model) {}
  int Act(const envs::Environment& env, int, Rng&) override {
    const transition::StepPrediction root = model_.Root(env.observation());
    const std::vector<bool> legal = env.LegalMask();
    std::vector<double> q(legal.size(), 0.0);
    for (int a = 0; a < static_cast<int>(legal.size()); ++a) {
      if (!legal[a]) continue;
      const transition::StepPrediction next = model_.StepAction(root.hidden, a);
      q[a] = next.reward + model_.config().discount * next.value;
    }
    return ArgmaxLegal(q, legal);
  }

 private:
  const transition::TransitionModel& model_;
};

class MctsAgent : public Agent {
 public:
  MctsAgent(const transition::TransitionModel& model, mcts::SearchConfig config,
            std::ostream* trace = nullptr)
      : adapter_(model), config_(config), search_(adapter_, config), trace_(trace) {}
  int Act(const envs::Environment& env, int move_number, Rng& rng) override {
    const mcts::SearchResult r =
        search_.Run(env.observation(), env.LegalMask(), rng, trace_ != nullptr);
    if (trace_ != nullptr) {
      nlohmann::json j = mcts::TraceJson(r, search_);
      j["move"] = move_number;
      *trace_ << j.dump() << '\n';
    }
    return mcts::Act(r, move_number, config_, rng);
  }

 private:
  mcts::TransitionSearchModel adapter_;
  mcts::SearchConfig config_;
  mcts::Search search_;
  std::ostream* trace_;
};

mcts::SearchConfig AgentSearchConfig(const AgentSpec& spec) {
  mcts::SearchConfig c = spec.search;
  c.shape = mcts::ShapeFor(spec.model->config().variant);
  return c;
}

std::unique_ptr<envs::Environment> GameEnvironment(
    const envs::EnvConfig& config, const std::shared_ptr<const envs::TicTacToeOracle>& oracle) {
  if (oracle) return std::make_unique<envs::BlindMatch>(oracle, config.start);
  return envs::MakeEnvironment(config);
}

// Plays game i with its fixed streams.
GameRecord PlayGame(Agent& player, envs::Environment& env, const Rng& base, int i) {
  const Rng game = base.Split(static_cast<std::uint64_t>(i));
  Rng env_rng = game.Split(0);
  Rng agent_rng = game.Split(1);
  env.Reset(env_rng, i);
  GameRecord rec;
  rec.index = i;
  if (const auto* bm = dynamic_cast<const envs::BlindMatch*>(&env)) {
    rec.agent_started = bm->agent_started();
  }
  while (!env.done()) {
    const int a = player.Act(env, rec.moves, agent_rng);
    rec.total_reward += env.Step(a, env_rng).reward;
    ++rec.moves;
  }
  return rec;
}

void Tally(SideCounts& s, double reward) {
  ++s.games;
  if (reward > 0.0) {
    ++s.wins;
  } else if (reward < 0.0) {
    ++s.losses;
  } else {
    ++s.draws;
  }
}

}  // namespace

std::unique_ptr<Agent> MakeAgent(const AgentSpec& spec) {
  if (spec.kind == AgentKind::kRandom) return std::make_unique<RandomAgent>();
  if (spec.model == nullptr) throw ContractError("agent: model required");
  switch (spec.kind) {
    case AgentKind::kImitation: return std::make_unique<ImitationAgent>(*spec.model);
    case AgentKind::kQValue: return std::make_unique<QValueAgent>(*spec.model);
    case AgentKind::kMcts:
      return std::make_unique<MctsAgent>(*spec.model, AgentSearchConfig(spec));
    case AgentKind::kRandom: break;
  }
  return std::make_unique<RandomAgent>();
}

nlohmann::json MatchReport::ToJson() const {
  auto side = [](const SideCounts& s) {
    return nlohmann::json{
        {"games", s.games}, {"wins", s.wins}, {"draws", s.draws}, {"losses", s.losses}};
  };
  const Interval w = win_interval();
  const Interval wd = win_draw_interval();
  nlohmann::json games_json = nlohmann::json::array();
  for (const GameRecord& g : records) {
    games_json.push_back({{"index", g.index},
                          {"total_reward", g.total_reward},
                          {"moves", g.moves},
                          {"agent_started", g.agent_started}});
  }
  return {{"schema", kSchema},
          {"version", kVersion},
          {"agent", agent},
          {"env", env},
          {"budget", budget},
          {"seed", seed},
          {"games", games},
          {"wins", wins},
          {"draws", draws},
          {"losses", losses},
          {"agent_first", side(agent_first)},
          {"opponent_first", side(opponent_first)},
          {"mean_return", mean_return},
          {"win_rate", win_rate()},
          {"win_interval", {w.lo, w.hi}},
          {"win_draw_rate", win_draw_rate()},
          {"win_draw_interval", {wd.lo, wd.hi}},
          {"hashes", hashes},
          {"records", games_json}};
}

MatchReport PlayMatch(const AgentSpec& agent, const envs::EnvConfig& env_config, int games,
                      std::uint64_t seed, int workers) {
  if (games < 0) throw ContractError("PlayMatch: games must be >= 0");
  MakeAgent(agent);  // validates the spec before any thread starts
  std::vector<GameRecord> records(games);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const Rng base(seed);
  std::shared_ptr<const envs::TicTacToeOracle> oracle;
  if (env_config.name == "blindmatch") {
    oracle = std::make_shared<const envs::TicTacToeOracle>(env_config.opponent);
  }
  auto work = [&] {
    try {
      std::unique_ptr<Agent> player = MakeAgent(agent);
      std::unique_ptr<envs::Environment> env = GameEnvironment(env_config, oracle);
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= games) break;
        records[i] = PlayGame(*player, *env, base, i);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(games);
    }
  };
  const int n = std::max(1, std::min(workers, std::max(games, 1)));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  MatchReport report;
  report.agent = agent.label.empty() ? AgentKindName(agent.kind) : agent.label;
  report.env = env_config.name;
  report.budget = agent.kind == AgentKind::kMcts ? agent.search.budget : 0;
  report.seed = seed;
  report.games = games;
  report.records = std::move(records);
  double total = 0.0;
  SideCounts all;
  for (const GameRecord& g : report.records) {
    Tally(all, g.total_reward);
    Tally(g.agent_started ? report.agent_first : report.opponent_first, g.total_reward);
    total += g.total_reward;
  }
  report.wins = all.wins;
  report.draws = all.draws;
  report.losses = all.losses;
  report.mean_return = games ? total / games : 0.0;
  report.hashes["env"] = HashHex(envs::EnvConfigToJson(env_config).dump());
  return report;
}

void TraceGame(const AgentSpec& agent, const envs::EnvConfig& env_config, std::uint64_t seed,
               int index, std::ostream& out) {
  if (agent.kind != AgentKind::kMcts || agent.model == nullptr) {
    throw ContractError("TraceGame: an MCTS agent with a model is required");
  }
  if (index < 0) throw ContractError("TraceGame: index must be >= 0");
  std::shared_ptr<const envs::TicTacToeOracle> oracle;
  if (env_config.name == "blindmatch") {
    oracle = std::make_shared<const envs::TicTacToeOracle>(env_config.opponent);
  }
  std::unique_ptr<envs::Environment> env = GameEnvironment(env_config, oracle);
  MctsAgent player(*agent.model, AgentSearchConfig(agent), &out);
  PlayGame(player, *env, Rng(seed), index);
}

std::vector<MatchReport> BudgetSweep(const AgentSpec& agent, const envs::EnvConfig& env,
                                     const std::vector<int>& budgets, int games,
                                     std::uint64_t seed, int workers) {
  if (budgets.empty()) throw ContractError("BudgetSweep: budgets must be nonempty");
  std::vector<MatchReport> out;
  for (int b : budgets) {
    AgentSpec s = agent;
    s.search.budget = b;
    out.push_back(PlayMatch(s, env, games, seed, workers));
  }
  return out;
}

void WriteSweepCsv(std::ostream& out, const std::vector<MatchReport>& reports) {
  out << "budget,games,wins,draws,losses,win_rate,win_lo,win_hi,win_draw_rate,wd_lo,wd_hi\n";
  for (const MatchReport& r : reports) {
    const Interval w = r.win_interval();
    const Interval wd = r.win_draw_interval();
    out << r.budget << ',' << r.games << ',' << r.wins << ',' << r.draws << ',' << r.losses
        << ',' << r.win_rate() << ',' << w.lo << ',' << w.hi << ',' << r.win_draw_rate() << ','
        << wd.lo << ',' << wd.hi << '\n';
  }
}

void WriteMatchCsv(std::ostream& out, const MatchReport& report) {
  out << "game,agent_started,moves,total_reward\n";
  for (const GameRecord& g : report.records) {
    out << g.index << ',' << (g.agent_started ? 1 : 0) << ',' << g.moves << ','
        << g.total_reward << '\n';
  }
}

}  // namespace vqplan::eval
