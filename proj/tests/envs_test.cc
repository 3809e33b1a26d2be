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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "gtest/gtest.h"
#include "vqplan/common/error.h"
#include "vqplan/envs/behavior.h"
#include "vqplan/envs/blindmatch.h"
#include "vqplan/envs/dataset.h"
#include "vqplan/envs/goalgrid.h"
#include "vqplan/envs/tictactoe.h"

namespace vqplan::envs {
namespace {

Board Parse(const char* s) {
  Board b{};
  for (int i = 0; i < 9; ++i) b[i] = s[i] == 'X' ? kAgent : (s[i] == 'O' ? kOpponent : kEmpty);
  return b;
}

// Plain recursive expectimax against a uniform opponent, no memo.
double BruteUniform(Board b) {
  double best = -2.0;
  for (int a : LegalMoves(b)) {
    Board after = b;
    after[a] = kAgent;
    double v;
    if (Winner(after) == kAgent) {
      v = 1.0;
    } else if (Full(after)) {
      v = 0.0;
    } else {
      const auto replies = LegalMoves(after);
      v = 0.0;
      for (int o : replies) {
        Board next = after;
        next[o] = kOpponent;
        double r;
        if (Winner(next) == kOpponent) {
          r = -1.0;
        } else if (Full(next)) {
          r = 0.0;
        } else {
          r = BruteUniform(next);
        }
        v += r / replies.size();
      }
    }
    best = std::max(best, v);
  }
  return best;
}

TEST(TicTacToeTest, WinnerAndMoves) {
  EXPECT_EQ(Winner(Parse("XXX.OO...")), kAgent);
  EXPECT_EQ(Winner(Parse("X.OXO.O..")), kOpponent);
  EXPECT_EQ(Winner(Parse("XOXXOOOXX")), 0);
  EXPECT_TRUE(Full(Parse("XOXXOOOXX")));
  EXPECT_EQ(LegalMoves(Parse("XO.......")).size(), 7u);
  EXPECT_EQ(BoardFromCode(BoardCode(Parse("XO.O.X..X"))), Parse("XO.O.X..X"));
}

class OracleTest : public ::testing::Test {
 protected:
  static const TicTacToeOracle& Uniform() {
    static const TicTacToeOracle o({OpponentKind::kUniform, 0.0});
    return o;
  }
  static const TicTacToeOracle& Minimaxer() {
    static const TicTacToeOracle o({OpponentKind::kEpsilonMinimax, 0.2});
    return o;
  }
};

TEST_F(OracleTest, MinimaxOnEmptyBoardIsADraw) {
  EXPECT_NEAR(Uniform().Value(Board{}, ValueMode::kMinimax), 0.0, 1e-15);
}

TEST_F(OracleTest, OneMoveFromWinning) {
  const Board b = Parse("XX.OO....");
  const auto r = Uniform().Evaluate(b, ValueMode::kExpectimax);
  EXPECT_EQ(r.value, 1.0);
  EXPECT_EQ(r.optimal, std::vector<int>{2});
  EXPECT_EQ(Uniform().Evaluate(b, ValueMode::kMinimax).value, 1.0);
}

TEST_F(OracleTest, EmptyBoardExpectimaxMatchesBruteForce) {
  const double brute = BruteUniform(Board{});
  EXPECT_NEAR(Uniform().Value(Board{}, ValueMode::kExpectimax), brute, 1e-12);
  // Golden value recorded from the enumeration.
  EXPECT_NEAR(brute, 191.0 / 192.0, 1e-12);
  const Board opp_first = Parse("....O....");
  EXPECT_NEAR(Uniform().Value(opp_first, ValueMode::kExpectimax), BruteUniform(opp_first), 1e-12);
}

TEST_F(OracleTest, GameValuesAreOrdered) {
  Rng rng(9);
  const auto& positions = Uniform().positions();
  for (int trial = 0; trial < 50; ++trial) {
    const Board b = BoardFromCode(positions[rng.UniformInt(static_cast<int>(positions.size()))]);
    const double lo = Uniform().Value(b, ValueMode::kMinimax);
    const double hi = Uniform().Value(b, ValueMode::kMaximax);
    for (const TicTacToeOracle* o : {&Uniform(), &Minimaxer()}) {
      const double v = o->Value(b, ValueMode::kExpectimax);
      EXPECT_LE(lo, v + 1e-12);
      EXPECT_LE(v, hi + 1e-12);
    }
  }
}

TEST_F(OracleTest, EpsilonMinimaxPolicyMixesOptimalAndUniform) {
  // Opponent to move; only square 2 blocks the agent's row.
  const Board b = Parse("XX..O....");
  Board with_agent = b;
  const auto policy = Minimaxer().OpponentPolicy(with_agent);
  double total = 0.0;
  for (const auto& [m, p] : policy) {
    total += p;
    if (m == 2) {
      EXPECT_NEAR(p, 0.8 + 0.2 / 6, 1e-12);
    } else {
      EXPECT_NEAR(p, 0.2 / 6, 1e-12);
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(BlindMatchTest, WinningMoveEndsWithoutReply) {
  BlindMatch env({OpponentKind::kUniform, 0.0}, StartRule::kAgent);
  env.SetBoard(Parse("XX.OO...."));
  Rng rng(0);
  const auto step = env.Step(2, rng);
  EXPECT_EQ(step.reward, 1.0);
  EXPECT_TRUE(step.done);
  EXPECT_EQ(env.board(), Parse("XXXOO...."));
  EXPECT_THROW(env.Step(5, rng), ContractError);
}

TEST(BlindMatchTest, FullBoardIsADraw) {
  BlindMatch env({OpponentKind::kUniform, 0.0}, StartRule::kAgent);
  env.SetBoard(Parse("XOXXOOOX."));
  Rng rng(0);
  const auto step = env.Step(8, rng);
  EXPECT_EQ(step.reward, 0.0);
  EXPECT_TRUE(step.done);
}

TEST(BlindMatchTest, IllegalMoveIsRejected) {
  BlindMatch env({OpponentKind::kUniform, 0.0}, StartRule::kAgent);
  Rng rng(0);
  env.Reset(rng, 0);
  env.Step(4, rng);
  EXPECT_THROW(env.Step(4, rng), ContractError);
  EXPECT_THROW(env.Step(9, rng), ContractError);
}

TEST(BlindMatchTest, UniformReplyFrequencies) {
  BlindMatch env({OpponentKind::kUniform, 0.0}, StartRule::kAgent);
  std::map<Observation, int> seen;
  const Board two = Parse("XO.OXO.X.");  // empties 2, 6, 8
  for (int i = 0; i < 1000; ++i) {
    Rng rng = Rng(78).Split(i);
    env.SetBoard(two);
    const auto step = env.Step(6, rng);  // no line; replies at 2 or 8
    ++seen[step.observation];
  }
  ASSERT_EQ(seen.size(), 2u);
  for (const auto& [obs, n] : seen) EXPECT_NEAR(n / 1000.0, 0.5, 0.05);
}

TEST(BlindMatchTest, ObservationsAlwaysIncludeTheReply) {
  BlindMatch env({OpponentKind::kUniform, 0.0}, StartRule::kAlternate);
  for (int ep = 0; ep < 200; ++ep) {
    Rng rng = Rng(5).Split(ep);
    auto obs = env.Reset(rng, ep);
    const int lead = env.agent_started() ? 0 : 1;
    while (!env.done()) {
      const auto legal = LegalMoves(env.board());
      const auto step = env.Step(legal[rng.UniformInt(static_cast<int>(legal.size()))], rng);
      const int a = static_cast<int>(std::count(step.observation.begin(), step.observation.end(), 1));
      const int o = static_cast<int>(std::count(step.observation.begin(), step.observation.end(), 2));
      if (!step.done) {
        EXPECT_EQ(o, a + lead);
      }
    }
  }
}

TEST(BlindMatchTest, AlternatingStartSides) {
  BlindMatch env({OpponentKind::kUniform, 0.0}, StartRule::kAlternate);
  Rng rng(1);
  auto obs0 = env.Reset(rng, 0);
  EXPECT_TRUE(env.agent_started());
  EXPECT_EQ(std::count(obs0.begin(), obs0.end(), 0), 9);
  auto obs1 = env.Reset(rng, 1);
  EXPECT_FALSE(env.agent_started());
  EXPECT_EQ(std::count(obs1.begin(), obs1.end(), 2), 1);
}

EnvConfig Grid(double wind) {
  EnvConfig c;
  c.name = "goalgrid";
  c.wind = wind;
  return c;
}

TEST(GoalGridTest, NoWindIsDeterministic) {
  GoalGrid env(Grid(0.0));
  for (int i = 0; i < 20; ++i) {
    Rng rng(i);
    env.Place(12, 0);
    env.Step(GoalGrid::kEast, rng);
    EXPECT_EQ(env.agent(), 13);
    env.Step(GoalGrid::kNorth, rng);
    EXPECT_EQ(env.agent(), 8);
  }
}

TEST(GoalGridTest, WallsClamp) {
  GoalGrid env(Grid(0.0));
  EXPECT_EQ(env.Move(0, GoalGrid::kNorth), 0);
  EXPECT_EQ(env.Move(0, GoalGrid::kWest), 0);
  EXPECT_EQ(env.Move(24, GoalGrid::kSouth), 24);
  EXPECT_EQ(env.Move(24, GoalGrid::kEast), 24);
}

// Chi-square goodness of fit against the enumerated law: each of the four
// clamped moves with probability 1/4.
void CheckFullWind(int start) {
  GoalGrid env(Grid(1.0));
  std::map<int, double> law;
  for (int d = 0; d < 4; ++d) law[env.Move(start, d)] += 0.25;
  std::map<int, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng(31).Split(i);
    env.Place(start, start == 0 ? 24 : 0);
    env.Step(GoalGrid::kNorth, rng);
    ++counts[env.agent()];
  }
  double chi2 = 0.0;
  for (const auto& [cell, p] : law) {
    const double expected = n * p;
    chi2 += (counts[cell] - expected) * (counts[cell] - expected) / expected;
  }
  for (const auto& [cell, c] : counts) EXPECT_TRUE(law.count(cell)) << cell;
  // 0.01 critical values for 3 and 2 degrees of freedom.
  const double critical = law.size() == 4 ? 11.345 : 9.210;
  EXPECT_LT(chi2, critical) << "start " << start;
}

TEST(GoalGridTest, FullWindIsUniformOverClampedMoves) {
  CheckFullWind(12);
  CheckFullWind(0);
}

TEST(GoalGridTest, StepOntoAppleRewardsAndRespawns) {
  GoalGrid env(Grid(0.0));
  Rng rng(3);
  env.Place(12, 13);
  const auto step = env.Step(GoalGrid::kEast, rng);
  EXPECT_EQ(step.reward, 1.0);
  EXPECT_FALSE(step.done);
  EXPECT_NE(env.apple(), env.agent());
  EXPECT_EQ(std::count(step.observation.begin(), step.observation.end(), 2), 1);
}

TEST(GoalGridTest, CapEndsEpisode) {
  EnvConfig c = Grid(0.0);
  c.episode_cap = 3;
  GoalGrid env(c);
  Rng rng(0);
  env.Reset(rng, 0);
  env.Step(0, rng);
  env.Step(0, rng);
  EXPECT_TRUE(env.Step(0, rng).done);
  EXPECT_THROW(env.Step(0, rng), ContractError);
}

TEST(BehaviorTest, FullSkillIsAlwaysOptimal) {
  BehaviorPolicy policy({{1.0}});
  BlindMatch env({OpponentKind::kUniform, 0.0}, StartRule::kAlternate);
  for (int ep = 0; ep < 100; ++ep) {
    Rng rng = Rng(2).Split(ep);
    env.Reset(rng, ep);
    while (!env.done()) {
      const auto best = policy.OptimalMoves(env);
      const int a = policy.Act(env, 1.0, rng);
      EXPECT_NE(std::find(best.begin(), best.end(), a), best.end());
      env.Step(a, rng);
    }
  }
}

TEST(BehaviorTest, ZeroSkillIsUniform) {
  BehaviorPolicy policy({{0.0}});
  BlindMatch env({OpponentKind::kUniform, 0.0}, StartRule::kAgent);
  env.SetBoard(Parse("XO......."));
  std::map<int, int> counts;
  Rng rng(4);
  const int n = 7000;
  for (int i = 0; i < n; ++i) ++counts[policy.Act(env, 0.0, rng)];
  ASSERT_EQ(counts.size(), 7u);
  double chi2 = 0.0;
  for (const auto& [a, c] : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  EXPECT_LT(chi2, 16.812);  // 0.01, 6 degrees of freedom
}

TEST(BehaviorTest, EvenMixtureHalfTheTimeOptimal) {
  BehaviorPolicy policy({{0.0, 1.0}});
  BlindMatch env({OpponentKind::kUniform, 0.0}, StartRule::kAgent);
  Rng rng(6);
  const auto& positions = env.oracle().positions();
  int skilled = 0;
  int optimal = 0;
  double expected_optimal = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double q = policy.SampleSkill(rng);
    skilled += q == 1.0;
    env.SetBoard(BoardFromCode(positions[rng.UniformInt(static_cast<int>(positions.size()))]));
    const auto best = policy.OptimalMoves(env);
    const double share =
        static_cast<double>(best.size()) / LegalMoves(env.board()).size();
    expected_optimal += 0.5 + 0.5 * share;
    const int a = policy.Act(env, q, rng);
    optimal += std::find(best.begin(), best.end(), a) != best.end();
  }
  EXPECT_NEAR(skilled / static_cast<double>(n), 0.5, 0.02);
  EXPECT_NEAR(optimal / static_cast<double>(n), expected_optimal / n, 0.02);
}

TEST(BehaviorTest, GoalGridGreedyMovesShortenDistance) {
  BehaviorPolicy policy({{1.0}});
  GoalGrid env(Grid(0.0));
  env.Place(0, 24);
  const auto best = policy.OptimalMoves(env);
  EXPECT_EQ(best, (std::vector<int>{GoalGrid::kSouth, GoalGrid::kEast}));
}

EnvConfig Match() {
  EnvConfig c;
  c.name = "blindmatch";
  return c;
}

TEST(DatasetTest, SameSeedIsByteIdenticalAndWorkerInvariant) {
  const auto a = GenerateEpisodes(Match(), {}, 200, 123, 1);
  const auto b = GenerateEpisodes(Match(), {}, 200, 123, 3);
  DatasetHeader h;
  h.env = EnvConfigToJson(Match());
  h.seed = 123;
  EXPECT_EQ(SerializeTrajectories(h, a), SerializeTrajectories(h, b));
  const auto c = GenerateEpisodes(Match(), {}, 200, 124, 1);
  EXPECT_NE(SerializeTrajectories(h, a), SerializeTrajectories(h, c));
}

TEST(DatasetTest, BlindMatchEpisodesAreShortAndWinning) {
  EnvConfig c = Match();
  const auto eps = GenerateEpisodes(c, {}, 1000, 5, 1);
  int wins = 0, losses = 0;
  for (const auto& e : eps) {
    ASSERT_LE(e.actions.size(), 5u);  // at most 5 agent plies on 9 cells
    ASSERT_GE(e.length(), 2);
    const double r = e.total_reward();
    wins += r > 0;
    losses += r < 0;
    for (std::size_t t = 0; t + 1 < e.rewards.size(); ++t) EXPECT_EQ(e.rewards[t], 0.0);
  }
  EXPECT_GT(wins, losses);
}

TEST(DatasetTest, FileRoundTrip) {
  const auto eps = GenerateEpisodes(Grid(0.3), {}, 20, 9, 1);
  DatasetHeader h;
  h.env = EnvConfigToJson(Grid(0.3));
  h.seed = 9;
  h.config_hash = "deadbeef";
  h.split = "train";
  const auto path = (std::filesystem::temp_directory_path() / "vqplan_traj.jsonl").string();
  WriteTrajectories(path, h, eps);
  const Dataset d = ReadTrajectories(path);
  EXPECT_EQ(d.header.config_hash, "deadbeef");
  EXPECT_EQ(d.header.env, h.env);
  ASSERT_EQ(d.episodes.size(), eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    EXPECT_EQ(d.episodes[i].observations, eps[i].observations);
    EXPECT_EQ(d.episodes[i].actions, eps[i].actions);
    EXPECT_EQ(d.episodes[i].rewards, eps[i].rewards);
    EXPECT_EQ(d.episodes[i].skill, eps[i].skill);
  }
  std::filesystem::remove(path);
}

TEST(DatasetTest, ValidationSplitIsStable) {
  int valid = 0;
  for (int i = 0; i < 10000; ++i) {
    EXPECT_EQ(IsValidationEpisode(i, 0.1), IsValidationEpisode(i, 0.1));
    valid += IsValidationEpisode(i, 0.1);
  }
  EXPECT_NEAR(valid / 10000.0, 0.1, 0.02);
}

TEST(DatasetTest, ZeroEpisodesRejected) {
  EXPECT_THROW(GenerateEpisodes(Match(), {}, 0, 1, 1), ConfigError);
}

}  // namespace
}  // namespace vqplan::envs
