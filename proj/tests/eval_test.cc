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


#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "vqplan/codec/codec.h"
#include "vqplan/common/error.h"
#include "vqplan/envs/dataset.h"
#include "vqplan/eval/match.h"
#include "vqplan/eval/mbre.h"
#include "vqplan/eval/stats.h"
#include "vqplan/transition/transition.h"

namespace vqplan::eval {
namespace {

TEST(StatsTest, WilsonMatchesClosedForm) {
  const Interval a = Wilson(50, 100);
  EXPECT_NEAR(a.lo, 0.4038, 1e-4);
  EXPECT_NEAR(a.hi, 0.5962, 1e-4);
  const Interval b = Wilson(0, 10);
  EXPECT_DOUBLE_EQ(b.lo, 0.0);
  EXPECT_NEAR(b.hi, 0.2775, 1e-4);
  const Interval c = Wilson(10, 10);
  EXPECT_NEAR(c.lo, 0.7225, 1e-4);
  EXPECT_DOUBLE_EQ(c.hi, 1.0);
  EXPECT_EQ(Wilson(0, 0).width(), 1.0);
  EXPECT_THROW(Wilson(3, 2), ContractError);
}

TEST(StatsTest, TwoProportionTestMatchesClosedForm) {
  const ProportionTest t = TwoProportionTest(60, 100, 40, 100);
  EXPECT_NEAR(t.z, 2.0 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(t.p_two_sided, 0.004678, 1e-5);
  EXPECT_NEAR(t.p_greater, 0.002339, 1e-5);
  EXPECT_NEAR(t.p_less + t.p_greater, 1.0, 1e-12);
  const ProportionTest same = TwoProportionTest(0, 10, 0, 20);
  EXPECT_EQ(same.p_two_sided, 1.0);
}

TEST(StatsTest, DifferenceIntervalCoversTheDifference) {
  const Interval d = DifferenceInterval(60, 100, 40, 100);
  EXPECT_LT(d.lo, 0.2);
  EXPECT_GT(d.hi, 0.2);
  EXPECT_GT(d.lo, 0.0);
  // Newcombe's worked example: 56/70 vs 48/80 gives [0.0524, 0.3339].
  const Interval n = DifferenceInterval(56, 70, 48, 80);
  EXPECT_NEAR(n.lo, 0.0524, 1e-3);
  EXPECT_NEAR(n.hi, 0.3339, 1e-3);
}

RolloutSet Scalar(std::vector<double> truth, std::vector<std::vector<double>> samples, int prefix,
                  int horizon) {
  RolloutSet r;
  auto frames = [](const std::vector<double>& v) {
    Rollout out;
    for (double x : v) out.push_back({x});
    return out;
  };
  r.truths.push_back(frames(truth));
  r.samples.emplace_back();
  for (const auto& s : samples) r.samples.back().push_back(frames(s));
  r.prefix = prefix;
  r.horizon = horizon;
  return r;
}

TEST(MbreTest, WorkedScalarExample) {
  const RolloutSet r = Scalar({5, 0, 1}, {{5, 0, 0}, {5, 1, 1}}, 1, 2);
  EXPECT_DOUBLE_EQ(Mbre(r, true), 1.0);
  // Target frame only: sample 0 misses by 1 and sample 1 matches.
  EXPECT_DOUBLE_EQ(Mbre(r, false), 0.0);
}

TEST(MbreTest, ZeroOnSelfSamples) {
  const RolloutSet r = Scalar({1, 2, 3, 4}, {{1, 9, 9, 9}, {1, 2, 3, 4}}, 1, 3);
  EXPECT_DOUBLE_EQ(Mbre(r, true), 0.0);
  EXPECT_DOUBLE_EQ(Mbre(r, false), 0.0);
  EXPECT_GT(Mbre(r, true, 1), 0.0);
}

TEST(MbreTest, HorizonZeroIsZero) {
  const RolloutSet r = Scalar({1, 2}, {{1, 7}}, 1, 0);
  EXPECT_DOUBLE_EQ(Mbre(r, true), 0.0);
}

TEST(MbreTest, RejectsMalformedSets) {
  EXPECT_THROW(Mbre(Scalar({1, 2, 3}, {{1, 2}}, 1, 2), true), DimensionError);
  EXPECT_THROW(Mbre(Scalar({1, 2, 3}, {{0, 2, 3}}, 1, 2), true), ContractError);
  RolloutSet r = Scalar({1, 2, 3}, {{1, 2, 3}}, 1, 2);
  r.samples.push_back({});
  EXPECT_THROW(Mbre(r, true), DimensionError);
}

TEST(MbreTest, NonNegativeAndMonotoneInK) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    RolloutSet r;
    r.prefix = 2;
    r.horizon = 5;
    for (int i = 0; i < 4; ++i) {
      Rollout truth;
      for (int t = 0; t < 7; ++t) truth.push_back({rng.Uniform(), rng.Uniform()});
      std::vector<Rollout> samples;
      for (int s = 0; s < 12; ++s) {
        Rollout x = truth;
        for (int t = 2; t < 7; ++t) x[t] = {rng.Uniform(), rng.Uniform()};
        samples.push_back(x);
      }
      r.truths.push_back(truth);
      r.samples.push_back(samples);
    }
    double previous = Mbre(r, true, 1);
    EXPECT_GE(previous, 0.0);
    for (int k = 2; k <= 12; ++k) {
      const double m = Mbre(r, true, k);
      EXPECT_LE(m, previous);
      EXPECT_LE(Mbre(r, false, k), Mbre(r, false, k - 1));
      previous = m;
    }
    const std::vector<MbreRow> curve = MbreCurve(r, 5);
    ASSERT_EQ(curve.size(), 5u);
    EXPECT_DOUBLE_EQ(curve.back().cumulative, Mbre(r, true, 5));
    EXPECT_DOUBLE_EQ(curve.back().target, Mbre(r, false, 5));
  }
}

envs::EnvConfig GoalGrid() {
  envs::EnvConfig c;
  c.name = "goalgrid";
  return c;
}

envs::EnvConfig Blind() {
  envs::EnvConfig c;
  c.name = "blindmatch";
  return c;
}

struct RolloutModels {
  codec::EnvShape shape;
  codec::StateCodec codec;
  transition::TransitionModel hybrid;
  transition::TransitionModel baseline;
  FramePredictor frames;
};

RolloutModels MakeRolloutModels() {
  const codec::EnvShape shape = codec::ShapeOf(GoalGrid());
  codec::CodecConfig cc;
  cc.codes = 8;
  cc.hidden = 32;
  codec::StateCodec codec(cc, shape, 3);
  transition::TransitionConfig tc;
  tc.hidden = 16;
  tc.cell_hidden = 16;
  tc.head_hidden = 16;
  transition::TransitionModel hybrid(tc, shape, codec.code_sizes(), 4);
  tc.variant = transition::PathVariant::kDeterministic;
  transition::TransitionModel baseline(tc, shape, {}, 5);
  FramePredictorConfig fc;
  fc.hidden = 32;
  return {shape, std::move(codec), std::move(hybrid), std::move(baseline),
          FramePredictor(fc, shape, 6)};
}

TEST(RolloutTest, SamplesShareThePrefixAndAreSeeded) {
  const RolloutModels m = MakeRolloutModels();
  const auto data = envs::GenerateEpisodes(GoalGrid(), envs::BehaviorConfig{}, 2, 1);
  Rng a(8), b(8);
  const auto s1 = SampleRollouts(m.codec, m.hybrid, data[0], 4, 5, 6, a);
  const auto s2 = SampleRollouts(m.codec, m.hybrid, data[0], 4, 5, 6, b);
  EXPECT_EQ(s1, s2);
  ASSERT_EQ(s1.size(), 5u);
  const Rollout truth = TruthFrames(data[0], m.shape, 10);
  for (const Rollout& r : s1) {
    ASSERT_EQ(r.size(), 10u);
    for (int t = 0; t < 4; ++t) EXPECT_EQ(r[t], truth[t]);
  }
  RolloutSet set;
  set.truths = {truth};
  set.samples = {s1};
  set.prefix = 4;
  set.horizon = 6;
  EXPECT_NO_THROW(set.Validate());
}

TEST(RolloutTest, ArgmaxGivesIdenticalSamples) {
  const RolloutModels m = MakeRolloutModels();
  const auto data = envs::GenerateEpisodes(GoalGrid(), envs::BehaviorConfig{}, 1, 2);
  Rng rng(1);
  const auto s = SampleRollouts(m.codec, m.hybrid, data[0], 3, 4, 5, rng, 0.0);
  for (const Rollout& r : s) EXPECT_EQ(r, s[0]);
  const auto b = BaselineRollouts(m.frames, m.baseline, data[0], 3, 4, 5, rng, 0.0);
  for (const Rollout& r : b) EXPECT_EQ(r, b[0]);
}

TEST(RolloutTest, HorizonZeroIsPrefixOnly) {
  const RolloutModels m = MakeRolloutModels();
  const auto data = envs::GenerateEpisodes(GoalGrid(), envs::BehaviorConfig{}, 1, 2);
  Rng rng(1);
  const auto s = SampleRollouts(m.codec, m.hybrid, data[0], 4, 1, 0, rng);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], TruthFrames(data[0], m.shape, 4));
  RolloutSet set;
  set.truths = {TruthFrames(data[0], m.shape, 4)};
  set.samples = {s};
  set.prefix = 4;
  set.horizon = 0;
  EXPECT_DOUBLE_EQ(Mbre(set, true), 0.0);
}

TEST(RolloutTest, RejectsIncompatibleModels) {
  const RolloutModels m = MakeRolloutModels();
  const auto data = envs::GenerateEpisodes(GoalGrid(), envs::BehaviorConfig{}, 1, 2);
  Rng rng(1);
  EXPECT_THROW(SampleRollouts(m.codec, m.baseline, data[0], 4, 1, 2, rng), ConfigError);
  transition::TransitionConfig tc;
  tc.hidden = 8;
  tc.cell_hidden = 8;
  tc.head_hidden = 8;
  const transition::TransitionModel wrong(tc, m.shape, {3}, 1);
  EXPECT_THROW(SampleRollouts(m.codec, wrong, data[0], 4, 1, 2, rng), ArtifactMismatch);
  EXPECT_THROW(SampleRollouts(m.codec, m.hybrid, data[0], 0, 1, 2, rng), ContractError);
}

// One cell with a fair coin every step: the best deterministic frame is the
// mean (0.5, 0.5).
TEST(FramePredictorTest, RegressesToTheMeanOfACoin) {
  Rng rng(3);
  std::vector<envs::Trajectory> data(200);
  for (auto& tr : data) {
    for (int t = 0; t < 10; ++t) {
      tr.observations.push_back({rng.UniformInt(2)});
      if (t < 9) {
        tr.actions.push_back(0);
        tr.rewards.push_back(0.0);
      }
    }
  }
  const codec::EnvShape shape{1, 2, 1};
  FramePredictorConfig fc;
  fc.hidden = 16;
  fc.layers = 1;
  FramePredictor p(fc, shape, 1);
  FrameTrainOptions opt;
  opt.steps = 600;
  opt.batch = 64;
  opt.adam.learning_rate = 3e-3;
  const auto curve = TrainFramePredictor(p, data, opt);
  EXPECT_NEAR(curve.back().loss, std::log(2.0), 0.05);
  const std::span<const int> acts(data[0].actions.data(), 6);
  const auto probs = p.Probabilities(WindowAt(data[0].observations, acts, 5, 4));
  EXPECT_NEAR(probs[0], 0.5, 0.1);
  EXPECT_NEAR(probs[0] + probs[1], 1.0, 1e-12);

  numerics::Checkpoint ckpt;
  p.Save(ckpt);
  const FramePredictor q = FramePredictor::Load(ckpt);
  EXPECT_EQ(q.Probabilities(WindowAt(data[0].observations, acts, 5, 4)), probs);
}

TEST(FramePredictorTest, ResumeMatchesUninterruptedRun) {
  const auto data = envs::GenerateEpisodes(GoalGrid(), envs::BehaviorConfig{}, 10, 4);
  const codec::EnvShape shape = codec::ShapeOf(GoalGrid());
  FramePredictorConfig fc;
  fc.hidden = 16;
  FrameTrainOptions opt;
  opt.steps = 20;
  opt.batch = 8;
  FramePredictor full(fc, shape, 2);
  TrainFramePredictor(full, data, opt);
  FramePredictor part(fc, shape, 2);
  opt.steps = 9;
  TrainFramePredictor(part, data, opt);
  numerics::Checkpoint ckpt;
  part.Save(ckpt);
  FramePredictor resumed = FramePredictor::Load(ckpt);
  opt.steps = 20;
  TrainFramePredictor(resumed, data, opt);
  for (int i = 0; i < full.params().size(); ++i) {
    EXPECT_EQ(std::vector<double>(full.params().at(i).tensor.values().begin(),
                                  full.params().at(i).tensor.values().end()),
              std::vector<double>(resumed.params().at(i).tensor.values().begin(),
                                  resumed.params().at(i).tensor.values().end()));
  }
}

transition::TransitionModel SmallModel(transition::PathVariant variant, std::uint64_t seed) {
  transition::TransitionConfig tc;
  tc.variant = variant;
  tc.hidden = 16;
  tc.cell_hidden = 16;
  tc.head_hidden = 16;
  const codec::EnvShape shape = codec::ShapeOf(Blind());
  const std::vector<int> sizes =
      variant == transition::PathVariant::kDeterministic ? std::vector<int>{}
                                                         : std::vector<int>{4};
  return transition::TransitionModel(tc, shape, sizes, seed);
}

TEST(MatchTest, CountsSumAndSidesAlternate) {
  AgentSpec random;
  random.kind = AgentKind::kRandom;
  const MatchReport r = PlayMatch(random, Blind(), 200, 7, 2);
  EXPECT_EQ(r.games, 200);
  EXPECT_EQ(r.wins + r.draws + r.losses, 200);
  EXPECT_EQ(r.agent_first.games, 100);
  EXPECT_EQ(r.opponent_first.games, 100);
  EXPECT_EQ(r.agent_first.wins + r.opponent_first.wins, r.wins);
  const nlohmann::json j = r.ToJson();
  EXPECT_EQ(j["schema"], "vqplan-match");
  EXPECT_EQ(j["records"].size(), 200u);
}

TEST(MatchTest, ReportIndependentOfWorkerCount) {
  const auto model = SmallModel(transition::PathVariant::kHybrid, 1);
  AgentSpec mcts;
  mcts.model = &model;
  mcts.search.budget = 16;
  mcts.search.act_rule = mcts::ActRule::kStochasticVisit;
  const MatchReport one = PlayMatch(mcts, Blind(), 24, 3, 1);
  const MatchReport three = PlayMatch(mcts, Blind(), 24, 3, 3);
  EXPECT_EQ(one.ToJson().dump(), three.ToJson().dump());
  const MatchReport again = PlayMatch(mcts, Blind(), 24, 3, 2);
  EXPECT_EQ(one.ToJson().dump(), again.ToJson().dump());
}

TEST(MatchTest, BudgetOneEqualsRawPriorPlay) {
  const auto model = SmallModel(transition::PathVariant::kHybrid, 2);
  AgentSpec mcts;
  mcts.model = &model;
  mcts.search.budget = 1;
  AgentSpec imitation;
  imitation.kind = AgentKind::kImitation;
  imitation.model = &model;
  const MatchReport a = PlayMatch(mcts, Blind(), 100, 5, 2);
  const MatchReport b = PlayMatch(imitation, Blind(), 100, 5, 2);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].total_reward, b.records[i].total_reward);
    EXPECT_EQ(a.records[i].moves, b.records[i].moves);
  }
}

// An untrained net's argmax is an arbitrary deterministic policy. Boards
// never repeat within a game, so averaged over initializations its win rate
// equals random play's.
TEST(MatchTest, UntrainedImitationNearRandomPlay) {
  AgentSpec random;
  random.kind = AgentKind::kRandom;
  const MatchReport base = PlayMatch(random, Blind(), 4000, 11, 1);
  double mean = 0.0;
  const int models = 20;
  for (int seed = 0; seed < models; ++seed) {
    const auto model = SmallModel(transition::PathVariant::kHybrid, 100 + seed);
    AgentSpec imitation;
    imitation.kind = AgentKind::kImitation;
    imitation.model = &model;
    mean += PlayMatch(imitation, Blind(), 400, 12 + seed, 1).win_rate() / models;
  }
  EXPECT_NEAR(mean, base.win_rate(), 0.05);
}

TEST(MatchTest, QValueAgentTakesBestOneStepValue) {
  const auto model = SmallModel(transition::PathVariant::kDeterministic, 4);
  AgentSpec q;
  q.kind = AgentKind::kQValue;
  q.model = &model;
  auto agent = MakeAgent(q);
  auto env = envs::MakeEnvironment(Blind());
  Rng rng(0);
  env->Reset(rng, 0);
  const int a = agent->Act(*env, 0, rng);
  const auto root = model.Root(env->observation());
  const auto legal = env->LegalMask();
  for (int b = 0; b < 9; ++b) {
    if (!legal[b]) continue;
    const auto n = model.StepAction(root.hidden, b);
    const auto m = model.StepAction(root.hidden, a);
    EXPECT_GE(m.reward + m.value, n.reward + n.value);
  }
}

TEST(MatchTest, SweepCsvHasOneRowPerBudget) {
  const auto model = SmallModel(transition::PathVariant::kDeterministic, 4);
  AgentSpec mcts;
  mcts.model = &model;
  const auto reports = BudgetSweep(mcts, Blind(), {1, 4, 8}, 10, 2, 2);
  ASSERT_EQ(reports.size(), 3u);
  std::ostringstream csv;
  WriteSweepCsv(csv, reports);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "budget,games,wins,draws,losses,win_rate,win_lo,win_hi,win_draw_rate,wd_lo,wd_hi");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
  EXPECT_THROW(BudgetSweep(mcts, Blind(), {}, 10, 2, 1), ContractError);
}

TEST(MatchTest, ModelFreeAgentsNeedAModel) {
  AgentSpec spec;
  spec.kind = AgentKind::kImitation;
  EXPECT_THROW(MakeAgent(spec), ContractError);
  EXPECT_THROW(ParseAgentKind("muzero"), ConfigError);
}

}  // namespace
}  // namespace vqplan::eval
