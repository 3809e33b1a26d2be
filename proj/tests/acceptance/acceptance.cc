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


// Acceptance checks, one PASS/FAIL line per criterion.
//   --fast      criteria 1-6, 10, 11 (seconds to a few minutes)
//   --pipeline  criteria 7-9: full BlindMatch and GoalGrid pipelines
// With neither flag every criterion runs. Pipeline stages whose manifest
// already matches the config hash are reused, not retrained.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vqplan/cli/config.h"
#include "vqplan/cli/pipeline.h"
#include "vqplan/codec/codec.h"
#include "vqplan/common/error.h"
#include "vqplan/common/rng.h"
#include "vqplan/envs/dataset.h"
#include "vqplan/envs/goalgrid.h"
#include "vqplan/eval/mbre.h"
#include "vqplan/eval/stats.h"
#include "vqplan/mcts/search.h"
#include "vqplan/numerics/grad_check.h"
#include "vqplan/numerics/mlp.h"
#include "vqplan/numerics/ops.h"
#include "vqplan/transition/transition.h"
#include "vqplan/vq/codebook.h"
#include "vqplan/vq/layer.h"

namespace vqplan::acceptance {
namespace {

namespace fs = std::filesystem;
using numerics::ParamStore;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// 1. Gradient soundness.

std::vector<double> Normals(Rng& rng, int n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.Normal();
  return v;
}

// Normal draws kept at least `gap` away from zero, so a central difference
// never straddles the ReLU kink.
std::vector<double> AwayFromZero(Rng& rng, int n, double gap) {
  std::vector<double> v(n);
  for (double& x : v) {
    do {
      x = rng.Normal();
    } while (std::abs(x) < gap);
  }
  return v;
}

struct GradTally {
  double worst = 0.0;
  std::string worst_case;
  int checks = 0;
  int entries = 0;
  int failures = 0;

  void Add(const std::string& name, const numerics::GradCheckReport& r) {
    ++checks;
    entries += r.entries_checked;
    if (!r.passed || r.max_relative_error >= 1e-3) ++failures;
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_case = name + ":" + r.worst_parameter;
    }
  }
};

void CheckPrimitives(Rng& rng, GradTally& tally) {
  numerics::GradCheckOptions opt;
  const int b = 1 + rng.UniformInt(4);
  const int in = 1 + rng.UniformInt(5);
  const int out = 1 + rng.UniformInt(5);
  auto run = [&](const std::string& name, ParamStore& s, const numerics::LossFn& f) {
    tally.Add(name, numerics::GradCheck(s, f, opt));
  };
  // Weighted sums make every output entry's gradient distinct.
  const std::vector<double> mix = Normals(rng, b * out);
  const std::vector<double> mix_in = Normals(rng, b * in);
  {
    ParamStore s;
    s.Add("x", Tensor::Matrix(b, in, Normals(rng, b * in)));
    s.Add("w", Tensor::Matrix(out, in, Normals(rng, out * in)));
    s.Add("b", Tensor::Matrix(1, out, Normals(rng, out)));
    run("linear", s, [&](Tape& t, const ParamStore& p) {
      Var y = numerics::Linear(t, t.Param(p, "x"), t.Param(p, "w"), t.Param(p, "b"));
      return numerics::Sum(t, numerics::Mul(t, y, t.Constant(b, out, mix)));
    });
  }
  for (const char* act : {"tanh", "relu"}) {
    ParamStore s;
    const bool relu = std::string(act) == "relu";
    s.Add("x", Tensor::Matrix(b, in, relu ? AwayFromZero(rng, b * in, 1e-2)
                                          : Normals(rng, b * in)));
    run(act, s, [&, relu](Tape& t, const ParamStore& p) {
      Var x = t.Param(p, "x");
      Var y = relu ? numerics::Relu(t, x) : numerics::Tanh(t, x);
      return numerics::Sum(t, numerics::Mul(t, y, t.Constant(b, in, mix_in)));
    });
  }
  {
    ParamStore s;
    s.Add("a", Tensor::Matrix(b, in, Normals(rng, b * in)));
    s.Add("c", Tensor::Matrix(b, in, Normals(rng, b * in)));
    s.Add("d", Tensor::Matrix(b, in, Normals(rng, b * in)));
    const double k = rng.Normal();
    run("add_mul_scale", s, [&, k](Tape& t, const ParamStore& p) {
      Var a = t.Param(p, "a");
      Var c = t.Param(p, "c");
      Var y = numerics::Scale(t, numerics::Mul(t, numerics::Add(t, a, c), a), k);
      return numerics::Sum(t, numerics::Mul(t, y, t.Constant(b, in, mix_in)));
    });
    run("addn", s, [&](Tape& t, const ParamStore& p) {
      const Var xs[] = {t.Param(p, "a"), t.Param(p, "c"), t.Param(p, "d"), t.Param(p, "a")};
      Var y = numerics::AddN(t, xs);
      return numerics::Sum(t, numerics::Mul(t, numerics::Mul(t, y, y),
                                            t.Constant(b, in, mix_in)));
    });
  }
  {
    ParamStore s;
    s.Add("a", Tensor::Matrix(b, in, Normals(rng, b * in)));
    s.Add("c", Tensor::Matrix(b, out, Normals(rng, b * out)));
    const int start = rng.UniformInt(in + out);
    const int count = 1 + rng.UniformInt(in + out - start);
    const std::vector<double> w = Normals(rng, b * count);
    run("concat_slice_reshape", s, [&, start, count](Tape& t, const ParamStore& p) {
      const Var xs[] = {t.Param(p, "a"), t.Param(p, "c")};
      Var cat = numerics::ConcatCols(t, xs);
      Var sl = numerics::SliceCols(t, cat, start, count);
      Var flat = numerics::Reshape(t, sl, 1, b * count);
      Var back = numerics::Reshape(t, numerics::Tanh(t, flat), b, count);
      return numerics::Sum(t, numerics::Mul(t, back, t.Constant(b, count, w)));
    });
  }
  {
    const int v = 2 + rng.UniformInt(5);
    ParamStore s;
    s.Add("table", Tensor::Matrix(v, in, Normals(rng, v * in)));
    std::vector<int> idx(b + 2);
    for (int& i : idx) i = rng.UniformInt(v);  // repeats exercise accumulation
    const std::vector<double> w = Normals(rng, (b + 2) * in);
    run("gather", s, [&](Tape& t, const ParamStore& p) {
      Var g = numerics::Gather(t, t.Param(p, "table"), idx);
      return numerics::Sum(t, numerics::Mul(t, numerics::Tanh(t, g),
                                            t.Constant(b + 2, in, w)));
    });
  }
  {
    const int classes = 2 + rng.UniformInt(5);
    ParamStore s;
    s.Add("logits", Tensor::Matrix(b, classes, Normals(rng, b * classes, 2.0)));
    std::vector<int> targets(b);
    std::vector<double> weights(b);
    for (int r = 0; r < b; ++r) {
      targets[r] = rng.Uniform() < 0.2 ? -1 : rng.UniformInt(classes);  // -1 is masked
      weights[r] = 0.5 + rng.Uniform();
    }
    run("softmax_cross_entropy", s, [&](Tape& t, const ParamStore& p) {
      return numerics::SoftmaxCrossEntropy(t, t.Param(p, "logits"), targets, weights);
    });
    const std::vector<double> target = Normals(rng, b * classes);
    run("squared_error", s, [&](Tape& t, const ParamStore& p) {
      return numerics::SquaredError(t, t.Param(p, "logits"), target, weights);
    });
  }
  {
    ParamStore s;
    const numerics::Activation act =
        rng.Uniform() < 0.5 ? numerics::Activation::kTanh : numerics::Activation::kLinear;
    numerics::MlpSpec spec{"mlp", {in, 3 + rng.UniformInt(4), out}, act, rng.Uniform() < 0.5};
    numerics::InitMlp(spec, s, rng);
    for (auto& prm : s.parameters()) {
      for (double& x : prm.tensor.mutable_values()) x += 0.1 * rng.Normal();
    }
    const std::vector<double> x = Normals(rng, b * in);
    run("mlp", s, [&](Tape& t, const ParamStore& p) {
      Var y = numerics::MlpForward(t, p, spec, t.Constant(b, in, x));
      return numerics::Sum(t, numerics::Mul(t, y, t.Constant(b, out, mix)));
    });
  }
}

// Model losses on real GoalGrid data with untrained, randomly seeded nets.
void CheckModelLoss(int trial, Rng& rng, std::span<const envs::Trajectory> data,
                    GradTally& tally) {
  numerics::GradCheckOptions opt;
  opt.max_entries_per_param = 4;
  opt.seed = static_cast<std::uint64_t>(trial);
  codec::CodecConfig cc;
  cc.codes = 3 + rng.UniformInt(3);
  cc.books = 1 + rng.UniformInt(2);
  cc.dim = 3;
  cc.hidden = 6;
  cc.layers = 1;
  cc.factorized = true;
  cc.action_codes = 3;
  cc.action_dim = 3;
  envs::EnvConfig grid;
  grid.name = "goalgrid";
  codec::StateCodec codec(cc, codec::ShapeOf(grid), rng());
  const int kind = trial % 4;
  if (kind == 0) {
    const auto refs = codec::CodecTransitions(data);
    std::vector<codec::TransitionRef> batch(3);
    for (auto& r : batch) r = refs[rng.UniformInt(static_cast<int>(refs.size()))];
    tally.Add("codec_loss", numerics::GradCheck(
                                codec.params(),
                                [&](Tape& t, const ParamStore& p) {
                                  return codec::CodecLoss(t, p, codec, data, batch, true).loss;
                                },
                                opt));
    return;
  }
  const transition::PathVariant variant = kind == 1   ? transition::PathVariant::kHybrid
                                          : kind == 2 ? transition::PathVariant::kPure
                                                      : transition::PathVariant::kDeterministic;
  transition::TransitionConfig tc;
  tc.variant = variant;
  tc.unroll = 2 + rng.UniformInt(2);
  tc.hidden = 5;
  tc.cell_hidden = 6;
  tc.head_hidden = 5;
  tc.reward_head = rng.Uniform() < 0.5;
  const bool has_codes = variant != transition::PathVariant::kDeterministic;
  transition::TransitionModel model(
      tc, codec.shape(), has_codes ? transition::PathCodeSizes(variant, codec) : std::vector<int>{},
      rng());
  std::vector<transition::PlanningPath> batch;
  for (int i = 0; i < 2; ++i) {
    const envs::Trajectory& tr = data[rng.UniformInt(static_cast<int>(data.size()))];
    const transition::TrajectoryCodes codes =
        has_codes ? transition::EncodeForPaths(codec, variant, tr) : transition::TrajectoryCodes{};
    const auto roots = transition::RootTimes(tr, variant, 1);
    const int root = roots[rng.UniformInt(static_cast<int>(roots.size()))];
    batch.push_back(transition::AssemblePath(tr, codes, tc, model.code_sizes(),
                                             codec.shape().actions, root, rng));
  }
  tally.Add(std::string("transition_loss_") + transition::PathVariantName(variant),
            numerics::GradCheck(model.params(),
                                [&](Tape& t, const ParamStore& p) {
                                  return transition::TransitionLoss(t, p, model, batch).total;
                                },
                                opt));
}

Outcome GradientSoundness() {
  const auto start = Clock::now();
  envs::EnvConfig grid;
  grid.name = "goalgrid";
  const auto data = envs::GenerateEpisodes(grid, envs::BehaviorConfig{}, 8, 41);
  GradTally tally;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng = Rng(2026).Split(static_cast<std::uint64_t>(trial));
    CheckPrimitives(rng, tally);
    CheckModelLoss(trial, rng, data, tally);
  }
  const double secs = Seconds(start);
  Outcome o;
  o.pass = tally.failures == 0 && tally.worst < 1e-3 && secs < 120.0;
  o.detail = "100 trials, " + std::to_string(tally.checks) + " checks, " +
             std::to_string(tally.entries) + " entries, max rel err " + Fmt(tally.worst, 3) +
             " (" + tally.worst_case + "), " + Fmt(secs, 3) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 2. EMA codebook reaches the k-means fixed point.

Outcome KMeansFixedPoint() {
  const auto start = Clock::now();
  Rng rng(8);
  const int n = 400, d = 2;
  std::vector<double> batch(n * d);
  const double centers[4][2] = {{-3, -3}, {-3, 3}, {3, -3}, {3, 3}};
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) batch[i * d + c] = centers[i % 4][c] + 0.4 * rng.Normal();
  }
  vq::Codebook book(4, d, 0.99, 0.0);
  book.InitFromBatch(batch, rng);
  for (int step = 0; step < 4000; ++step) book.EmaUpdate(book.NearestBatch(batch), batch);
  const auto idx = book.NearestBatch(batch);
  double worst = 0.0;
  bool all_used = true;
  for (int k = 0; k < 4; ++k) {
    double mean[2] = {0, 0};
    int count = 0;
    for (int i = 0; i < n; ++i) {
      if (idx[i] != k) continue;
      ++count;
      for (int c = 0; c < d; ++c) mean[c] += batch[i * d + c];
    }
    if (count == 0) {
      all_used = false;
      continue;
    }
    worst = std::max(worst, std::hypot(book.embedding(k)[0] - mean[0] / count,
                                       book.embedding(k)[1] - mean[1] / count));
  }
  const double secs = Seconds(start);
  return {all_used && worst < 1e-4 && secs < 10.0,
          "K=4, epsilon=0, max centroid distance to its cluster mean " + Fmt(worst, 3) + ", " +
              Fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 3. Straight-through gradients equal the identity substitute's.

Outcome StraightThroughIdentity() {
  const auto start = Clock::now();
  Rng rng(21);
  ParamStore store;
  numerics::MlpSpec enc{"enc", {6, 8, 4}, numerics::Activation::kTanh, false};
  numerics::MlpSpec dec{"dec", {4, 8, 3}, numerics::Activation::kTanh, false};
  numerics::InitMlp(enc, store, rng);
  numerics::InitMlp(dec, store, rng);
  const int b = 7;
  const std::vector<double> x = Normals(rng, b * 6);
  const std::vector<double> target = Normals(rng, b * 3);
  // The codebook holds the encoder's own outputs, so the quantized forward
  // pass is bitwise the identity and only the backward rule is tested.
  vq::QuantizationLayer layer(2, b, 2);
  {
    Tape tape(false);
    Var z = numerics::MlpForward(tape, store, enc, tape.Constant(b, 6, x));
    const auto zv = tape.value(z);
    for (int book = 0; book < 2; ++book) {
      std::vector<double> e;
      for (int r = 0; r < b; ++r) {
        e.push_back(zv[r * 4 + 2 * book]);
        e.push_back(zv[r * 4 + 2 * book + 1]);
      }
      layer.books()[book].SetEmbeddings(e);
    }
  }
  auto grads = [&](bool quantize) {
    Tape tape;
    Var z = numerics::MlpForward(tape, store, enc, tape.Constant(b, 6, x));
    Var h = quantize ? layer.Forward(tape, z).output : z;
    Var y = numerics::MlpForward(tape, store, dec, h);
    tape.Backward(numerics::SquaredError(tape, y, target), &store);
    std::vector<double> out;
    for (const auto& p : store.parameters()) {
      if (p.name.rfind("enc/", 0) == 0) {
        out.insert(out.end(), p.tensor.gradient().begin(), p.tensor.gradient().end());
      }
    }
    store.ClearGradients();
    return out;
  };
  const auto with_vq = grads(true);
  const auto identity = grads(false);
  const bool same = with_vq.size() == identity.size() && !with_vq.empty() &&
                    std::memcmp(with_vq.data(), identity.data(),
                                with_vq.size() * sizeof(double)) == 0;
  const double secs = Seconds(start);
  return {same && secs < 1.0, std::to_string(with_vq.size()) + " encoder gradient entries " +
                                  (same ? "bitwise equal" : "DIFFER") + ", " + Fmt(secs, 3) +
                                  " s"};
}

// ---------------------------------------------------------------------------
// 4. Tabular oracle equivalence per chance mode.

Outcome TabularOracle() {
  const auto start = Clock::now();
  const std::vector<std::vector<double>> payoff = {{1.0, -1.0}, {0.2, 0.2}};
  const mcts::TabularModel model(payoff);
  // Brute-force oracles over the 2x2 tree.
  auto oracle = [&](mcts::ChanceMode mode) {
    int best = 0;
    double best_v = -1e300;
    for (int a = 0; a < 2; ++a) {
      const double lo = std::min(payoff[a][0], payoff[a][1]);
      const double hi = std::max(payoff[a][0], payoff[a][1]);
      const double mean = 0.5 * (payoff[a][0] + payoff[a][1]);
      const double v = mode == mcts::ChanceMode::kCooperative   ? hi
                       : mode == mcts::ChanceMode::kAdversarial ? lo
                                                                : mean;
      if (v > best_v) {
        best_v = v;
        best = a;
      }
    }
    return best;
  };
  std::string detail;
  bool pass = true;
  for (mcts::ChanceMode mode : {mcts::ChanceMode::kCooperative, mcts::ChanceMode::kNeutral,
                                mcts::ChanceMode::kAdversarial}) {
    const int want = oracle(mode);
    int hits = 0;
    for (int seed = 0; seed < 100; ++seed) {
      mcts::SearchConfig c;
      c.budget = 10000;
      c.chance_mode = mode;
      c.root_noise = true;  // seeds differ through the root noise
      mcts::Search search(model, c);
      Rng rng(static_cast<std::uint64_t>(seed));
      if (search.Run({0}, {true, true}, rng).selected_action == want) ++hits;
    }
    pass = pass && hits >= 99;
    detail += std::string(mcts::ChanceModeName(mode)) + " " + std::to_string(hits) +
              "/100 (oracle a=" + std::to_string(want) + "), ";
  }
  const double secs = Seconds(start);
  return {pass && secs < 60.0, detail + Fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// Binary invocation for the CLI-driven criteria.

struct Invocation {
  int code = -1;
  nlohmann::json out;
};

Invocation RunCli(const std::string& args, const std::string& env_prefix = "") {
  const std::string cmd =
      env_prefix + " " + std::string(VQPLAN_BINARY) + " " + args + " 2>>" + "/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string text;
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof(buf), pipe)) text.append(buf, n);
  const int status = pclose(pipe);
  Invocation inv;
  inv.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  inv.out = nlohmann::json::parse(text, nullptr, false);
  return inv;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json SmallBlindMatch(const std::string& out) {
  const nlohmann::json net = {{"hidden", 16}, {"cell_hidden", 24}, {"head_hidden", 16}};
  return {{"output_dir", out},
          {"seed", 11},
          {"env", {{"name", "blindmatch"}}},
          {"data", {{"episodes", 400}}},
          {"codec", {{"codes", 8}, {"hidden", 32}, {"dim", 8}, {"factorized", true}}},
          {"codec_train", {{"steps", 60}, {"batch", 16}, {"log_every", 10}, {"checkpoint_every", 25}}},
          {"models",
           {{"hybrid", {{"config", net}, {"train", {{"steps", 40}, {"batch", 8}, {"log_every", 10}}}}},
            {"pure",
             {{"config", {{"hidden", 16}, {"cell_hidden", 24}, {"head_hidden", 16},
                          {"variant", "pure"}}},
              {"train", {{"steps", 40}, {"batch", 8}, {"log_every", 10}}}}}}},
          {"baseline", {{"config", net}, {"train", {{"steps", 40}, {"batch", 8}, {"log_every", 10}}}}},
          {"frame_train", {{"steps", 20}, {"batch", 8}, {"log_every", 10}}},
          {"search", {{"budget", 20}}},
          {"eval", {{"games", 12}, {"budgets", {4, 16}}, {"mbre_k", 4}, {"mbre_horizon", 1},
                    {"mbre_truths", 5}}}};
}

std::string WriteConfig(const std::string& dir, const nlohmann::json& tree) {
  fs::create_directories(dir);
  const std::string path = dir + "/config.json";
  std::ofstream(path) << tree.dump(2);
  return path;
}

// ---------------------------------------------------------------------------
// 5. Backup-mean invariant from --trace-search output.

Outcome BackupMeanInvariant(const std::string& work) {
  const auto start = Clock::now();
  const std::string dir = work + "/trace";
  fs::remove_all(dir);
  const std::string cfg = WriteConfig(dir, SmallBlindMatch(dir + "/out"));
  for (const std::string cmd :
       {"gen-data", "train --stage codec", "train --stage transition --model hybrid"}) {
    if (RunCli("--config " + cfg + " " + cmd).code != 0) return {false, cmd + " failed"};
  }
  int searches = 0;
  int edges = 0;
  double worst = 0.0;
  bool counts_match = true;
  for (const char* mode : {"adversarial", "neutral", "cooperative"}) {
    const Invocation inv =
        RunCli("--config " + cfg + " play --agent mcts --model hybrid --games 2 --budget 400" +
               " --mode " + mode + " --trace-search");
    if (inv.code != 0) return {false, std::string("play --trace-search failed (") + mode + ")"};
    std::istringstream trace(
        Slurp(inv.out["result"]["dir"].get<std::string>() + "/trace.jsonl"));
    std::string line;
    while (std::getline(trace, line)) {
      const nlohmann::json j = nlohmann::json::parse(line);
      std::map<std::pair<int, int>, std::pair<double, int>> sums;
      for (const auto& s : j["simulations"]) {
        for (std::size_t e = 0; e < s["returns"].size(); ++e) {
          auto& acc = sums[{s["nodes"][e].get<int>(), s["keys"][e].get<int>()}];
          acc.first += s["returns"][e].get<double>();
          ++acc.second;
        }
      }
      for (const auto& e : j["edges"]) {
        const auto it = sums.find({e["node"].get<int>(), e["key"].get<int>()});
        if (it == sums.end() || it->second.second != e["visits"].get<int>()) {
          counts_match = false;
          continue;
        }
        worst = std::max(worst,
                         std::abs(it->second.first / it->second.second - e["q"].get<double>()));
        ++edges;
      }
      ++searches;
    }
  }
  const double secs = Seconds(start);
  return {counts_match && searches > 0 && worst <= 1e-9 && secs < 30.0,
          std::to_string(searches) + " BlindMatch searches at budget 400, " +
              std::to_string(edges) + " edges, max |mean(logged) - Q_tree| " + Fmt(worst, 3) +
              ", " + Fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 6. Quasirandom sampling beats i.i.d. sampling.

Outcome QuasirandomBeatsIid() {
  const auto start = Clock::now();
  Rng rng(2026);
  auto distance = [](const std::vector<int>& counts, const std::vector<double>& p, int n) {
    double d = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double e = static_cast<double>(counts[k]) / n - p[k];
      d += e * e;
    }
    return std::sqrt(d);
  };
  mcts::SearchConfig c;
  c.chance_mode = mcts::ChanceMode::kNeutral;
  c.chance_rule = mcts::ChanceRule::kQuasirandom;
  int wins = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<double> p = rng.Dirichlet(64, 1.0);
    std::vector<std::int32_t> visits(64, 0);
    const std::vector<double> w(64, 0.0);
    for (int i = 0; i < 1000; ++i) ++visits[mcts::SelectChanceChild(p, visits, w, c)];
    const std::vector<int> quasi(visits.begin(), visits.end());
    std::vector<double> iid;
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<int> counts(64, 0);
      for (int i = 0; i < 1000; ++i) ++counts[rng.Categorical(p)];
      iid.push_back(distance(counts, p, 1000));
    }
    std::sort(iid.begin(), iid.end());
    const double median = 0.5 * (iid[49] + iid[50]);
    if (distance(quasi, p, 1000) < median) ++wins;
  }
  const double secs = Seconds(start);
  return {wins >= 95 && secs < 60.0, std::to_string(wins) +
                                         "/100 multinomials closer than the i.i.d. median, " +
                                         Fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 10. Pure terminal rule.

// Every code step keeps code 0 almost surely, so the all-zero chain is the
// deepest branch.
class RepeatingModel : public mcts::SearchModel {
 public:
  int num_actions() const override { return 2; }
  int num_codes() const override { return 3; }
  mcts::ModelOutput Root(const envs::Observation&) const override { return Make(0.0); }
  mcts::ModelOutput Action(std::span<const double> h, int) const override {
    return Make(h[0] + 1.0);
  }
  mcts::ModelOutput Code(std::span<const double> h, int) const override {
    return Make(h[0] + 1.0);
  }

 private:
  static mcts::ModelOutput Make(double depth) {
    mcts::ModelOutput o;
    o.hidden = {depth};
    o.policy = {0.5, 0.5};
    o.code_policy = {0.98, 0.01, 0.01};
    o.value = 0.0;
    return o;
  }
};

Outcome PureTerminalRule() {
  const auto start = Clock::now();
  bool pass = true;
  int cases = 0;
  // Exhaustive on run lengths 0..25 after a distinct code, for limits 1..12.
  for (int limit = 1; limit <= 12; ++limit) {
    for (int run = 0; run <= 25; ++run) {
      std::vector<int> codes = {7, 3};
      for (int i = 0; i < run; ++i) codes.push_back(5);
      const bool expect = run >= limit || limit == 1;
      pass = pass && mcts::PureTerminalCheck(codes, limit) == expect;
      ++cases;
    }
  }
  // Every prefix of a run of 10 fires exactly at its tenth code.
  std::vector<int> run;
  for (int i = 1; i <= 15; ++i) {
    run.push_back(4);
    pass = pass && mcts::PureTerminalCheck(run, 10) == (i >= 10);
    ++cases;
  }
  // In a pure tree the repeated-code chain stops after exactly 10 codes.
  const RepeatingModel model;
  mcts::SearchConfig c;
  c.budget = 3000;
  c.shape = mcts::TreeShape::kPure;
  c.pure_repeat_limit = 10;
  mcts::Search s(model, c);
  Rng rng(0);
  s.Run({0}, {true, true}, rng);
  int depth = 0;
  int node = s.child_node(0, 0);
  while (node >= 0 && s.num_children(node) > 0 && s.child_node(node, 0) >= 0) {
    node = s.child_node(node, 0);
    ++depth;
  }
  bool leaf_unexpanded = true;
  for (int i = 0; node >= 0 && i < s.num_children(node); ++i) {
    leaf_unexpanded = leaf_unexpanded && s.child_node(node, i) < 0;
  }
  pass = pass && depth == 10 && leaf_unexpanded;
  const double secs = Seconds(start);
  return {pass, std::to_string(cases) + " run-length cases, search chain of identical codes "
                                        "stops at depth " +
                    std::to_string(depth) + ", " + Fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 11. Reproducibility of every command.

std::map<std::string, std::string> Snapshot(const std::string& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string bytes = Slurp(e.path());
    const std::string rel = fs::relative(e.path(), dir).string();
    if (rel == "data/manifest.json") {
      nlohmann::json j = nlohmann::json::parse(bytes);
      j.erase("created");  // the one permitted timestamp
      bytes = j.dump();
    }
    out[rel] = bytes;
  }
  return out;
}

Outcome Reproducibility(const std::string& work) {
  const auto start = Clock::now();
  const std::vector<std::string> commands = {
      "gen-data",
      "train --stage codec",
      "train --stage transition --model hybrid",
      "train --stage transition --model pure",
      "train --stage baseline",
      "play --agent mcts --model hybrid --mode adversarial --trace-search",
      "play --agent mcts --model baseline",
      "play --agent qvalue --model pure",
      "play --agent imitation --model hybrid",
      "play --agent random",
      "budget-sweep --agent mcts --model hybrid",
      "eval-mbre --model hybrid",
      "eval-mbre --model baseline"};
  std::vector<std::map<std::string, std::string>> snaps;
  for (int run = 0; run < 2; ++run) {
    const std::string dir = work + "/repro" + std::to_string(run);
    fs::remove_all(dir);
    // Identical output_dir for both runs; the tree is copied between them.
    const std::string out = work + "/repro_out";
    fs::remove_all(out);
    const std::string cfg = WriteConfig(dir, SmallBlindMatch(out));
    for (const std::string& cmd : commands) {
      const Invocation inv = RunCli("--config " + cfg + " --workers " + (run ? "2 " : "1 ") + cmd);
      if (inv.code != 0) return {false, "'" + cmd + "' exited " + std::to_string(inv.code)};
    }
    snaps.push_back(Snapshot(out));
  }
  int differing = 0;
  std::string first_diff;
  for (const auto& [path, bytes] : snaps[0]) {
    const auto it = snaps[1].find(path);
    if (it == snaps[1].end() || it->second != bytes) {
      if (differing++ == 0) first_diff = path;
    }
  }
  if (snaps[0].size() != snaps[1].size()) ++differing;
  const double secs = Seconds(start);
  return {differing == 0, std::to_string(commands.size()) + " commands run twice (1 and 2 " +
                              "workers), " + std::to_string(snaps[0].size()) + " files, " +
                              std::to_string(differing) + " differ" +
                              (first_diff.empty() ? "" : " (first: " + first_diff + ")") +
                              ", " + Fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// Pipelines for criteria 7-9.

struct Pipeline {
  std::string config_path;
  cli::ExperimentConfig config;
  std::string env_prefix;
};

Pipeline PreparePipeline(const std::string& config_path, const std::string& out_dir) {
  Pipeline p;
  p.config_path = config_path;
  p.env_prefix = "VQPLAN_CFG__OUTPUT_DIR=" + out_dir;
  ::setenv("VQPLAN_CFG__OUTPUT_DIR", out_dir.c_str(), 1);
  p.config = cli::LoadConfig(config_path);
  ::unsetenv("VQPLAN_CFG__OUTPUT_DIR");
  return p;
}

bool ManifestMatches(const std::string& path, const std::string& hash) {
  if (!fs::exists(path)) return false;
  const nlohmann::json m = nlohmann::json::parse(Slurp(path), nullptr, false);
  return !m.is_discarded() && m.value("hash", "") == hash;
}

// Runs a stage unless its manifest already records the current hash.
bool EnsureStage(const Pipeline& p, const std::string& args, const std::string& manifest,
                 const std::string& hash, std::string& log) {
  if (ManifestMatches(manifest, hash)) {
    log += "reused " + args + "; ";
    return true;
  }
  const auto start = Clock::now();
  std::cerr << "acceptance: running '" << args << "'" << std::endl;
  const Invocation inv =
      RunCli("--config " + p.config_path + " --workers 1 " + args, p.env_prefix);
  log += args + " " + Fmt(Seconds(start), 3) + " s; ";
  std::cerr << "acceptance: '" << args << "' exited " << inv.code << std::endl;
  return inv.code == 0;
}

nlohmann::json RunJson(const Pipeline& p, const std::string& args) {
  std::cerr << "acceptance: running '" << args << "'" << std::endl;
  const Invocation inv =
      RunCli("--config " + p.config_path + " --workers 1 " + args, p.env_prefix);
  if (inv.code != 0) {
    throw std::runtime_error("'" + args + "' exited " + std::to_string(inv.code) + ": " +
                             inv.out.dump());
  }
  return inv.out["result"];
}

bool TrainAll(const Pipeline& p, const std::vector<std::string>& models, std::string& log) {
  const cli::ExperimentConfig& c = p.config;
  bool ok = EnsureStage(p, "gen-data", c.output_dir + "/data/manifest.json", c.DataHash(), log);
  ok = ok && EnsureStage(p, "train --stage codec", c.output_dir + "/codec/manifest.json",
                         c.CodecHash(), log);
  for (const std::string& m : models) {
    ok = ok && EnsureStage(p, "train --stage transition --model " + m,
                           c.output_dir + "/transition/" + m + "/manifest.json", c.ModelHash(m),
                           log);
  }
  ok = ok && EnsureStage(p, "train --stage baseline", c.output_dir + "/baseline/manifest.json",
                         c.BaselineHash(), log);
  return ok;
}

struct Rate {
  int successes = 0;
  int games = 0;
  double rate() const { return games ? static_cast<double>(successes) / games : 0.0; }
};

Rate WinDraw(const nlohmann::json& report) {
  return {report["wins"].get<int>() + report["draws"].get<int>(), report["games"].get<int>()};
}

struct BlindMatchResults {
  bool ok = false;
  std::string error;
  std::string log;
  double seconds = 0.0;
  Rate hybrid, pure, baseline;
  Rate baseline_lo, baseline_hi, hybrid_lo, hybrid_hi;
  int budget = 200, lo_budget = 10, hi_budget = 1000;
};

BlindMatchResults RunBlindMatch(const std::string& config, const std::string& work) {
  BlindMatchResults r;
  const auto start = Clock::now();
  try {
    const Pipeline p = PreparePipeline(config, work + "/blindmatch");
    if (!TrainAll(p, {"hybrid", "pure"}, r.log)) {
      r.error = "training failed (" + r.log + ")";
      return r;
    }
    const std::string games = " --games 400";
    const std::string b = " --budget " + std::to_string(r.budget);
    r.hybrid = WinDraw(RunJson(p, "play --agent mcts --model hybrid --mode adversarial" + b + games));
    r.pure = WinDraw(RunJson(p, "play --agent mcts --model pure --mode adversarial" + b + games));
    r.baseline = WinDraw(RunJson(p, "play --agent mcts --model baseline" + b + games));
    const std::string budgets =
        " --budgets " + std::to_string(r.lo_budget) + " " + std::to_string(r.hi_budget);
    const nlohmann::json sb =
        RunJson(p, "budget-sweep --agent mcts --model baseline" + budgets + games);
    const nlohmann::json sh = RunJson(
        p, "budget-sweep --agent mcts --model hybrid --mode adversarial" + budgets + games);
    r.baseline_lo = WinDraw(sb["reports"][0]);
    r.baseline_hi = WinDraw(sb["reports"][1]);
    r.hybrid_lo = WinDraw(sh["reports"][0]);
    r.hybrid_hi = WinDraw(sh["reports"][1]);
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = Seconds(start);
  return r;
}

std::string RateText(const Rate& r) {
  const eval::Interval ci = eval::Wilson(r.successes, r.games);
  return Fmt(r.rate(), 3) + " [" + Fmt(ci.lo, 3) + ", " + Fmt(ci.hi, 3) + "]";
}

Outcome StochasticityHeadline(const BlindMatchResults& r) {
  if (!r.ok) return {false, "pipeline error: " + r.error};
  const eval::Interval h = eval::Wilson(r.hybrid.successes, r.hybrid.games);
  const eval::Interval b = eval::Wilson(r.baseline.successes, r.baseline.games);
  const double gap = r.hybrid.rate() - r.baseline.rate();
  const bool part_a = gap >= 0.10 && h.lo > b.hi;
  // (b): one-sided tests at alpha 0.05. The baseline must show no
  // significant gain from the larger budget; the VQ agent no significant loss.
  const eval::ProportionTest tb = eval::TwoProportionTest(
      r.baseline_hi.successes, r.baseline_hi.games, r.baseline_lo.successes, r.baseline_lo.games);
  const eval::ProportionTest th = eval::TwoProportionTest(
      r.hybrid_hi.successes, r.hybrid_hi.games, r.hybrid_lo.successes, r.hybrid_lo.games);
  const bool part_b = tb.p_greater >= 0.05 && th.p_less >= 0.05;
  const bool in_time = r.seconds <= 7200.0;
  std::string d = "(a) win+draw at budget 200: VQ-hybrid adversarial " + RateText(r.hybrid) +
                  " vs baseline " + RateText(r.baseline) + ", gap " + Fmt(100 * gap, 3) +
                  " pp " + (part_a ? "ok" : "NOT MET") + "; (b) baseline " +
                  Fmt(r.baseline_lo.rate(), 3) + " -> " + Fmt(r.baseline_hi.rate(), 3) +
                  " (p gain " + Fmt(tb.p_greater, 3) + "), VQ " + Fmt(r.hybrid_lo.rate(), 3) +
                  " -> " + Fmt(r.hybrid_hi.rate(), 3) + " (p loss " + Fmt(th.p_less, 3) + ") " +
                  (part_b ? "ok" : "NOT MET") + "; wall " + Fmt(r.seconds, 4) + " s";
  return {part_a && part_b && in_time, d};
}

Outcome HybridPureParity(const BlindMatchResults& r) {
  if (!r.ok) return {false, "pipeline error: " + r.error};
  const eval::Interval diff =
      eval::DifferenceInterval(r.hybrid.successes, r.hybrid.games, r.pure.successes, r.pure.games);
  const double gap = std::abs(r.hybrid.rate() - r.pure.rate());
  return {gap < diff.width(), "win+draw hybrid " + RateText(r.hybrid) + ", pure " +
                                  RateText(r.pure) + ", |difference| " + Fmt(gap, 3) +
                                  " vs joint 95% CI width " + Fmt(diff.width(), 3)};
}

// Reference points for the GoalGrid comparison: best-of-k rollouts drawn
// from the true environment and behavior policy (a perfect stochastic
// model), and a single all-empty frame sequence (pure mean regression).
struct MbreReference {
  double true_environment = 0.0;
  double blank_frames = 0.0;
};

MbreReference GoalGridReference(const cli::ExperimentConfig& c,
                                std::span<const envs::Trajectory> valid, int k, int horizon) {
  const codec::EnvShape shape = codec::ShapeOf(c.env);
  const envs::BehaviorPolicy behavior(c.data.behavior);
  const int prefix = c.eval.mbre_prefix;
  eval::RolloutSet oracle, blank;
  oracle.prefix = blank.prefix = prefix;
  oracle.horizon = blank.horizon = horizon;
  Rng rng(cli::DeriveSeed(c.seed, "acceptance-reference"));
  for (const envs::Trajectory& e : valid) {
    if (static_cast<int>(oracle.truths.size()) >= c.eval.mbre_truths) break;
    if (e.length() < prefix + horizon) continue;
    const eval::Rollout truth = eval::TruthFrames(e, shape, prefix + horizon);
    const envs::Observation& last = e.observations[prefix - 1];
    const int agent = static_cast<int>(std::find(last.begin(), last.end(), 1) - last.begin());
    const int apple = static_cast<int>(std::find(last.begin(), last.end(), 2) - last.begin());
    std::vector<eval::Rollout> samples;
    for (int i = 0; i < k; ++i) {
      envs::GoalGrid grid(c.env);
      grid.Reset(rng, 0);
      grid.Place(agent, apple);
      const double skill = behavior.SampleSkill(rng);
      eval::Rollout r(truth.begin(), truth.begin() + prefix);
      for (int t = 0; t < horizon; ++t) {
        if (!grid.done()) grid.Step(behavior.Act(grid, skill, rng), rng);
        r.push_back(codec::OneHot(grid.observation(), shape));
      }
      samples.push_back(std::move(r));
    }
    eval::Rollout empty(truth.begin(), truth.begin() + prefix);
    empty.resize(prefix + horizon, eval::Frame(truth.front().size(), 0.0));
    for (int t = prefix; t < prefix + horizon; ++t) {
      for (int cell = 0; cell < shape.cells; ++cell) empty[t][cell * shape.categories] = 1.0;
    }
    oracle.truths.push_back(truth);
    oracle.samples.push_back(std::move(samples));
    blank.truths.push_back(truth);
    blank.samples.push_back({empty});
  }
  return {eval::Mbre(oracle, true), eval::Mbre(blank, true)};
}

// 9. MBRE properties on GoalGrid.
Outcome MbreProperties(const std::string& config, const std::string& work) {
  const auto start = Clock::now();
  try {
    const Pipeline p = PreparePipeline(config, work + "/goalgrid");
    std::string log;
    if (!TrainAll(p, {"hybrid"}, log)) return {false, "training failed (" + log + ")"};
    const nlohmann::json vq = RunJson(p, "eval-mbre --model hybrid --k 100 --horizon 20");
    const nlohmann::json base = RunJson(p, "eval-mbre --model baseline --k 100 --horizon 20");
    // Structural properties on the trained model's own rollouts.
    const cli::ExperimentConfig& c = p.config;
    const codec::StateCodec codec = cli::LoadCodec(c);
    const transition::TransitionModel model = cli::LoadModel(c, "hybrid", &codec);
    const cli::LoadedData data = cli::LoadData(c);
    eval::RolloutSet set;
    set.prefix = c.eval.mbre_prefix;
    set.horizon = 20;
    Rng rng(cli::DeriveSeed(c.seed, "acceptance-mbre"));
    for (const envs::Trajectory& e : data.valid) {
      if (static_cast<int>(set.truths.size()) >= 20) break;
      if (e.length() < set.prefix + set.horizon) continue;
      set.truths.push_back(eval::TruthFrames(e, codec.shape(), set.prefix + set.horizon));
      set.samples.push_back(
          eval::SampleRollouts(codec, model, e, set.prefix, 100, set.horizon, rng));
    }
    // Self-samples: a set whose only sample is the truth itself.
    eval::RolloutSet own = set;
    for (std::size_t i = 0; i < own.truths.size(); ++i) own.samples[i] = {own.truths[i]};
    const double own_cum = eval::Mbre(own, true);
    const double own_tgt = eval::Mbre(own, false);
    bool monotone = true;
    double prev = 1e300;
    for (int k = 1; k <= 100; ++k) {
      const double m = eval::Mbre(set, true, k);
      monotone = monotone && m <= prev + 1e-12;
      prev = m;
    }
    const MbreReference ref = GoalGridReference(c, data.valid, 100, 20);
    const double vq_m = vq["mbre_cumulative"].get<double>();
    const double base_m = base["mbre_cumulative"].get<double>();
    const double secs = Seconds(start);
    const bool pass = own_cum == 0.0 && own_tgt == 0.0 && monotone && vq_m < base_m && secs < 600;
    return {pass, "self-sample MBRE " + Fmt(own_cum, 3) + "; monotone in k=1..100 " +
                      (monotone ? "yes" : "NO") + "; MBRE(k=100, h=20) VQ " + Fmt(vq_m, 4) +
                      " vs baseline " + Fmt(base_m, 4) + " (target frame " +
                      Fmt(vq["mbre_target"].get<double>(), 3) + " vs " +
                      Fmt(base["mbre_target"].get<double>(), 3) + "); reference: true-environment sampler " +
                      Fmt(ref.true_environment, 4) + ", all-empty frames " +
                      Fmt(ref.blank_frames, 4) + "; " + log + "total " +
                      Fmt(secs, 4) + " s"};
  } catch (const std::exception& e) {
    return {false, std::string("pipeline error: ") + e.what()};
  }
}

void Report(int id, const std::string& title, const std::function<Outcome()>& check,
            int& failures) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " " << title << " ("
            << o.detail << ")" << std::endl;
}

int Main(int argc, char** argv) {
  CLI::App app{"vqplan acceptance checks"};
  bool fast = false;
  bool pipeline = false;
  std::string work = "acceptance_runs";
  std::string configs = VQPLAN_CONFIG_DIR;
  app.add_flag("--fast", fast, "criteria 1-6, 10, 11");
  app.add_flag("--pipeline", pipeline, "criteria 7-9");
  app.add_option("--workdir", work, "scratch and pipeline output directory");
  app.add_option("--configs", configs, "directory holding blindmatch.json and goalgrid.json");
  CLI11_PARSE(app, argc, argv);
  if (!fast && !pipeline) fast = pipeline = true;
  work = fs::absolute(work).string();
  fs::create_directories(work);
  int failures = 0;
  if (fast) {
    Report(1, "gradient soundness", GradientSoundness, failures);
    Report(2, "EMA k-means fixed point", KMeansFixedPoint, failures);
    Report(3, "straight-through identity", StraightThroughIdentity, failures);
    Report(4, "tabular oracle per chance mode", TabularOracle, failures);
    Report(5, "backup-mean invariant", [&] { return BackupMeanInvariant(work); }, failures);
    Report(6, "quasirandom beats i.i.d.", QuasirandomBeatsIid, failures);
  }
  if (pipeline) {
    const BlindMatchResults bm = RunBlindMatch(configs + "/blindmatch.json", work);
    Report(7, "BlindMatch stochasticity headline", [&] { return StochasticityHeadline(bm); },
           failures);
    Report(8, "hybrid and pure parity", [&] { return HybridPureParity(bm); }, failures);
    Report(9, "MBRE properties on GoalGrid",
           [&] { return MbreProperties(configs + "/goalgrid.json", work); }, failures);
  }
  if (fast) {
    Report(10, "pure terminal rule", PureTerminalRule, failures);
    Report(11, "reproducibility", [&] { return Reproducibility(work); }, failures);
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace vqplan::acceptance

int main(int argc, char** argv) { return vqplan::acceptance::Main(argc, argv); }
