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


#include "vqplan/eval/mbre.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vqplan/common/error.h"
#include "vqplan/common/hash.h"
#include "vqplan/common/strict_json.h"
#include "vqplan/numerics/ops.h"
#include "vqplan/numerics/tape.h"
#include "vqplan/vq/codebook.h"

namespace vqplan::eval {

using codec::CodecInput;
using codec::EnvShape;
using envs::Observation;
using envs::Trajectory;

void RolloutSet::Validate() const {
  if (truths.size() != samples.size()) {
    throw DimensionError("rollouts: one sample set per ground truth required");
  }
  if (prefix < 1) throw ContractError("rollouts: prefix must be >= 1");
  if (horizon < 0) throw ContractError("rollouts: horizon must be >= 0");
  const std::size_t length = static_cast<std::size_t>(prefix + horizon);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i].size() < length) throw DimensionError("rollouts: ground truth too short");
    if (samples[i].empty()) throw ContractError("rollouts: every truth needs k >= 1 samples");
    for (const Rollout& s : samples[i]) {
      if (s.size() < length) throw DimensionError("rollouts: sample too short");
      for (std::size_t t = 0; t < length; ++t) {
        if (s[t].size() != truths[i][t].size()) {
          throw DimensionError("rollouts: frame width mismatch");
        }
      }
      for (int t = 0; t < prefix; ++t) {
        if (s[t] != truths[i][t]) throw ContractError("rollouts: sample leaves the prefix");
      }
    }
  }
}

namespace {

double FrameError(const Frame& a, const Frame& b) {
  double e = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    e += d * d;
  }
  return e;
}

int SampleIndex(std::span<const double> probs, double temperature, Rng& rng) {
  if (temperature <= 0.0) {
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  }
  if (temperature == 1.0) return rng.Categorical(probs);
  std::vector<double> w(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) w[i] = std::pow(probs[i], 1.0 / temperature);
  return rng.Categorical(w);
}

double HorizonMbre(const RolloutSet& r, bool cumulative, int k, int horizon) {
  if (horizon == 0 || r.truths.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < r.truths.size(); ++i) {
    const int n = k > 0 ? std::min<int>(k, static_cast<int>(r.samples[i].size()))
                        : static_cast<int>(r.samples[i].size());
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < n; ++s) {
      double e = 0.0;
      const int first = cumulative ? r.prefix : r.prefix + horizon - 1;
      for (int t = first; t < r.prefix + horizon; ++t) {
        e += FrameError(r.samples[i][s][t], r.truths[i][t]);
      }
      best = std::min(best, e);
    }
    total += best;
  }
  return total / static_cast<double>(r.truths.size());
}

void CheckRolloutArgs(const Trajectory& source, int prefix, int k, int horizon) {
  if (prefix < 1) throw ContractError("rollouts: prefix must be >= 1");
  if (k < 1) throw ContractError("rollouts: k must be >= 1");
  if (horizon < 0) throw ContractError("rollouts: horizon must be >= 0");
  if (source.length() < prefix) throw ContractError("rollouts: trajectory shorter than prefix");
}

}  // namespace

double Mbre(const RolloutSet& rollouts, bool cumulative, int k) {
  rollouts.Validate();
  return HorizonMbre(rollouts, cumulative, k, rollouts.horizon);
}

std::vector<MbreRow> MbreCurve(const RolloutSet& rollouts, int k) {
  rollouts.Validate();
  std::vector<MbreRow> rows;
  for (int h = 1; h <= rollouts.horizon; ++h) {
    rows.push_back({h, HorizonMbre(rollouts, true, k, h), HorizonMbre(rollouts, false, k, h)});
  }
  return rows;
}

CodecInput WindowAt(std::span<const Observation> observations, std::span<const int> actions,
                    int t, int context) {
  if (t < 0 || t >= static_cast<int>(observations.size()) ||
      static_cast<int>(actions.size()) != t + 1) {
    throw ContractError("WindowAt: need observations up to t and actions up to a_t");
  }
  CodecInput in;
  in.history.resize(context);
  in.actions.assign(context, -1);
  for (int i = 0; i < context; ++i) {
    const int tau = t - context + 1 + i;
    if (tau >= 0) {
      in.history[i] = observations[tau];
      in.actions[i] = actions[tau];
    }
  }
  return in;
}

Rollout TruthFrames(const Trajectory& trajectory, const EnvShape& shape, int length) {
  VQPLAN_CHECK(length <= trajectory.length(), "TruthFrames: trajectory too short");
  Rollout r;
  for (int t = 0; t < length; ++t) r.push_back(codec::OneHot(trajectory.observations[t], shape));
  return r;
}

std::vector<Rollout> SampleRollouts(const codec::StateCodec& codec,
                                    const transition::TransitionModel& model,
                                    const Trajectory& source, int prefix, int k, int horizon,
                                    Rng& rng, double temperature) {
  CheckRolloutArgs(source, prefix, k, horizon);
  if (model.config().variant != transition::PathVariant::kHybrid ||
      codec.config().stride != 1) {
    throw ConfigError("rollouts: sampling needs a hybrid model over a stride-1 codec");
  }
  if (model.code_sizes() != codec.code_sizes() || !(model.shape() == codec.shape())) {
    throw ArtifactMismatch("rollouts: transition model and codec disagree on codes or shape");
  }
  const EnvShape& shape = codec.shape();
  const std::vector<int> sizes = codec.code_sizes();
  const Rollout head = TruthFrames(source, shape, prefix);
  std::vector<Rollout> out;
  for (int s = 0; s < k; ++s) {
    std::vector<Observation> obs(source.observations.begin(),
                                 source.observations.begin() + prefix);
    std::vector<int> actions(source.actions.begin(), source.actions.begin() + (prefix - 1));
    Rollout frames = head;
    transition::StepPrediction p = model.Root(obs.back());
    for (int h = 0; h < horizon; ++h) {
      const int a = SampleIndex(p.policy, temperature, rng);
      actions.push_back(a);
      p = model.StepAction(p.hidden, a);
      const int joint = SampleIndex(p.code_policy, temperature, rng);
      codec::LatentCode code{vq::SplitJointIndex(joint, sizes), 1};
      const int t = static_cast<int>(obs.size()) - 1;
      Observation next = codec.DecodeArgmax(WindowAt(obs, actions, t, codec.config().context),
                                            code);
      frames.push_back(codec::OneHot(next, shape));
      obs.push_back(std::move(next));
      p = model.StepJointCode(p.hidden, joint);
    }
    out.push_back(std::move(frames));
  }
  return out;
}

void FramePredictorConfig::Validate() const {
  if (context < 1) throw ConfigError("frame.context: must be >= 1");
  if (hidden < 1) throw ConfigError("frame.hidden: must be >= 1");
  if (layers < 1) throw ConfigError("frame.layers: must be >= 1");
}

nlohmann::json FramePredictorConfig::ToJson() const {
  return {{"context", context},
          {"hidden", hidden},
          {"layers", layers},
          {"activation", numerics::ActivationName(activation)}};
}

FramePredictorConfig FramePredictorConfig::FromJson(const nlohmann::json& j) {
  FramePredictorConfig c;
  StrictObject o(j, "frame");
  o.Get("context", c.context);
  o.Get("hidden", c.hidden);
  o.Get("layers", c.layers);
  if (o.Has("activation")) {
    std::string s;
    o.Get("activation", s);
    c.activation = numerics::ParseActivation(s);
  }
  o.Finish();
  c.Validate();
  return c;
}

FramePredictor::FramePredictor(FramePredictorConfig config, EnvShape shape, std::uint64_t seed)
    : config_(config), shape_(shape) {
  config_.Validate();
  spec_.name = "frame/mlp";
  spec_.activation = config_.activation;
  spec_.widths.push_back(config_.context * (shape_.observation_width() + shape_.actions));
  for (int l = 0; l < config_.layers; ++l) spec_.widths.push_back(config_.hidden);
  spec_.widths.push_back(shape_.observation_width());
  Rng rng(seed);
  numerics::InitMlp(spec_, params_, rng);
}

std::vector<double> FramePredictor::Features(const CodecInput& input) const {
  if (static_cast<int>(input.history.size()) != config_.context ||
      static_cast<int>(input.actions.size()) != config_.context) {
    throw DimensionError("frame predictor: context length mismatch");
  }
  std::vector<double> f;
  f.reserve(spec_.input_width());
  for (const Observation& o : input.history) codec::AppendOneHot(o, shape_, f);
  for (int a : input.actions) {
    for (int i = 0; i < shape_.actions; ++i) f.push_back(a == i ? 1.0 : 0.0);
  }
  return f;
}

std::vector<double> FramePredictor::Probabilities(const CodecInput& input) const {
  std::vector<double> logits = numerics::MlpInfer(params_, spec_, Features(input));
  for (int c = 0; c < shape_.cells; ++c) {
    numerics::SoftmaxInPlace(
        std::span<double>(logits.data() + c * shape_.categories, shape_.categories));
  }
  return logits;
}

std::string FramePredictor::ConfigHash() const {
  nlohmann::json j = {{"frame", config_.ToJson()}, {"shape", shape_.ToJson()}};
  return HashHex(j.dump());
}

void FramePredictor::Save(numerics::Checkpoint& ckpt) const {
  ckpt.meta()["frame"] = {
      {"config", config_.ToJson()}, {"shape", shape_.ToJson()}, {"config_hash", ConfigHash()}};
  numerics::StoreParams(ckpt, params_, "frame");
}

FramePredictor FramePredictor::Load(const numerics::Checkpoint& ckpt) {
  const auto& meta = ckpt.meta();
  if (!meta.contains("frame")) throw ArtifactMismatch("checkpoint holds no frame predictor");
  const auto& m = meta["frame"];
  FramePredictor p(FramePredictorConfig::FromJson(m.at("config")),
                   EnvShape::FromJson(m.at("shape")), 0);
  if (m.at("config_hash").get<std::string>() != p.ConfigHash()) {
    throw ArtifactMismatch("frame predictor fingerprint does not match its configuration");
  }
  numerics::LoadParams(ckpt, p.params_, "frame");
  return p;
}

std::vector<FrameLogRow> TrainFramePredictor(FramePredictor& predictor,
                                             std::span<const Trajectory> data,
                                             const FrameTrainOptions& options) {
  const std::vector<codec::TransitionRef> refs = codec::CodecTransitions(data);
  if (refs.empty()) throw ContractError("frame predictor: dataset has no transitions");
  VQPLAN_CHECK(options.batch >= 1, "frame predictor: batch must be >= 1");
  const EnvShape& shape = predictor.shape();
  const int width = predictor.spec().input_width();
  const Rng base(options.seed);
  numerics::ParamStore& params = predictor.params();
  std::vector<FrameLogRow> curve;
  while (params.step() < options.steps) {
    const std::int64_t step = params.step();
    Rng rng = base.Split(static_cast<std::uint64_t>(step));
    std::vector<double> x;
    x.reserve(static_cast<std::size_t>(options.batch) * width);
    std::vector<int> targets;
    for (int b = 0; b < options.batch; ++b) {
      const codec::TransitionRef r = refs[rng.UniformInt(static_cast<int>(refs.size()))];
      const Trajectory& tr = data[r.episode];
      std::span<const int> acts(tr.actions.data(), r.t + 1);
      const std::vector<double> f = predictor.Features(
          WindowAt(tr.observations, acts, r.t, predictor.config().context));
      x.insert(x.end(), f.begin(), f.end());
      for (int c : tr.observations[r.t + 1]) targets.push_back(c);
    }
    numerics::Tape tape;
    numerics::Var in = tape.Constant(options.batch, width, std::move(x));
    numerics::Var logits = numerics::MlpForward(tape, params, predictor.spec(), in);
    logits = numerics::Reshape(tape, logits, options.batch * shape.cells, shape.categories);
    numerics::Var loss = numerics::Scale(
        tape, numerics::SoftmaxCrossEntropy(tape, logits, targets), 1.0 / options.batch);
    tape.Backward(loss, &params);
    numerics::ApplyAdam(params, options.adam);
    const std::int64_t done = step + 1;
    if (step == 0 || done % std::max(options.log_every, 1) == 0 || done == options.steps) {
      curve.push_back({done, tape.scalar(loss) / shape.cells});
    }
  }
  return curve;
}

std::vector<Rollout> BaselineRollouts(const FramePredictor& predictor,
                                      const transition::TransitionModel& model,
                                      const Trajectory& source, int prefix, int k, int horizon,
                                      Rng& rng, double temperature) {
  CheckRolloutArgs(source, prefix, k, horizon);
  if (!(model.shape() == predictor.shape())) {
    throw ArtifactMismatch("rollouts: baseline model and frame predictor disagree on shape");
  }
  const EnvShape& shape = predictor.shape();
  const Rollout head = TruthFrames(source, shape, prefix);
  std::vector<Rollout> out;
  for (int s = 0; s < k; ++s) {
    std::vector<Observation> obs(source.observations.begin(),
                                 source.observations.begin() + prefix);
    std::vector<int> actions(source.actions.begin(), source.actions.begin() + (prefix - 1));
    Rollout frames = head;
    transition::StepPrediction p = model.Root(obs.back());
    for (int h = 0; h < horizon; ++h) {
      const int a = SampleIndex(p.policy, temperature, rng);
      actions.push_back(a);
      p = model.StepAction(p.hidden, a);
      const int t = static_cast<int>(obs.size()) - 1;
      Frame probs =
          predictor.Probabilities(WindowAt(obs, actions, t, predictor.config().context));
      Observation next(shape.cells);
      for (int c = 0; c < shape.cells; ++c) {
        const auto row = probs.begin() + c * shape.categories;
        next[c] = static_cast<int>(std::max_element(row, row + shape.categories) - row);
      }
      frames.push_back(std::move(probs));
      obs.push_back(std::move(next));
    }
    out.push_back(std::move(frames));
  }
  return out;
}

}  // namespace vqplan::eval
