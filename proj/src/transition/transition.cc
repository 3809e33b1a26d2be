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


#include "vqplan/transition/transition.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vqplan/common/error.h"
#include "vqplan/common/hash.h"
#include "vqplan/common/strict_json.h"
#include "vqplan/numerics/ops.h"
#include "vqplan/vq/codebook.h"

namespace vqplan::transition {

using envs::Observation;
using envs::Trajectory;
using numerics::MlpSpec;
using numerics::Tape;
using numerics::Var;

const char* PathVariantName(PathVariant v) {
  switch (v) {
    case PathVariant::kHybrid:
      return "hybrid";
    case PathVariant::kPure:
      return "pure";
    case PathVariant::kJumpy:
      return "jumpy";
    case PathVariant::kDeterministic:
      return "deterministic";
  }
  return "?";
}

PathVariant ParsePathVariant(const std::string& name) {
  if (name == "hybrid") return PathVariant::kHybrid;
  if (name == "pure") return PathVariant::kPure;
  if (name == "jumpy") return PathVariant::kJumpy;
  if (name == "deterministic") return PathVariant::kDeterministic;
  throw ConfigError("unknown path variant '" + name + "'");
}

void TransitionConfig::Validate() const {
  if (unroll < 1) throw ConfigError("transition.unroll: must be >= 1");
  if (value_weight < 0) throw ConfigError("transition.value_weight: must be >= 0");
  if (reward_weight < 0) throw ConfigError("transition.reward_weight: must be >= 0");
  if (!(discount > 0 && discount <= 1)) {
    throw ConfigError("transition.discount: must be in (0,1]");
  }
  if (value_target != "mc_return") {
    throw ConfigError("transition.value_target: only 'mc_return' is supported");
  }
  if (hidden < 1 || cell_hidden < 1 || head_hidden < 1) {
    throw ConfigError("transition.hidden: widths must be positive");
  }
}

nlohmann::json TransitionConfig::ToJson() const {
  return {{"unroll", unroll},
          {"value_weight", value_weight},
          {"reward_weight", reward_weight},
          {"reward_head", reward_head},
          {"discount", discount},
          {"variant", PathVariantName(variant)},
          {"value_target", value_target},
          {"hidden", hidden},
          {"cell_hidden", cell_hidden},
          {"head_hidden", head_hidden},
          {"activation", numerics::ActivationName(activation)}};
}

TransitionConfig TransitionConfig::FromJson(const nlohmann::json& j) {
  TransitionConfig c;
  StrictObject o(j, "transition");
  o.Get("unroll", c.unroll);
  o.Get("value_weight", c.value_weight);
  o.Get("reward_weight", c.reward_weight);
  o.Get("reward_head", c.reward_head);
  o.Get("discount", c.discount);
  std::string variant = PathVariantName(c.variant);
  o.Get("variant", variant);
  c.variant = ParsePathVariant(variant);
  o.Get("value_target", c.value_target);
  o.Get("hidden", c.hidden);
  o.Get("cell_hidden", c.cell_hidden);
  o.Get("head_hidden", c.head_hidden);
  std::string act = numerics::ActivationName(c.activation);
  o.Get("activation", act);
  c.activation = numerics::ParseActivation(act);
  o.Finish();
  c.Validate();
  return c;
}

std::vector<StepKind> StepSchedule(PathVariant variant, int depth) {
  std::vector<StepKind> s;
  switch (variant) {
    case PathVariant::kHybrid:
    case PathVariant::kJumpy:
      for (int m = 0; m < depth; ++m) {
        s.push_back(StepKind::kAction);
        s.push_back(StepKind::kCode);
      }
      break;
    case PathVariant::kPure:
      s.push_back(StepKind::kAction);
      for (int m = 0; m < depth; ++m) s.push_back(StepKind::kCode);
      break;
    case PathVariant::kDeterministic:
      for (int m = 0; m < depth; ++m) s.push_back(StepKind::kAction);
      break;
  }
  return s;
}

std::vector<double> MonteCarloReturns(std::span<const double> rewards, double discount) {
  std::vector<double> g(rewards.size() + 1, 0.0);
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    g[t] = rewards[t] + discount * g[t + 1];
  }
  return g;
}

std::vector<int> PathCodeSizes(PathVariant variant, const codec::StateCodec& codec) {
  if (variant == PathVariant::kDeterministic) return {};
  std::vector<int> sizes = codec.code_sizes();
  if (variant == PathVariant::kPure) {
    if (!codec.config().factorized) {
      throw ConfigError("pure paths need a factorized codec (codec.factorized = true)");
    }
    sizes.push_back(codec.config().action_codes);
  }
  return sizes;
}

TrajectoryCodes EncodeForPaths(const codec::StateCodec& codec, PathVariant variant,
                               const Trajectory& trajectory) {
  const int stride = codec.config().stride;
  if (variant != PathVariant::kJumpy && stride != 1) {
    throw ConfigError(std::string(PathVariantName(variant)) +
                      " paths need codec.stride = 1");
  }
  TrajectoryCodes out;
  out.state = codec.EncodeTrajectory(trajectory);
  if (variant == PathVariant::kPure) out.action = codec.EncodeTrajectoryActions(trajectory);
  return out;
}

std::vector<int> RootTimes(const Trajectory& trajectory, PathVariant variant, int stride) {
  const int step = variant == PathVariant::kJumpy ? stride : 1;
  std::vector<int> roots;
  for (int t = 0; t + 1 < trajectory.length(); t += step) roots.push_back(t);
  return roots;
}

namespace {

std::vector<int> RandomCode(std::span<const int> sizes, Rng& rng) {
  std::vector<int> c(sizes.size());
  for (std::size_t b = 0; b < sizes.size(); ++b) c[b] = rng.UniformInt(sizes[b]);
  return c;
}

}  // namespace

PlanningPath AssemblePath(const Trajectory& trajectory, const TrajectoryCodes& codes,
                          const TransitionConfig& config, std::span<const int> code_sizes,
                          int num_actions, int root_time, Rng& rng) {
  const int T = trajectory.length();
  const int last = T - 2;  // last real transition
  const int t = root_time;
  if (t < 0 || t > last) throw ContractError("assemble paths: root outside the trajectory");
  const PathVariant variant = config.variant;
  const int M = config.unroll;
  const bool fold = !config.reward_head;
  const double gamma = config.discount;
  const int stride =
      variant == PathVariant::kJumpy && !codes.state.empty() ? codes.state.front().stride : 1;
  if (variant != PathVariant::kDeterministic) {
    const std::size_t expected = static_cast<std::size_t>((T - 1 + stride - 1) / stride);
    if (codes.state.size() != expected) {
      throw ContractError("assemble paths: " + std::to_string(codes.state.size()) +
                          " codes for a trajectory needing " + std::to_string(expected));
    }
    if (variant == PathVariant::kPure && codes.action.size() != expected) {
      throw ContractError("assemble paths: action codes misaligned");
    }
    if (t % stride != 0) throw ContractError("assemble paths: root not on a code block");
  }
  const std::vector<double> G = MonteCarloReturns(trajectory.rewards, gamma);
  auto action_at = [&](int tau) {
    return tau <= last ? trajectory.actions[tau] : rng.UniformInt(num_actions);
  };
  auto real_action = [&](int tau) { return tau <= last ? trajectory.actions[tau] : -1; };
  // Value of a state node entered from transition block `from` and
  // reaching env time `to`.
  auto state_value = [&](int from, int to) {
    if (fold) return G[std::min(from, last)];
    return to <= T - 1 ? G[to] : 0.0;
  };
  auto q_value = [&](int tau) {
    if (tau <= last) return G[tau];
    return fold ? G[last] : 0.0;
  };
  const std::size_t books = code_sizes.size();

  PlanningPath p;
  p.root = trajectory.observations[t];
  p.variant = variant;
  p.depth = M;
  p.stride = stride;
  p.root_time = t;
  auto push_hidden = [&](int policy, std::vector<int> code, double value, double reward) {
    p.policy_target.push_back(policy);
    if (code.empty()) code.assign(books, -1);
    p.code_target.push_back(std::move(code));
    p.value_target.push_back(value);
    p.reward_target.push_back(reward);
  };
  push_hidden(trajectory.actions[t], {}, G[t], 0.0);

  if (variant == PathVariant::kHybrid || variant == PathVariant::kJumpy) {
    for (int m = 0; m < M; ++m) {
      const int tau = t + m * stride;
      const int next = tau + stride;
      const bool real = tau <= last;
      p.real_transitions += real;
      p.steps.push_back({StepKind::kAction, action_at(tau), {}});
      std::vector<int> target;
      std::vector<int> input;
      if (real) {
        target = codes.state[tau / stride].indices;
        input = target;
      } else {
        input = RandomCode(code_sizes, rng);
      }
      push_hidden(-1, target, q_value(tau), 0.0);
      p.steps.push_back({StepKind::kCode, -1, input});
      double block_reward = 0.0;
      for (int j = tau, k = 0; j < next && j <= last; ++j, ++k) {
        block_reward += std::pow(gamma, k) * trajectory.rewards[j];
      }
      const int policy = m + 1 < M ? real_action(next) : -1;
      push_hidden(policy, {}, real ? state_value(tau, next) : state_value(last, T), block_reward);
    }
  } else if (variant == PathVariant::kPure) {
    const std::size_t sb = books - 1;  // state books; the last book is the action code
    auto code_of = [&](int tau, bool target) {
      // k for the transition leaving env time tau: state code of tau and
      // the action code of tau+1.
      std::vector<int> c(books, -1);
      if (tau <= last) {
        for (std::size_t b = 0; b < sb; ++b) c[b] = codes.state[tau].indices[b];
      }
      if (tau + 1 <= last) c[sb] = codes.action[tau + 1];
      if (!target) {
        for (std::size_t b = 0; b < books; ++b) {
          if (c[b] < 0) c[b] = rng.UniformInt(code_sizes[b]);
        }
      }
      return c;
    };
    p.steps.push_back({StepKind::kAction, trajectory.actions[t], {}});
    p.real_transitions = 0;
    push_hidden(-1, code_of(t, true), G[t], 0.0);
    for (int m = 1; m <= M; ++m) {
      const int tau = t + m - 1;  // transition this code realizes
      p.real_transitions += tau <= last;
      p.steps.push_back({StepKind::kCode, -1, code_of(tau, false)});
      std::vector<int> target = m < M ? code_of(tau + 1, true) : std::vector<int>{};
      const double value = fold ? G[std::min(tau, last)] : q_value(tau + 1);
      const double reward = tau <= last ? trajectory.rewards[tau] : 0.0;
      push_hidden(-1, target, value, reward);
    }
  } else {
    for (int m = 0; m < M; ++m) {
      const int tau = t + m;
      p.real_transitions += tau <= last;
      p.steps.push_back({StepKind::kAction, action_at(tau), {}});
      const double reward = tau <= last ? trajectory.rewards[tau] : 0.0;
      push_hidden(real_action(tau + 1), {}, state_value(tau, tau + 1), reward);
    }
  }
  return p;
}

std::vector<PlanningPath> AssemblePaths(const Trajectory& trajectory, const TrajectoryCodes& codes,
                                        const TransitionConfig& config,
                                        std::span<const int> code_sizes, int num_actions,
                                        Rng& rng) {
  const int stride = config.variant == PathVariant::kJumpy && !codes.state.empty()
                         ? codes.state.front().stride
                         : 1;
  std::vector<PlanningPath> out;
  for (int t : RootTimes(trajectory, config.variant, stride)) {
    out.push_back(AssemblePath(trajectory, codes, config, code_sizes, num_actions, t, rng));
  }
  return out;
}

TransitionModel::TransitionModel(TransitionConfig config, codec::EnvShape shape,
                                 std::vector<int> code_sizes, std::uint64_t seed)
    : config_(std::move(config)), shape_(shape), code_sizes_(std::move(code_sizes)) {
  config_.Validate();
  if (has_codes() && code_sizes_.empty()) {
    throw ConfigError("transition: variant needs code sizes");
  }
  if (!has_codes()) code_sizes_.clear();
  const int H = config_.hidden;
  const auto act = config_.activation;
  embed_ = {"transition/embed", {shape_.observation_width(), H, H}, act, true};
  g_ = {"transition/g", {H + shape_.actions, config_.cell_hidden, H}, act, false};
  g_code_ = {"transition/g_code", {H + code_input_width(), config_.cell_hidden, H}, act, false};
  f_ = {"transition/f", {H, config_.head_hidden}, act, true};
  policy_head_ = {"transition/pi", {config_.head_hidden, shape_.actions}, act, false};
  for (std::size_t b = 0; b < code_sizes_.size(); ++b) {
    code_heads_.push_back({"transition/tau" + std::to_string(b),
                           {config_.head_hidden, code_sizes_[b]}, act, false});
  }
  value_head_ = {"transition/v", {config_.head_hidden, 1}, act, false};
  reward_head_ = {"transition/r", {config_.head_hidden, 1}, act, false};
  Rng rng = Rng(seed).Split(0x7A45);
  numerics::InitMlp(embed_, params_, rng);
  numerics::InitMlp(g_, params_, rng);
  if (has_codes()) numerics::InitMlp(g_code_, params_, rng);
  numerics::InitMlp(f_, params_, rng);
  numerics::InitMlp(policy_head_, params_, rng);
  for (const auto& h : code_heads_) numerics::InitMlp(h, params_, rng);
  numerics::InitMlp(value_head_, params_, rng);
  numerics::InitMlp(reward_head_, params_, rng);
}

int TransitionModel::joint_codes() const {
  return has_codes() ? vq::JointCardinality(code_sizes_) : 0;
}

int TransitionModel::code_input_width() const {
  return std::accumulate(code_sizes_.begin(), code_sizes_.end(), 0);
}

std::vector<double> TransitionModel::CodeOneHot(std::span<const int> code) const {
  if (code.size() != code_sizes_.size()) {
    throw ContractError("transition: code has " + std::to_string(code.size()) +
                        " indices, expected " + std::to_string(code_sizes_.size()));
  }
  std::vector<double> x(code_input_width(), 0.0);
  int offset = 0;
  for (std::size_t b = 0; b < code.size(); ++b) {
    if (code[b] < 0 || code[b] >= code_sizes_[b]) {
      throw ContractError("transition: code index " + std::to_string(code[b]) +
                          " out of range for book " + std::to_string(b));
    }
    x[offset + code[b]] = 1.0;
    offset += code_sizes_[b];
  }
  return x;
}

std::vector<double> TransitionModel::InitialEmbed(const Observation& s) const {
  if (static_cast<int>(s.size()) != shape_.cells) {
    throw DimensionError("transition: observation width " + std::to_string(s.size()) +
                         ", expected " + std::to_string(shape_.cells));
  }
  return numerics::MlpInfer(params_, embed_, codec::OneHot(s, shape_));
}

StepPrediction TransitionModel::Predict(std::span<const double> z) const {
  if (static_cast<int>(z.size()) != config_.hidden) {
    throw DimensionError("transition: hidden width mismatch");
  }
  StepPrediction p;
  p.hidden.assign(z.begin(), z.end());
  std::vector<double> h = numerics::MlpInfer(params_, f_, z);
  p.policy = numerics::Softmax(numerics::MlpInfer(params_, policy_head_, h));
  if (has_codes()) {
    std::vector<std::vector<double>> books;
    for (const auto& head : code_heads_) {
      books.push_back(numerics::Softmax(numerics::MlpInfer(params_, head, h)));
    }
    // Joint id is mixed radix with book 0 most significant.
    p.code_policy.assign(1, 1.0);
    for (const auto& probs : books) {
      std::vector<double> next;
      next.reserve(p.code_policy.size() * probs.size());
      for (double a : p.code_policy) {
        for (double b : probs) next.push_back(a * b);
      }
      p.code_policy.swap(next);
    }
  }
  p.value = numerics::MlpInfer(params_, value_head_, h)[0];
  p.reward = config_.reward_head ? numerics::MlpInfer(params_, reward_head_, h)[0] : 0.0;
  return p;
}

StepPrediction TransitionModel::Root(const Observation& s) const {
  return Predict(InitialEmbed(s));
}

std::vector<double> TransitionModel::Advance(std::span<const double> z, const MlpSpec& cell,
                                             std::span<const double> input) const {
  std::vector<double> x(z.begin(), z.end());
  x.insert(x.end(), input.begin(), input.end());
  std::vector<double> delta = numerics::MlpInfer(params_, cell, x);
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = z[i] + delta[i];
  return delta;
}

StepPrediction TransitionModel::StepAction(std::span<const double> z, int action) const {
  if (action < 0 || action >= shape_.actions) {
    throw ContractError("transition: invalid action " + std::to_string(action));
  }
  std::vector<double> a(shape_.actions, 0.0);
  a[action] = 1.0;
  return Predict(Advance(z, g_, a));
}

StepPrediction TransitionModel::StepCode(std::span<const double> z,
                                         std::span<const int> code) const {
  if (!has_codes()) throw ContractError("transition: the baseline has no code steps");
  return Predict(Advance(z, g_code_, CodeOneHot(code)));
}

StepPrediction TransitionModel::StepJointCode(std::span<const double> z, int joint) const {
  if (joint < 0 || joint >= joint_codes()) {
    throw ContractError("transition: joint code " + std::to_string(joint) + " out of range");
  }
  return StepCode(z, vq::SplitJointIndex(joint, code_sizes_));
}

Var TransitionModel::EmbedBatch(Tape& tape, const numerics::ParamStore& params,
                                Var roots) const {
  return numerics::MlpForward(tape, params, embed_, roots);
}

Var TransitionModel::StepBatch(Tape& tape, const numerics::ParamStore& params, Var z,
                               StepKind kind, Var input) const {
  const MlpSpec& cell = kind == StepKind::kAction ? g_ : g_code_;
  Var parts[2] = {z, input};
  Var delta = numerics::MlpForward(tape, params, cell, numerics::ConcatCols(tape, parts));
  return numerics::Add(tape, z, delta);
}

TransitionModel::Heads TransitionModel::HeadsBatch(Tape& tape, const numerics::ParamStore& params,
                                                   Var z) const {
  Heads h;
  Var f = numerics::MlpForward(tape, params, f_, z);
  h.policy_logits = numerics::MlpForward(tape, params, policy_head_, f);
  for (const auto& head : code_heads_) {
    h.code_logits.push_back(numerics::MlpForward(tape, params, head, f));
  }
  h.value = numerics::MlpForward(tape, params, value_head_, f);
  if (config_.reward_head) h.reward = numerics::MlpForward(tape, params, reward_head_, f);
  return h;
}

std::string TransitionModel::ConfigHash() const {
  nlohmann::json j = {{"transition", config_.ToJson()},
                      {"shape", shape_.ToJson()},
                      {"code_sizes", code_sizes_}};
  return HashHex(j.dump());
}

void TransitionModel::Save(numerics::Checkpoint& ckpt, const codec::StateCodec* codec,
                           const std::string& prefix) const {
  if (has_codes() && codec == nullptr) {
    throw ContractError("transition save: a code-conditioned model needs its codec");
  }
  ckpt.meta()[prefix] = {{"config", config_.ToJson()},
                         {"shape", shape_.ToJson()},
                         {"code_sizes", code_sizes_},
                         {"config_hash", ConfigHash()},
                         {"codec_config_hash", codec ? codec->ConfigHash() : ""},
                         {"codec_state_hash", codec ? codec->StateHash() : ""}};
  numerics::StoreParams(ckpt, params_, prefix);
}

TransitionModel TransitionModel::Load(const numerics::Checkpoint& ckpt,
                                      const codec::StateCodec* codec,
                                      const std::string& prefix) {
  if (!ckpt.meta().contains(prefix)) {
    throw ArtifactMismatch("checkpoint holds no '" + prefix + "' model");
  }
  const auto& m = ckpt.meta()[prefix];
  TransitionModel model(TransitionConfig::FromJson(m.at("config")),
                        codec::EnvShape::FromJson(m.at("shape")),
                        m.at("code_sizes").get<std::vector<int>>(), 0);
  if (model.ConfigHash() != m.at("config_hash").get<std::string>()) {
    throw ArtifactMismatch("transition checkpoint fingerprint does not match its config");
  }
  if (model.has_codes()) {
    if (codec == nullptr) throw ArtifactMismatch("transition model needs its codec to load");
    const std::string want = m.at("codec_state_hash").get<std::string>();
    const std::string want_cfg = m.at("codec_config_hash").get<std::string>();
    if (codec->StateHash() != want || codec->ConfigHash() != want_cfg) {
      throw ArtifactMismatch("codec hash mismatch: transition model expects codec " + want_cfg +
                             "/" + want + ", got " + codec->ConfigHash() + "/" +
                             codec->StateHash());
    }
    if (!(codec->shape() == model.shape())) {
      throw ArtifactMismatch("codec and transition model disagree on the environment shape");
    }
  }
  numerics::LoadParams(ckpt, model.params_, prefix);
  return model;
}

LossTerms TransitionLoss(Tape& tape, const numerics::ParamStore& params,
                         const TransitionModel& model, std::span<const PlanningPath> batch) {
  if (batch.empty()) throw ContractError("transition loss: empty batch");
  const int B = static_cast<int>(batch.size());
  const PlanningPath& first = batch.front();
  const TransitionConfig& cfg = model.config();
  if (first.variant != cfg.variant) {
    throw ContractError("transition loss: path variant differs from the model's");
  }
  const int n = static_cast<int>(first.steps.size());
  for (const auto& p : batch) {
    if (static_cast<int>(p.steps.size()) != n || p.variant != first.variant ||
        p.hidden_states() != static_cast<int>(p.value_target.size())) {
      throw ContractError("transition loss: paths in a batch must share one shape");
    }
  }
  const codec::EnvShape& shape = model.shape();
  const int M = first.depth;
  const double policy_norm = cfg.variant == PathVariant::kPure ? 1.0 : 1.0 / M;
  const double code_norm = 1.0 / M;
  const double value_norm = 1.0 / n;
  const double beta = cfg.effective_reward_weight();

  std::vector<double> roots;
  for (const auto& p : batch) codec::AppendOneHot(p.root, shape, roots);
  Var z = model.EmbedBatch(tape, params, tape.Constant(B, shape.observation_width(), roots));

  std::vector<Var> policy_terms, code_terms, value_terms, reward_terms;
  const std::vector<int>& sizes = model.code_sizes();
  for (int i = 0; i <= n; ++i) {
    TransitionModel::Heads h = model.HeadsBatch(tape, params, z);
    std::vector<int> pt(B);
    bool any_policy = false;
    for (int r = 0; r < B; ++r) {
      pt[r] = batch[r].policy_target[i];
      any_policy |= pt[r] >= 0;
    }
    if (any_policy) {
      std::vector<double> w(B, policy_norm / B);
      policy_terms.push_back(numerics::SoftmaxCrossEntropy(tape, h.policy_logits, pt, w));
    }
    for (std::size_t b = 0; b < sizes.size(); ++b) {
      std::vector<int> ct(B);
      bool any = false;
      for (int r = 0; r < B; ++r) {
        ct[r] = batch[r].code_target[i][b];
        any |= ct[r] >= 0;
      }
      if (any) {
        std::vector<double> w(B, code_norm / B);
        code_terms.push_back(numerics::SoftmaxCrossEntropy(tape, h.code_logits[b], ct, w));
      }
    }
    std::vector<double> vt(B), rt(B);
    for (int r = 0; r < B; ++r) {
      vt[r] = batch[r].value_target[i];
      rt[r] = batch[r].reward_target[i];
    }
    if (cfg.value_weight > 0) {
      std::vector<double> w(B, cfg.value_weight * value_norm / B);
      value_terms.push_back(numerics::SquaredError(tape, h.value, vt, w));
    }
    if (beta > 0) {
      std::vector<double> w(B, beta * value_norm / B);
      reward_terms.push_back(numerics::SquaredError(tape, h.reward, rt, w));
    }
    if (i == n) break;
    const StepKind kind = first.steps[i].kind;
    std::vector<double> in;
    int width = 0;
    if (kind == StepKind::kAction) {
      width = shape.actions;
      in.assign(static_cast<std::size_t>(B) * width, 0.0);
      for (int r = 0; r < B; ++r) {
        const int a = batch[r].steps[i].action;
        if (batch[r].steps[i].kind != kind || a < 0 || a >= shape.actions) {
          throw ContractError("transition loss: invalid action input");
        }
        in[static_cast<std::size_t>(r) * width + a] = 1.0;
      }
    } else {
      width = model.code_input_width();
      in.assign(static_cast<std::size_t>(B) * width, 0.0);
      for (int r = 0; r < B; ++r) {
        const auto& code = batch[r].steps[i].code;
        if (batch[r].steps[i].kind != kind || code.size() != sizes.size()) {
          throw ContractError("transition loss: invalid code input");
        }
        int offset = 0;
        for (std::size_t b = 0; b < sizes.size(); ++b) {
          if (code[b] < 0 || code[b] >= sizes[b]) {
            throw ContractError("transition loss: code index out of range");
          }
          in[static_cast<std::size_t>(r) * width + offset + code[b]] = 1.0;
          offset += sizes[b];
        }
      }
    }
    z = model.StepBatch(tape, params, z, kind, tape.Constant(B, width, std::move(in)));
  }
  auto sum = [&](const std::vector<Var>& terms) {
    return terms.empty() ? tape.Constant(1, 1, {0.0}) : numerics::AddN(tape, terms);
  };
  LossTerms out;
  out.policy = sum(policy_terms);
  out.code = sum(code_terms);
  out.value = sum(value_terms);
  out.reward = sum(reward_terms);
  Var parts[4] = {out.policy, out.code, out.value, out.reward};
  out.total = numerics::AddN(tape, parts);
  return out;
}

namespace {

void CheckCompatible(const TransitionModel& model, const codec::StateCodec* codec) {
  if (!model.has_codes()) return;
  if (codec == nullptr) {
    throw ContractError("transition training needs a trained codec (two-stage rule)");
  }
  if (PathCodeSizes(model.config().variant, *codec) != model.code_sizes()) {
    throw ArtifactMismatch("codec and transition model disagree on codebook sizes");
  }
  if (!(codec->shape() == model.shape())) {
    throw ArtifactMismatch("codec and transition model disagree on the environment shape");
  }
}

}  // namespace

EncodedDataset EncodeDataset(const codec::StateCodec* codec, const TransitionModel& model,
                             std::span<const Trajectory> data) {
  CheckCompatible(model, codec);
  EncodedDataset out;
  const int stride = codec && model.config().variant == PathVariant::kJumpy
                         ? codec->config().stride
                         : 1;
  out.codes.resize(data.size());
  for (int e = 0; e < static_cast<int>(data.size()); ++e) {
    if (data[e].length() < 2) continue;
    if (model.has_codes()) {
      out.codes[e] = EncodeForPaths(*codec, model.config().variant, data[e]);
    }
    for (int t : RootTimes(data[e], model.config().variant, stride)) out.roots.push_back({e, t});
  }
  return out;
}

TransitionReport TrainTransition(TransitionModel& model, const codec::StateCodec* codec,
                                 std::span<const Trajectory> data,
                                 const TransitionTrainOptions& options) {
  if (data.empty()) throw ContractError("train transition: empty dataset");
  if (options.batch < 1) throw ConfigError("train.batch: must be >= 1");
  EncodedDataset enc = EncodeDataset(codec, model, data);
  if (enc.roots.empty()) throw ContractError("train transition: no usable paths");
  TransitionReport report;
  const Rng base(options.seed);
  numerics::ParamStore& params = model.params();
  while (params.step() < options.steps) {
    const std::int64_t step = params.step();
    Rng rng = base.Split(static_cast<std::uint64_t>(step));
    std::vector<PlanningPath> batch;
    batch.reserve(options.batch);
    for (int b = 0; b < options.batch; ++b) {
      const auto& [e, t] = enc.roots[rng.UniformInt(static_cast<int>(enc.roots.size()))];
      batch.push_back(AssemblePath(data[e], enc.codes[e], model.config(), model.code_sizes(),
                                   model.shape().actions, t, rng));
    }
    Tape tape;
    LossTerms l = TransitionLoss(tape, params, model, batch);
    tape.Backward(l.total, &params);
    numerics::ApplyAdam(params, options.adam);
    const std::int64_t done = step + 1;
    if (step == 0 || done % std::max(options.log_every, 1) == 0 || done == options.steps) {
      report.curve.push_back({done, tape.scalar(l.total), tape.scalar(l.policy),
                              tape.scalar(l.code), tape.scalar(l.value), tape.scalar(l.reward)});
    }
  }
  return report;
}

TransitionEvaluation EvaluateTransition(const TransitionModel& model,
                                        const codec::StateCodec* codec,
                                        std::span<const Trajectory> data, int max_paths,
                                        std::uint64_t seed) {
  EncodedDataset enc = EncodeDataset(codec, model, data);
  TransitionEvaluation ev;
  if (enc.roots.empty()) return ev;
  Rng rng(seed);
  std::vector<int> order(enc.roots.size());
  std::iota(order.begin(), order.end(), 0);
  if (max_paths > 0 && max_paths < static_cast<int>(order.size())) {
    for (int i = 0; i < max_paths; ++i) {
      std::swap(order[i], order[i + rng.UniformInt(static_cast<int>(order.size()) - i)]);
    }
    order.resize(max_paths);
  }
  double policy_ce = 0, code_ce = 0, value_se = 0, reward_se = 0;
  long policy_n = 0, code_n = 0, hidden_n = 0;
  const auto& sizes = model.code_sizes();
  for (int idx : order) {
    const auto& [e, t] = enc.roots[idx];
    PlanningPath p = AssemblePath(data[e], enc.codes[e], model.config(), sizes,
                                  model.shape().actions, t, rng);
    StepPrediction pred = model.Root(p.root);
    for (int i = 0; i < p.hidden_states(); ++i) {
      if (p.policy_target[i] >= 0) {
        policy_ce -= std::log(std::max(pred.policy[p.policy_target[i]], 1e-300));
        ++policy_n;
      }
      const auto& ct = p.code_target[i];
      if (!ct.empty() && std::all_of(ct.begin(), ct.end(), [](int c) { return c >= 0; })) {
        code_ce -= std::log(std::max(pred.code_policy[vq::JointIndex(ct, sizes)], 1e-300));
        ++code_n;
      }
      value_se += (pred.value - p.value_target[i]) * (pred.value - p.value_target[i]);
      reward_se += (pred.reward - p.reward_target[i]) * (pred.reward - p.reward_target[i]);
      ++hidden_n;
      if (i + 1 == p.hidden_states()) break;
      const PathStep& s = p.steps[i];
      pred = s.kind == StepKind::kAction ? model.StepAction(pred.hidden, s.action)
                                         : model.StepCode(pred.hidden, s.code);
    }
    ++ev.paths;
  }
  ev.policy = policy_n ? policy_ce / policy_n : 0.0;
  ev.code = code_n ? code_ce / code_n : 0.0;
  ev.value = hidden_n ? value_se / hidden_n : 0.0;
  ev.reward = hidden_n ? reward_se / hidden_n : 0.0;
  ev.code_perplexity = code_n ? std::exp(ev.code) : 0.0;
  ev.uniform_perplexity = model.joint_codes();
  return ev;
}

}  // namespace vqplan::transition
