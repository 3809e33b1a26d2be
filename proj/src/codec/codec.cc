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


#include "vqplan/codec/codec.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "vqplan/common/error.h"
#include "vqplan/common/hash.h"
#include "vqplan/common/strict_json.h"
#include "vqplan/numerics/ops.h"

namespace vqplan::codec {

using envs::Observation;
using envs::Trajectory;
using numerics::MlpSpec;
using numerics::Tape;
using numerics::Var;

nlohmann::json EnvShape::ToJson() const {
  return {{"cells", cells}, {"categories", categories}, {"actions", actions}};
}

EnvShape EnvShape::FromJson(const nlohmann::json& j) {
  EnvShape s;
  StrictObject o(j, "shape");
  o.Require("cells", s.cells);
  o.Require("categories", s.categories);
  o.Require("actions", s.actions);
  o.Finish();
  return s;
}

EnvShape ShapeOf(const envs::EnvConfig& config) {
  auto env = envs::MakeEnvironment(config);
  return {env->num_cells(), env->num_categories(), env->num_actions()};
}

void AppendOneHot(const Observation& obs, const EnvShape& shape,
                  std::vector<double>& out) {
  const std::size_t base = out.size();
  out.resize(base + shape.observation_width(), 0.0);
  if (obs.empty()) return;
  if (static_cast<int>(obs.size()) != shape.cells) {
    throw DimensionError("observation has " + std::to_string(obs.size()) +
                         " cells, expected " + std::to_string(shape.cells));
  }
  for (int c = 0; c < shape.cells; ++c) {
    const int v = obs[c];
    if (v < 0 || v >= shape.categories) {
      throw ContractError("observation cell " + std::to_string(c) +
                          " category out of range");
    }
    out[base + static_cast<std::size_t>(c) * shape.categories + v] = 1.0;
  }
}

std::vector<double> OneHot(const Observation& obs, const EnvShape& shape) {
  std::vector<double> out;
  AppendOneHot(obs, shape, out);
  return out;
}

namespace {

void AppendAction(int action, int actions, std::vector<double>& out) {
  const std::size_t base = out.size();
  out.resize(base + actions, 0.0);
  if (action < 0) return;
  if (action >= actions) {
    throw ContractError("action " + std::to_string(action) + " out of range");
  }
  out[base + action] = 1.0;
}

std::vector<int> Widths(int in, int hidden, int layers, int out) {
  std::vector<int> w{in};
  for (int i = 0; i < layers; ++i) w.push_back(hidden);
  w.push_back(out);
  return w;
}

Observation ArgmaxCells(std::span<const double> logits, const EnvShape& shape) {
  Observation obs(shape.cells);
  for (int c = 0; c < shape.cells; ++c) {
    auto row = logits.subspan(static_cast<std::size_t>(c) * shape.categories,
                              shape.categories);
    obs[c] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return obs;
}

std::uint64_t HashDoubles(std::span<const double> v, std::uint64_t h) {
  return Fnv1a64(std::string_view(reinterpret_cast<const char*>(v.data()),
                                  v.size() * sizeof(double)),
                 h);
}

}  // namespace

void CodecConfig::Validate() const {
  if (context < 1) throw ConfigError("codec.context: must be >= 1");
  if (stride < 1) throw ConfigError("codec.stride: must be >= 1");
  if (books < 1) throw ConfigError("codec.books: must be >= 1");
  if (codes < 2) throw ConfigError("codec.codes: must be >= 2");
  if (dim < 1) throw ConfigError("codec.dim: must be >= 1");
  if (commitment < 0) throw ConfigError("codec.commitment: must be >= 0");
  if (factorized && (action_codes < 2 || action_dim < 1)) {
    throw ConfigError("codec.action_codes: must be >= 2");
  }
  if (hidden < 1 || layers < 0) throw ConfigError("codec.hidden: must be positive");
  if (!(decay > 0 && decay < 1)) throw ConfigError("codec.decay: must be in (0,1)");
  if (!(epsilon >= 0)) throw ConfigError("codec.epsilon: must be >= 0");
}

nlohmann::json CodecConfig::ToJson() const {
  return {{"context", context},
          {"books", books},
          {"codes", codes},
          {"dim", dim},
          {"commitment", commitment},
          {"stride", stride},
          {"factorized", factorized},
          {"action_codes", action_codes},
          {"action_dim", action_dim},
          {"hidden", hidden},
          {"layers", layers},
          {"activation", numerics::ActivationName(activation)},
          {"decay", decay},
          {"epsilon", epsilon}};
}

CodecConfig CodecConfig::FromJson(const nlohmann::json& j) {
  CodecConfig c;
  StrictObject o(j, "codec");
  o.Get("context", c.context);
  o.Get("books", c.books);
  o.Get("codes", c.codes);
  o.Get("dim", c.dim);
  o.Get("commitment", c.commitment);
  o.Get("stride", c.stride);
  o.Get("factorized", c.factorized);
  o.Get("action_codes", c.action_codes);
  o.Get("action_dim", c.action_dim);
  o.Get("hidden", c.hidden);
  o.Get("layers", c.layers);
  std::string act = numerics::ActivationName(c.activation);
  o.Get("activation", act);
  c.activation = numerics::ParseActivation(act);
  o.Get("decay", c.decay);
  o.Get("epsilon", c.epsilon);
  o.Finish();
  c.Validate();
  return c;
}

StateCodec::StateCodec(CodecConfig config, EnvShape shape, std::uint64_t seed)
    : config_(std::move(config)), shape_(shape) {
  config_.Validate();
  if (shape_.cells < 1 || shape_.categories < 2 || shape_.actions < 1) {
    throw ContractError("codec: invalid environment shape");
  }
  quantizer_ = vq::QuantizationLayer(config_.books, config_.codes, config_.dim,
                                     config_.decay, config_.epsilon);
  if (config_.factorized) {
    action_quantizer_ = vq::QuantizationLayer(1, config_.action_codes, config_.action_dim,
                                              config_.decay, config_.epsilon);
  }
  BuildSpecs();
  Rng rng = Rng(seed).Split(0xC0DEC);
  numerics::InitMlp(encoder_, params_, rng);
  numerics::InitMlp(decoder_, params_, rng);
  if (config_.factorized) {
    numerics::InitMlp(action_encoder_, params_, rng);
    numerics::InitMlp(action_decoder_, params_, rng);
  }
}

void StateCodec::BuildSpecs() {
  const int ctx = context_width();
  const int ow = shape_.observation_width();
  const int zw = config_.books * config_.dim;
  encoder_ = {"codec/enc", Widths(ctx + ow, config_.hidden, config_.layers, zw),
              config_.activation, false};
  decoder_ = {"codec/dec", Widths(ctx + zw, config_.hidden, config_.layers, ow),
              config_.activation, false};
  const int hw = history_width();
  action_encoder_ = {"codec/act_enc",
                     Widths(hw + shape_.actions, config_.hidden, 1, config_.action_dim),
                     config_.activation, false};
  action_decoder_ = {"codec/act_dec",
                     Widths(hw + config_.action_dim, config_.hidden, 1, shape_.actions),
                     config_.activation, false};
}

int StateCodec::history_width() const {
  return config_.context * shape_.observation_width();
}

int StateCodec::context_width() const {
  return history_width() + (config_.context + config_.stride - 1) * shape_.actions;
}

CodecInput StateCodec::InputAt(const Trajectory& trajectory, int t) const {
  const int T = trajectory.length();
  if (t < 0 || t >= T) throw ContractError("codec: time index out of range");
  const int L = config_.context;
  CodecInput in;
  in.history.resize(L);
  for (int i = 0; i < L; ++i) {
    const int tau = t - L + 1 + i;
    if (tau >= 0) in.history[i] = trajectory.observations[tau];
  }
  const int na = L + config_.stride - 1;
  in.actions.assign(na, -1);
  for (int i = 0; i < na; ++i) {
    const int tau = t - L + 1 + i;
    if (tau >= 0 && tau < T - 1) in.actions[i] = trajectory.actions[tau];
  }
  return in;
}

const Observation& StateCodec::TargetAt(const Trajectory& trajectory, int t) const {
  const int T = trajectory.length();
  return trajectory.observations[std::min(t + config_.stride, T - 1)];
}

std::vector<double> StateCodec::HistoryFeatures(const CodecInput& input) const {
  if (static_cast<int>(input.history.size()) != config_.context) {
    throw DimensionError("codec: history length " + std::to_string(input.history.size()) +
                         ", expected " + std::to_string(config_.context));
  }
  std::vector<double> f;
  f.reserve(context_width());
  for (const auto& obs : input.history) AppendOneHot(obs, shape_, f);
  return f;
}

std::vector<double> StateCodec::ContextFeatures(const CodecInput& input) const {
  std::vector<double> f = HistoryFeatures(input);
  const int na = config_.context + config_.stride - 1;
  if (static_cast<int>(input.actions.size()) != na) {
    throw DimensionError("codec: action window " + std::to_string(input.actions.size()) +
                         ", expected " + std::to_string(na));
  }
  for (int a : input.actions) AppendAction(a, shape_.actions, f);
  return f;
}

LatentCode StateCodec::EncodeStep(const CodecInput& input, const Observation& next) const {
  if (static_cast<int>(next.size()) != shape_.cells) {
    throw DimensionError("codec: next observation width mismatch");
  }
  std::vector<double> x = ContextFeatures(input);
  AppendOneHot(next, shape_, x);
  std::vector<double> z = numerics::MlpInfer(params_, encoder_, x);
  return {quantizer_.Encode(z), config_.stride};
}

std::vector<double> StateCodec::DecodeStep(const CodecInput& input,
                                           const LatentCode& code) const {
  std::vector<double> x = ContextFeatures(input);
  std::vector<double> e = quantizer_.Lookup(code.indices);
  x.insert(x.end(), e.begin(), e.end());
  return numerics::MlpInfer(params_, decoder_, x);
}

Observation StateCodec::DecodeArgmax(const CodecInput& input, const LatentCode& code) const {
  return ArgmaxCells(DecodeStep(input, code), shape_);
}

std::vector<LatentCode> StateCodec::EncodeTrajectory(const Trajectory& trajectory) const {
  const int T = trajectory.length();
  if (T < 2) throw ContractError("codec: trajectory needs at least two observations");
  std::vector<LatentCode> codes;
  for (int t = 0; t < T - 1; t += config_.stride) {
    codes.push_back(EncodeStep(InputAt(trajectory, t), TargetAt(trajectory, t)));
  }
  return codes;
}

int StateCodec::EncodeAction(const CodecInput& input) const {
  if (!config_.factorized) throw ContractError("codec: not factorized");
  const int a = input.actions[config_.context - 1];
  if (a < 0) throw ContractError("codec: no action at the window end");
  std::vector<double> x = HistoryFeatures(input);
  AppendAction(a, shape_.actions, x);
  std::vector<double> z = numerics::MlpInfer(params_, action_encoder_, x);
  return action_quantizer_.Encode(z)[0];
}

std::vector<double> StateCodec::DecodeActionLogits(const CodecInput& input,
                                                   int action_code) const {
  if (!config_.factorized) throw ContractError("codec: not factorized");
  std::vector<double> x = HistoryFeatures(input);
  const int c = action_code;
  std::vector<double> e = action_quantizer_.Lookup(std::span<const int>(&c, 1));
  x.insert(x.end(), e.begin(), e.end());
  return numerics::MlpInfer(params_, action_decoder_, x);
}

std::vector<int> StateCodec::EncodeTrajectoryActions(const Trajectory& trajectory) const {
  std::vector<int> codes;
  for (int t = 0; t + 1 < trajectory.length(); t += config_.stride) {
    codes.push_back(EncodeAction(InputAt(trajectory, t)));
  }
  return codes;
}

std::string StateCodec::ConfigHash() const {
  nlohmann::json j = {{"codec", config_.ToJson()}, {"shape", shape_.ToJson()}};
  return HashHex(j.dump());
}

std::string StateCodec::StateHash() const {
  std::uint64_t h = Fnv1a64(ConfigHash());
  for (const auto& p : params_.parameters()) h = HashDoubles(p.tensor.values(), h);
  for (const auto& b : quantizer_.books()) h = HashDoubles(b.embeddings(), h);
  if (config_.factorized) {
    for (const auto& b : action_quantizer_.books()) h = HashDoubles(b.embeddings(), h);
  }
  return HashHex(h);
}

void StateCodec::Save(numerics::Checkpoint& ckpt) const {
  ckpt.meta()["codec"] = {{"config", config_.ToJson()},
                          {"shape", shape_.ToJson()},
                          {"config_hash", ConfigHash()},
                          {"state_hash", StateHash()}};
  numerics::StoreParams(ckpt, params_, "codec");
  vq::StoreCodebooks(ckpt, quantizer_.books(), "codec.state");
  if (config_.factorized) {
    vq::StoreCodebooks(ckpt, action_quantizer_.books(), "codec.action");
  }
}

StateCodec StateCodec::Load(const numerics::Checkpoint& ckpt) {
  const auto& meta = ckpt.meta();
  if (!meta.contains("codec")) throw ArtifactMismatch("checkpoint holds no codec");
  const auto& m = meta["codec"];
  StateCodec codec(CodecConfig::FromJson(m.at("config")), EnvShape::FromJson(m.at("shape")),
                   0);
  numerics::LoadParams(ckpt, codec.params_, "codec");
  vq::LoadCodebooks(ckpt, codec.quantizer_.books(), "codec.state");
  if (codec.config_.factorized) {
    vq::LoadCodebooks(ckpt, codec.action_quantizer_.books(), "codec.action");
  }
  if (m.at("config_hash").get<std::string>() != codec.ConfigHash() ||
      m.at("state_hash").get<std::string>() != codec.StateHash()) {
    throw ArtifactMismatch("codec checkpoint fingerprint does not match its contents");
  }
  return codec;
}

std::vector<TransitionRef> CodecTransitions(std::span<const Trajectory> data) {
  std::vector<TransitionRef> refs;
  for (int e = 0; e < static_cast<int>(data.size()); ++e) {
    for (int t = 0; t + 1 < data[e].length(); ++t) refs.push_back({e, t});
  }
  return refs;
}

CodecBatchLoss CodecLoss(Tape& tape, const numerics::ParamStore& params,
                         const StateCodec& codec, std::span<const Trajectory> data,
                         std::span<const TransitionRef> batch, bool identity_quantizer) {
  if (batch.empty()) throw ContractError("codec loss: empty batch");
  const EnvShape& shape = codec.shape();
  const CodecConfig& cfg = codec.config();
  const int B = static_cast<int>(batch.size());
  const int cw = codec.context_width();
  const int ow = shape.observation_width();
  std::vector<double> ctx, enc_in, hist, act_in;
  std::vector<int> targets;
  std::vector<int> action_targets;
  ctx.reserve(static_cast<std::size_t>(B) * cw);
  for (const auto& ref : batch) {
    const Trajectory& tr = data[ref.episode];
    CodecInput in = codec.InputAt(tr, ref.t);
    std::vector<double> c = codec.ContextFeatures(in);
    ctx.insert(ctx.end(), c.begin(), c.end());
    enc_in.insert(enc_in.end(), c.begin(), c.end());
    const Observation& next = codec.TargetAt(tr, ref.t);
    AppendOneHot(next, shape, enc_in);
    targets.insert(targets.end(), next.begin(), next.end());
    if (cfg.factorized) {
      std::vector<double> h = codec.HistoryFeatures(in);
      hist.insert(hist.end(), h.begin(), h.end());
      act_in.insert(act_in.end(), h.begin(), h.end());
      const int a = tr.actions[ref.t];
      AppendAction(a, shape.actions, act_in);
      action_targets.push_back(a);
    }
  }
  const double inv_b = 1.0 / B;
  CodecBatchLoss out;
  Var x_enc = tape.Constant(B, cw + ow, std::move(enc_in));
  Var z = numerics::MlpForward(tape, params, codec.encoder_spec(), x_enc);
  auto zv = tape.value(z);
  out.z.assign(zv.begin(), zv.end());
  vq::QuantizedBatch q = codec.quantizer().Forward(tape, z);
  out.codes = q.codes;
  Var x_ctx = tape.Constant(B, cw, std::move(ctx));
  Var dec_parts[2] = {x_ctx, identity_quantizer ? z : q.output};
  Var logits = numerics::MlpForward(tape, params, codec.decoder_spec(),
                                    numerics::ConcatCols(tape, dec_parts));
  Var cell_logits = numerics::Reshape(tape, logits, B * shape.cells, shape.categories);
  std::vector<double> w(static_cast<std::size_t>(B) * shape.cells, inv_b);
  out.reconstruction = numerics::SoftmaxCrossEntropy(tape, cell_logits, targets, w);
  out.commitment = numerics::Scale(tape, q.commitment, inv_b);
  std::vector<Var> terms = {out.reconstruction,
                            numerics::Scale(tape, out.commitment, cfg.commitment)};
  {
    auto lv = tape.value(cell_logits);
    int right = 0;
    for (int r = 0; r < B * shape.cells; ++r) {
      auto row = lv.subspan(static_cast<std::size_t>(r) * shape.categories, shape.categories);
      const int best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      right += best == targets[r];
    }
    out.accuracy = static_cast<double>(right) / (B * shape.cells);
  }
  if (cfg.factorized) {
    const int hw = codec.history_width();
    Var xa = tape.Constant(B, hw + shape.actions, std::move(act_in));
    Var za = numerics::MlpForward(tape, params, codec.action_encoder_spec(), xa);
    auto zav = tape.value(za);
    out.action_z.assign(zav.begin(), zav.end());
    vq::QuantizedBatch qa = codec.action_quantizer().Forward(tape, za);
    out.action_codes = qa.codes;
    Var xh = tape.Constant(B, hw, std::move(hist));
    Var parts[2] = {xh, identity_quantizer ? za : qa.output};
    Var alogits = numerics::MlpForward(tape, params, codec.action_decoder_spec(),
                                       numerics::ConcatCols(tape, parts));
    std::vector<double> wa(B, inv_b);
    out.action_reconstruction =
        numerics::SoftmaxCrossEntropy(tape, alogits, action_targets, wa);
    terms.push_back(out.action_reconstruction);
    terms.push_back(numerics::Scale(tape, qa.commitment, cfg.commitment * inv_b));
  }
  out.loss = numerics::AddN(tape, terms);
  return out;
}

namespace {

std::vector<TransitionRef> SampleBatch(std::span<const TransitionRef> refs, int batch,
                                       Rng& rng) {
  std::vector<TransitionRef> out(batch);
  for (auto& r : out) r = refs[rng.UniformInt(static_cast<int>(refs.size()))];
  return out;
}

}  // namespace

CodecReport TrainCodec(StateCodec& codec, std::span<const Trajectory> data,
                       const CodecTrainOptions& options) {
  std::vector<TransitionRef> refs = CodecTransitions(data);
  if (refs.empty()) throw ContractError("train codec: empty dataset");
  if (options.batch < 1) throw ConfigError("train.batch: must be >= 1");
  CodecReport report;
  const Rng base(options.seed);
  numerics::ParamStore& params = codec.params();
  if (params.step() == 0) {
    Rng rng = base.Split(0xF00D);
    auto batch = SampleBatch(refs, std::max(options.batch, 4 * codec.config().codes), rng);
    Tape tape(false);
    CodecBatchLoss l = CodecLoss(tape, params, codec, data, batch);
    codec.quantizer().InitFromBatch(l.z, rng);
    if (codec.config().factorized) codec.action_quantizer().InitFromBatch(l.action_z, rng);
  }
  while (params.step() < options.steps) {
    const std::int64_t step = params.step();
    Rng rng = base.Split(static_cast<std::uint64_t>(step));
    auto batch = SampleBatch(refs, options.batch, rng);
    Tape tape;
    CodecBatchLoss l = CodecLoss(tape, params, codec, data, batch);
    tape.Backward(l.loss, &params);
    numerics::ApplyAdam(params, options.adam);
    codec.quantizer().EmaUpdate(l.z, l.codes);
    if (codec.config().factorized) codec.action_quantizer().EmaUpdate(l.action_z, l.action_codes);
    if (options.restart_every > 0 && (step + 1) % options.restart_every == 0) {
      report.restarts += codec.quantizer().DeadCodeRestart(l.z, options.restart_threshold, rng);
      if (codec.config().factorized) {
        report.restarts +=
            codec.action_quantizer().DeadCodeRestart(l.action_z, options.restart_threshold, rng);
      }
    }
    const std::int64_t done = step + 1;
    if (step == 0 || done % std::max(options.log_every, 1) == 0 || done == options.steps) {
      CodecLogRow row;
      row.step = done;
      row.loss = tape.scalar(l.loss);
      row.reconstruction = tape.scalar(l.reconstruction);
      row.commitment = tape.scalar(l.commitment);
      row.action_reconstruction =
          codec.config().factorized ? tape.scalar(l.action_reconstruction) : 0.0;
      row.accuracy = l.accuracy;
      report.curve.push_back(row);
    }
  }
  // Usage over a fixed probe of transitions.
  Rng probe_rng = base.Split(0xAB5E);
  auto probe = SampleBatch(refs, std::min<int>(4096, static_cast<int>(refs.size()) * 4), probe_rng);
  const auto sizes = codec.code_sizes();
  report.usage.assign(sizes.size(), {});
  for (std::size_t b = 0; b < sizes.size(); ++b) report.usage[b].assign(sizes[b], 0.0);
  std::map<int, double> joint;
  for (const auto& ref : probe) {
    LatentCode c = codec.EncodeStep(codec.InputAt(data[ref.episode], ref.t),
                                    codec.TargetAt(data[ref.episode], ref.t));
    for (std::size_t b = 0; b < sizes.size(); ++b) report.usage[b][c.indices[b]] += 1.0;
    joint[vq::JointIndex(c.indices, sizes)] += 1.0;
  }
  for (auto& u : report.usage) {
    for (double& v : u) v /= static_cast<double>(probe.size());
  }
  for (const auto& [k, n] : joint) {
    const double p = n / static_cast<double>(probe.size());
    report.usage_entropy -= p * std::log(p);
  }
  return report;
}

CodecEvaluation EvaluateCodec(const StateCodec& codec, std::span<const Trajectory> data,
                              int max_transitions) {
  CodecEvaluation ev;
  long right_cells = 0;
  long total_cells = 0;
  long right_obs = 0;
  long right_actions = 0;
  for (const auto& tr : data) {
    for (int t = 0; t + 1 < tr.length(); ++t) {
      if (max_transitions > 0 && ev.transitions >= max_transitions) break;
      CodecInput in = codec.InputAt(tr, t);
      const Observation& next = codec.TargetAt(tr, t);
      Observation rec = codec.DecodeArgmax(in, codec.EncodeStep(in, next));
      int ok = 0;
      for (std::size_t c = 0; c < next.size(); ++c) ok += rec[c] == next[c];
      right_cells += ok;
      total_cells += static_cast<long>(next.size());
      right_obs += ok == static_cast<int>(next.size());
      if (codec.config().factorized) {
        auto logits = codec.DecodeActionLogits(in, codec.EncodeAction(in));
        const int a = static_cast<int>(std::max_element(logits.begin(), logits.end()) -
                                       logits.begin());
        right_actions += a == tr.actions[t];
      }
      ++ev.transitions;
    }
  }
  if (ev.transitions > 0) {
    ev.cell_accuracy = static_cast<double>(right_cells) / static_cast<double>(total_cells);
    ev.observation_accuracy = static_cast<double>(right_obs) / ev.transitions;
    ev.action_accuracy = static_cast<double>(right_actions) / ev.transitions;
  }
  return ev;
}

}  // namespace vqplan::codec
