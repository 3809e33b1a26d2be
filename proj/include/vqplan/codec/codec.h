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


#ifndef VQPLAN_CODEC_CODEC_H_
#define VQPLAN_CODEC_CODEC_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqplan/common/rng.h"
#include "vqplan/envs/dataset.h"
#include "vqplan/numerics/checkpoint.h"
#include "vqplan/numerics/mlp.h"
#include "vqplan/numerics/optimizer.h"
#include "vqplan/numerics/param_store.h"
#include "vqplan/vq/layer.h"

namespace vqplan::codec {

// Symbolic observation geometry shared by the codec and the transition model.
struct EnvShape {
  int cells = 0;
  int categories = 0;
  int actions = 0;

  int observation_width() const { return cells * categories; }
  nlohmann::json ToJson() const;
  static EnvShape FromJson(const nlohmann::json& j);
  bool operator==(const EnvShape&) const = default;
};

EnvShape ShapeOf(const envs::EnvConfig& config);

// One-hot encoding of a symbolic observation; an empty observation (start
// padding) encodes as all zeros.
void AppendOneHot(const envs::Observation& obs, const EnvShape& shape,
                  std::vector<double>& out);
std::vector<double> OneHot(const envs::Observation& obs, const EnvShape& shape);

struct CodecConfig {
  int context = 4;  // L past steps
  int books = 1;
  int codes = 16;
  int dim = 16;
  double commitment = 0.25;  // beta
  int stride = 1;
  bool factorized = false;  // second latent set for actions
  int action_codes = 16;
  int action_dim = 8;
  int hidden = 128;
  int layers = 2;
  numerics::Activation activation = numerics::Activation::kTanh;
  double decay = 0.99;
  double epsilon = 1e-5;

  void Validate() const;
  nlohmann::json ToJson() const;
  // Rejects unknown keys; absent keys keep their defaults.
  static CodecConfig FromJson(const nlohmann::json& j);
};

// A code tuple for one transition (or one stride block).
struct LatentCode {
  std::vector<int> indices;
  int stride = 1;
  bool operator==(const LatentCode&) const = default;
};

// The codec's view of time t: the L most recent observations s_{t-L+1..t}
// (empty = start padding) and the actions a_{t-L+1..t} followed by the
// remaining actions of the stride block a_{t+1..t+S-1} (-1 = padding).
struct CodecInput {
  std::vector<envs::Observation> history;
  std::vector<int> actions;
};

class StateCodec {
 public:
  StateCodec(CodecConfig config, EnvShape shape, std::uint64_t seed);

  const CodecConfig& config() const { return config_; }
  const EnvShape& shape() const { return shape_; }
  numerics::ParamStore& params() { return params_; }
  const numerics::ParamStore& params() const { return params_; }
  vq::QuantizationLayer& quantizer() { return quantizer_; }
  const vq::QuantizationLayer& quantizer() const { return quantizer_; }
  vq::QuantizationLayer& action_quantizer() { return action_quantizer_; }
  const vq::QuantizationLayer& action_quantizer() const {
    return action_quantizer_;
  }

  const numerics::MlpSpec& encoder_spec() const { return encoder_; }
  const numerics::MlpSpec& decoder_spec() const { return decoder_; }
  const numerics::MlpSpec& action_encoder_spec() const { return action_encoder_; }
  const numerics::MlpSpec& action_decoder_spec() const { return action_decoder_; }

  int context_width() const;
  int history_width() const;  // observation part of the context
  std::vector<int> code_sizes() const { return quantizer_.sizes(); }

  // Window ending at time t of `trajectory`.
  CodecInput InputAt(const envs::Trajectory& trajectory, int t) const;
  // Observation the code at time t describes: s_{min(t+S, T-1)}.
  const envs::Observation& TargetAt(const envs::Trajectory& trajectory,
                                    int t) const;
  std::vector<double> ContextFeatures(const CodecInput& input) const;
  std::vector<double> HistoryFeatures(const CodecInput& input) const;

  LatentCode EncodeStep(const CodecInput& input,
                        const envs::Observation& next) const;
  // Per-cell logits, row-major [cells, categories].
  std::vector<double> DecodeStep(const CodecInput& input,
                                 const LatentCode& code) const;
  envs::Observation DecodeArgmax(const CodecInput& input,
                                 const LatentCode& code) const;

  // ceil((T-1)/S) codes; block j covers t = j*S.
  std::vector<LatentCode> EncodeTrajectory(
      const envs::Trajectory& trajectory) const;

  // Factorized action branch.
  int EncodeAction(const CodecInput& input) const;
  std::vector<double> DecodeActionLogits(const CodecInput& input,
                                         int action_code) const;
  std::vector<int> EncodeTrajectoryActions(
      const envs::Trajectory& trajectory) const;

  // Fingerprint of configuration, shape and the trained state.
  std::string ConfigHash() const;
  std::string StateHash() const;

  void Save(numerics::Checkpoint& ckpt) const;
  static StateCodec Load(const numerics::Checkpoint& ckpt);

 private:
  void BuildSpecs();

  CodecConfig config_;
  EnvShape shape_;
  numerics::ParamStore params_;
  vq::QuantizationLayer quantizer_;
  vq::QuantizationLayer action_quantizer_;
  numerics::MlpSpec encoder_;
  numerics::MlpSpec decoder_;
  numerics::MlpSpec action_encoder_;
  numerics::MlpSpec action_decoder_;
};

struct CodecTrainOptions {
  std::int64_t steps = 3000;
  int batch = 128;
  numerics::AdamConfig adam;
  std::uint64_t seed = 1;
  int log_every = 100;
  int restart_every = 200;  // 0 disables dead-code restarts
  double restart_threshold = 0.05;
};

struct CodecLogRow {
  std::int64_t step = 0;
  double loss = 0.0;
  double reconstruction = 0.0;
  double commitment = 0.0;
  double action_reconstruction = 0.0;
  double accuracy = 0.0;  // cellwise, on the batch
};

struct CodecReport {
  std::vector<CodecLogRow> curve;
  std::vector<std::vector<double>> usage;  // per book, normalized histogram
  double usage_entropy = 0.0;              // nats, joint code over the batch stream
  int restarts = 0;
};

// The transitions (episode index, t) a codec trains on.
struct TransitionRef {
  int episode = 0;
  int t = 0;
};
std::vector<TransitionRef> CodecTransitions(
    std::span<const envs::Trajectory> data);

// Loss on one batch, shared by training and gradient checks. With
// `identity_quantizer` the decoders read the encoder outputs directly, which
// makes the loss smooth for finite-difference checks.
struct CodecBatchLoss {
  numerics::Var loss;
  numerics::Var reconstruction;
  numerics::Var commitment;
  numerics::Var action_reconstruction;
  std::vector<int> codes;
  std::vector<int> action_codes;
  std::vector<double> z;
  std::vector<double> action_z;
  double accuracy = 0.0;
};
CodecBatchLoss CodecLoss(numerics::Tape& tape, const numerics::ParamStore& params,
                         const StateCodec& codec,
                         std::span<const envs::Trajectory> data,
                         std::span<const TransitionRef> batch,
                         bool identity_quantizer = false);

// Runs optimizer steps from params().step() up to options.steps. Batch
// sampling at step s draws from Rng(seed).Split(s), so a resumed run
// continues the same stream. The codebooks are seeded from the first batch
// when training starts at step 0.
CodecReport TrainCodec(StateCodec& codec, std::span<const envs::Trajectory> data,
                       const CodecTrainOptions& options);

struct CodecEvaluation {
  double cell_accuracy = 0.0;
  double observation_accuracy = 0.0;  // every cell right
  double action_accuracy = 0.0;       // factorized codecs only
  int transitions = 0;
};
CodecEvaluation EvaluateCodec(const StateCodec& codec,
                              std::span<const envs::Trajectory> data,
                              int max_transitions = 0);

}  // namespace vqplan::codec

#endif  // VQPLAN_CODEC_CODEC_H_
