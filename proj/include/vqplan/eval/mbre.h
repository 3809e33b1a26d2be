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


#ifndef VQPLAN_EVAL_MBRE_H_
#define VQPLAN_EVAL_MBRE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqplan/codec/codec.h"
#include "vqplan/common/rng.h"
#include "vqplan/envs/dataset.h"
#include "vqplan/numerics/checkpoint.h"
#include "vqplan/numerics/mlp.h"
#include "vqplan/numerics/optimizer.h"
#include "vqplan/numerics/param_store.h"
#include "vqplan/transition/transition.h"

namespace vqplan::eval {

// A frame is a real vector: one-hot cells for symbolic observations, or a
// per-cell probability vector for a model that predicts the mean.
using Frame = std::vector<double>;
using Rollout = std::vector<Frame>;

// Ground truths G_i with k samples each. Frames [0, prefix) are shared with
// the ground truth; frames [prefix, prefix + horizon) are scored.
struct RolloutSet {
  std::vector<Rollout> truths;
  std::vector<std::vector<Rollout>> samples;
  int prefix = 1;
  int horizon = 0;

  // Throws DimensionError on length or width mismatches and ContractError
  // when a sample does not share the prefix.
  void Validate() const;
};

// Mean over truths of the best sample's squared Euclidean error, summed over
// the scored frames (cumulative) or on the last scored frame only. Only the
// first `k` samples of each set are used when k > 0. Horizon 0 scores 0.
double Mbre(const RolloutSet& rollouts, bool cumulative, int k = 0);

// Observation window for a generated history, in the codec's layout:
// s_{t-L+1..t} and a_{t-L+1..t}; actions.size() must be t + 1.
codec::CodecInput WindowAt(std::span<const envs::Observation> observations,
                           std::span<const int> actions, int t, int context);

Rollout TruthFrames(const envs::Trajectory& trajectory, const codec::EnvShape& shape,
                    int length);

// Samples a from pi and codes from tau along the latent unroll, decoding each
// code to the argmax observation. Temperature 0 replaces sampling with
// argmax. Requires a hybrid model trained against `codec` with stride 1.
std::vector<Rollout> SampleRollouts(const codec::StateCodec& codec,
                                    const transition::TransitionModel& model,
                                    const envs::Trajectory& prefix_source, int prefix, int k,
                                    int horizon, Rng& rng, double temperature = 1.0);

struct FramePredictorConfig {
  int context = 4;
  int hidden = 128;
  int layers = 2;
  numerics::Activation activation = numerics::Activation::kTanh;

  void Validate() const;
  nlohmann::json ToJson() const;
  static FramePredictorConfig FromJson(const nlohmann::json& j);
};

// Deterministic next-frame predictor for the baseline: [context] -> per-cell
// categorical logits, trained by cross-entropy. Its frame output is the
// probability vector, i.e. the conditional mean of the one-hot frame.
class FramePredictor {
 public:
  FramePredictor(FramePredictorConfig config, codec::EnvShape shape, std::uint64_t seed);

  const FramePredictorConfig& config() const { return config_; }
  const codec::EnvShape& shape() const { return shape_; }
  numerics::ParamStore& params() { return params_; }
  const numerics::ParamStore& params() const { return params_; }
  const numerics::MlpSpec& spec() const { return spec_; }

  std::vector<double> Features(const codec::CodecInput& input) const;
  std::vector<double> Probabilities(const codec::CodecInput& input) const;

  std::string ConfigHash() const;
  void Save(numerics::Checkpoint& ckpt) const;
  static FramePredictor Load(const numerics::Checkpoint& ckpt);

 private:
  FramePredictorConfig config_;
  codec::EnvShape shape_;
  numerics::ParamStore params_;
  numerics::MlpSpec spec_;
};

struct FrameTrainOptions {
  std::int64_t steps = 2000;
  int batch = 64;
  numerics::AdamConfig adam;
  std::uint64_t seed = 1;
  int log_every = 100;
};

struct FrameLogRow {
  std::int64_t step = 0;
  double loss = 0.0;  // mean per-cell cross-entropy
};

// Resumes from params().step(); batch s draws from Rng(seed).Split(s).
std::vector<FrameLogRow> TrainFramePredictor(FramePredictor& predictor,
                                             std::span<const envs::Trajectory> data,
                                             const FrameTrainOptions& options);

// Actions from the baseline's pi along its latent unroll; each frame is the
// predictor's probability vector and its argmax observation is fed back.
std::vector<Rollout> BaselineRollouts(const FramePredictor& predictor,
                                      const transition::TransitionModel& model,
                                      const envs::Trajectory& prefix_source, int prefix, int k,
                                      int horizon, Rng& rng, double temperature = 1.0);

// One row per horizon h in [1, horizon].
struct MbreRow {
  int horizon = 0;
  double cumulative = 0.0;
  double target = 0.0;
};
std::vector<MbreRow> MbreCurve(const RolloutSet& rollouts, int k = 0);

}  // namespace vqplan::eval

#endif  // VQPLAN_EVAL_MBRE_H_
