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


#ifndef VQPLAN_TRANSITION_TRANSITION_H_
#define VQPLAN_TRANSITION_TRANSITION_H_

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
#include "vqplan/numerics/tape.h"

namespace vqplan::transition {

// kDeterministic is the action-only baseline: no codes, no tau head.
enum class PathVariant { kHybrid, kPure, kJumpy, kDeterministic };

const char* PathVariantName(PathVariant v);
PathVariant ParsePathVariant(const std::string& name);

struct TransitionConfig {
  int unroll = 5;             // M
  double value_weight = 1.0;  // alpha
  double reward_weight = 1.0; // beta
  // Without a reward head the value targets absorb the reward of the edge
  // into each node and beta is forced to 0 (terminal-only reward).
  bool reward_head = true;
  double discount = 1.0;
  PathVariant variant = PathVariant::kHybrid;
  std::string value_target = "mc_return";
  int hidden = 64;       // width of z
  int cell_hidden = 128; // width inside g and g'
  int head_hidden = 64;  // width of f
  numerics::Activation activation = numerics::Activation::kTanh;

  void Validate() const;
  double effective_reward_weight() const { return reward_head ? reward_weight : 0.0; }
  nlohmann::json ToJson() const;
  static TransitionConfig FromJson(const nlohmann::json& j);
};

// Heads evaluated at h = f(z).
struct StepPrediction {
  std::vector<double> hidden;       // z
  std::vector<double> policy;       // over env actions
  std::vector<double> code_policy;  // over joint code ids; empty for the baseline
  double value = 0.0;
  double reward = 0.0;
};

enum class StepKind { kAction, kCode };

struct PathStep {
  StepKind kind = StepKind::kAction;
  int action = -1;
  std::vector<int> code;  // one index per book
};

// A root observation, the teacher-forced inputs and the per-hidden-state
// targets. Hidden state i is reached after steps[0..i-1]; -1 marks a masked
// policy or per-book code target.
struct PlanningPath {
  envs::Observation root;
  PathVariant variant = PathVariant::kHybrid;
  int depth = 0;  // M
  int stride = 1;
  int root_time = 0;
  int real_transitions = 0;  // env transitions covered before the episode end
  std::vector<PathStep> steps;
  std::vector<int> policy_target;
  std::vector<std::vector<int>> code_target;
  std::vector<double> value_target;
  std::vector<double> reward_target;

  int hidden_states() const { return static_cast<int>(steps.size()) + 1; }
};

// Step kinds along a path of depth M; hybrid alternates starting with an
// action, pure has one action then codes.
std::vector<StepKind> StepSchedule(PathVariant variant, int depth);

// Discounted returns G_t for t in [0, T-1], G_{T-1} = 0.
std::vector<double> MonteCarloReturns(std::span<const double> rewards, double discount);

// Pure codes join the state code tuple with the action code of the step
// that follows it: sizes are state sizes plus the action codebook.
std::vector<int> PathCodeSizes(PathVariant variant, const codec::StateCodec& codec);

struct TrajectoryCodes {
  std::vector<codec::LatentCode> state;
  std::vector<int> action;  // pure only
};
TrajectoryCodes EncodeForPaths(const codec::StateCodec& codec, PathVariant variant,
                               const envs::Trajectory& trajectory);

// Padding after the episode end draws uniform actions and codes from `rng`.
PlanningPath AssemblePath(const envs::Trajectory& trajectory, const TrajectoryCodes& codes,
                          const TransitionConfig& config, std::span<const int> code_sizes,
                          int num_actions, int root_time, Rng& rng);
std::vector<PlanningPath> AssemblePaths(const envs::Trajectory& trajectory,
                                        const TrajectoryCodes& codes,
                                        const TransitionConfig& config,
                                        std::span<const int> code_sizes, int num_actions,
                                        Rng& rng);
// Valid roots: every t < T-1 (multiples of the stride for jumpy paths).
std::vector<int> RootTimes(const envs::Trajectory& trajectory, PathVariant variant, int stride);

class TransitionModel {
 public:
  TransitionModel(TransitionConfig config, codec::EnvShape shape, std::vector<int> code_sizes,
                  std::uint64_t seed);

  const TransitionConfig& config() const { return config_; }
  const codec::EnvShape& shape() const { return shape_; }
  const std::vector<int>& code_sizes() const { return code_sizes_; }
  int joint_codes() const;
  bool has_codes() const { return config_.variant != PathVariant::kDeterministic; }
  int code_input_width() const;

  numerics::ParamStore& params() { return params_; }
  const numerics::ParamStore& params() const { return params_; }

  // Inference (no tape). Safe to call concurrently.
  std::vector<double> InitialEmbed(const envs::Observation& s) const;
  StepPrediction Predict(std::span<const double> z) const;
  StepPrediction Root(const envs::Observation& s) const;
  StepPrediction StepAction(std::span<const double> z, int action) const;
  StepPrediction StepCode(std::span<const double> z, std::span<const int> code) const;
  StepPrediction StepJointCode(std::span<const double> z, int joint) const;

  // Taped pieces used by the loss.
  numerics::Var EmbedBatch(numerics::Tape& tape, const numerics::ParamStore& params,
                           numerics::Var roots) const;
  numerics::Var StepBatch(numerics::Tape& tape, const numerics::ParamStore& params,
                          numerics::Var z, StepKind kind, numerics::Var input) const;
  struct Heads {
    numerics::Var policy_logits;
    std::vector<numerics::Var> code_logits;  // one per book
    numerics::Var value;
    numerics::Var reward;
  };
  Heads HeadsBatch(numerics::Tape& tape, const numerics::ParamStore& params,
                   numerics::Var z) const;

  std::string ConfigHash() const;

  // Records the codec fingerprints the model was trained against; an empty
  // codec pointer is only valid for the baseline.
  void Save(numerics::Checkpoint& ckpt, const codec::StateCodec* codec,
            const std::string& prefix = "transition") const;
  // Refuses a codec whose fingerprints differ from the recorded ones.
  static TransitionModel Load(const numerics::Checkpoint& ckpt, const codec::StateCodec* codec,
                              const std::string& prefix = "transition");

 private:
  std::vector<double> CodeOneHot(std::span<const int> code) const;
  std::vector<double> Advance(std::span<const double> z, const numerics::MlpSpec& cell,
                              std::span<const double> input) const;

  TransitionConfig config_;
  codec::EnvShape shape_;
  std::vector<int> code_sizes_;
  numerics::ParamStore params_;
  numerics::MlpSpec embed_;
  numerics::MlpSpec g_;
  numerics::MlpSpec g_code_;
  numerics::MlpSpec f_;
  numerics::MlpSpec policy_head_;
  std::vector<numerics::MlpSpec> code_heads_;
  numerics::MlpSpec value_head_;
  numerics::MlpSpec reward_head_;
};

struct LossTerms {
  numerics::Var total;
  numerics::Var policy;
  numerics::Var code;
  numerics::Var value;
  numerics::Var reward;
};

// (1/M) sum CE(a, pi) + (1/M) sum CE(k, tau) + (alpha/n) sum Lv + (beta/n) sum Lr,
// averaged over the batch; n is the number of steps along the path. Masked
// targets contribute nothing.
LossTerms TransitionLoss(numerics::Tape& tape, const numerics::ParamStore& params,
                         const TransitionModel& model, std::span<const PlanningPath> batch);

struct TransitionTrainOptions {
  std::int64_t steps = 4000;
  int batch = 64;
  numerics::AdamConfig adam;
  std::uint64_t seed = 1;
  int log_every = 100;
};

struct TransitionLogRow {
  std::int64_t step = 0;
  double total = 0.0;
  double policy = 0.0;
  double code = 0.0;
  double value = 0.0;
  double reward = 0.0;
};

struct TransitionReport {
  std::vector<TransitionLogRow> curve;
};

// Precomputed codes for a dataset, aligned with it.
struct EncodedDataset {
  std::vector<TrajectoryCodes> codes;
  std::vector<std::pair<int, int>> roots;  // (episode, root time)
};
EncodedDataset EncodeDataset(const codec::StateCodec* codec, const TransitionModel& model,
                             std::span<const envs::Trajectory> data);

// Requires a frozen codec for every variant except the baseline. Resumes
// from params().step() like TrainCodec.
TransitionReport TrainTransition(TransitionModel& model, const codec::StateCodec* codec,
                                 std::span<const envs::Trajectory> data,
                                 const TransitionTrainOptions& options);

struct TransitionEvaluation {
  double policy = 0.0;
  double code = 0.0;
  double value = 0.0;
  double reward = 0.0;
  double code_perplexity = 0.0;      // exp of mean joint-code CE per real target
  double uniform_perplexity = 0.0;   // joint code count
  int paths = 0;
};
TransitionEvaluation EvaluateTransition(const TransitionModel& model,
                                        const codec::StateCodec* codec,
                                        std::span<const envs::Trajectory> data,
                                        int max_paths, std::uint64_t seed);

}  // namespace vqplan::transition

#endif  // VQPLAN_TRANSITION_TRANSITION_H_
