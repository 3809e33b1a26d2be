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


#include "vqplan/mcts/model.h"

#include <utility>

namespace vqplan::mcts {

namespace {

ModelOutput Convert(transition::StepPrediction p) {
  ModelOutput out;
  out.hidden = std::move(p.hidden);
  out.policy = std::move(p.policy);
  out.code_policy = std::move(p.code_policy);
  out.value = p.value;
  out.reward = p.reward;
  return out;
}

}  // namespace

int TransitionSearchModel::num_actions() const { return model_.shape().actions; }

int TransitionSearchModel::num_codes() const {
  return model_.has_codes() ? model_.joint_codes() : 0;
}

ModelOutput TransitionSearchModel::Root(const envs::Observation& observation) const {
  return Convert(model_.Root(observation));
}

ModelOutput TransitionSearchModel::Action(std::span<const double> hidden, int action) const {
  return Convert(model_.StepAction(hidden, action));
}

ModelOutput TransitionSearchModel::Code(std::span<const double> hidden, int code) const {
  return Convert(model_.StepJointCode(hidden, code));
}

TreeShape ShapeFor(transition::PathVariant variant) {
  switch (variant) {
    case transition::PathVariant::kHybrid:
    case transition::PathVariant::kJumpy: return TreeShape::kHybrid;
    case transition::PathVariant::kPure: return TreeShape::kPure;
    case transition::PathVariant::kDeterministic: return TreeShape::kActionsOnly;
  }
  return TreeShape::kHybrid;
}

}  // namespace vqplan::mcts
