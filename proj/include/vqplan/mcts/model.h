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


#ifndef VQPLAN_MCTS_MODEL_H_
#define VQPLAN_MCTS_MODEL_H_

#include "vqplan/mcts/search.h"
#include "vqplan/transition/transition.h"

namespace vqplan::mcts {

// Search view of a trained transition model. Chance keys are joint code ids.
class TransitionSearchModel : public SearchModel {
 public:
  explicit TransitionSearchModel(const transition::TransitionModel& model) : model_(model) {}

  int num_actions() const override;
  int num_codes() const override;
  ModelOutput Root(const envs::Observation& observation) const override;
  ModelOutput Action(std::span<const double> hidden, int action) const override;
  ModelOutput Code(std::span<const double> hidden, int code) const override;

 private:
  const transition::TransitionModel& model_;
};

// Tree shape matching the path layout the model was trained on.
TreeShape ShapeFor(transition::PathVariant variant);

}  // namespace vqplan::mcts

#endif  // VQPLAN_MCTS_MODEL_H_
