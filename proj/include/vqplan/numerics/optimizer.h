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

#ifndef VQPLAN_NUMERICS_OPTIMIZER_H_
#define VQPLAN_NUMERICS_OPTIMIZER_H_

#include <cstdint>

#include "vqplan/numerics/param_store.h"

namespace vqplan::numerics {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay_rate = 0.9;
  std::int64_t decay_steps = 100000;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

// lr0 * decay_rate^(step / decay_steps), continuous exponent.
double ScheduledLearningRate(const AdamConfig& config, std::int64_t step);

double GlobalGradientNorm(const ParamStore& params);

// Scales all gradients so their global L2 norm is at most max_norm. Returns
// the norm before clipping.
double ClipGradientsByGlobalNorm(ParamStore& params, double max_norm);

// One bias-corrected Adam update at the store's current step. Every
// parameter must carry a gradient. A parameter whose whole gradient is zero
// keeps its values; its moments still decay. Increments the step counter and
// clears gradients.
void AdamStep(ParamStore& params, double learning_rate, double beta1,
              double beta2, double epsilon);

// Clip, schedule and step.
void ApplyAdam(ParamStore& params, const AdamConfig& config);

}  // namespace vqplan::numerics

#endif  // VQPLAN_NUMERICS_OPTIMIZER_H_
