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

#include "vqplan/numerics/optimizer.h"

#include <cmath>

#include "vqplan/common/error.h"

namespace vqplan::numerics {

double ScheduledLearningRate(const AdamConfig& config, std::int64_t step) {
  return config.learning_rate *
         std::pow(config.decay_rate,
                  static_cast<double>(step) / static_cast<double>(config.decay_steps));
}

double GlobalGradientNorm(const ParamStore& params) {
  double sq = 0.0;
  for (const Parameter& p : params.parameters()) {
    if (!p.tensor.has_gradient()) continue;
    for (double g : p.tensor.gradient()) sq += g * g;
  }
  return std::sqrt(sq);
}

double ClipGradientsByGlobalNorm(ParamStore& params, double max_norm) {
  const double norm = GlobalGradientNorm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Parameter& p : params.parameters()) {
      if (!p.tensor.has_gradient()) continue;
      for (double& g : p.tensor.mutable_gradient()) g *= scale;
    }
  }
  return norm;
}

void AdamStep(ParamStore& params, double learning_rate, double beta1,
              double beta2, double epsilon) {
  for (const Parameter& p : params.parameters()) {
    if (!p.tensor.has_gradient()) {
      throw ContractError("adam: parameter '" + p.name + "' has no gradient");
    }
  }
  const double t = static_cast<double>(params.step() + 1);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (Parameter& p : params.parameters()) {
    auto g = p.tensor.gradient();
    bool all_zero = true;
    for (double v : g) {
      if (v != 0.0) {
        all_zero = false;
        break;
      }
    }
    auto x = p.tensor.mutable_values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      p.first_moment[i] = beta1 * p.first_moment[i] + (1.0 - beta1) * g[i];
      p.second_moment[i] =
          beta2 * p.second_moment[i] + (1.0 - beta2) * g[i] * g[i];
      if (all_zero) continue;
      const double m_hat = p.first_moment[i] / c1;
      const double v_hat = p.second_moment[i] / c2;
      x[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + epsilon);
    }
    CheckFinite(x, p.name);
  }
  params.IncrementStep();
  params.ClearGradients();
}

void ApplyAdam(ParamStore& params, const AdamConfig& config) {
  ClipGradientsByGlobalNorm(params, config.clip_norm);
  AdamStep(params, ScheduledLearningRate(config, params.step()), config.beta1,
           config.beta2, config.epsilon);
}

}  // namespace vqplan::numerics
