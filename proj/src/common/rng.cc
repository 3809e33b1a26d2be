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

#include "vqplan/common/rng.h"

#include <cmath>
#include <numbers>

#include "vqplan/common/error.h"

namespace vqplan {

int Rng::UniformInt(int n) {
  VQPLAN_CHECK(n > 0, "UniformInt: n must be positive");
  // Multiply-shift on the top 32 bits; bias is below 2^-32 for small n.
  const std::uint64_t r = (*this)() >> 32;
  return static_cast<int>((r * static_cast<std::uint64_t>(n)) >> 32);
}

double Rng::Normal(double mean, double stddev) {
  // Box-Muller, one output per call so the stream position stays explicit.
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) *
                    std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::Gamma(double shape) {
  VQPLAN_CHECK(shape > 0.0, "Gamma: shape must be positive");
  if (shape < 1.0) {
    double u = Uniform();
    while (u <= 0.0) u = Uniform();
    return Gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x = Normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = Uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v;
    }
  }
}

int Rng::Categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  VQPLAN_CHECK(total > 0.0, "Categorical: weights must have positive mass");
  const double target = Uniform() * total;
  double acc = 0.0;
  int last_positive = -1;
  for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    acc += weights[i];
    if (target < acc) return i;
  }
  return last_positive;
}

std::vector<double> Rng::Dirichlet(int n, double alpha) {
  std::vector<double> out(n);
  double total = 0.0;
  for (double& x : out) {
    x = Gamma(alpha);
    total += x;
  }
  for (double& x : out) x /= total;
  return out;
}

}  // namespace vqplan
