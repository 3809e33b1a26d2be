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

#include "vqplan/numerics/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "vqplan/common/error.h"
#include "vqplan/common/rng.h"

namespace vqplan::numerics {
namespace {

double Evaluate(const ParamStore& params, const LossFn& loss_fn) {
  Tape tape(/*record_gradients=*/false);
  Var loss = loss_fn(tape, params);
  return tape.scalar(loss);
}

}  // namespace

GradCheckReport GradCheck(ParamStore& params, const LossFn& loss_fn,
                          const GradCheckOptions& options) {
  const double first = Evaluate(params, loss_fn);
  const double second = Evaluate(params, loss_fn);
  if (first != second) {
    throw ContractError("grad check: loss function is not deterministic (" +
                        std::to_string(first) + " vs " + std::to_string(second) +
                        ")");
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Var loss = loss_fn(tape, params);
    tape.Backward(loss, &params);
    for (const Parameter& p : params.parameters()) {
      analytic.emplace_back(p.tensor.gradient().begin(), p.tensor.gradient().end());
    }
    params.ClearGradients();
  }

  GradCheckReport report;
  Rng rng(options.seed);
  for (int pi = 0; pi < params.size(); ++pi) {
    Parameter& p = params.at(pi);
    const int n = static_cast<int>(p.tensor.size());
    std::vector<int> entries(n);
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries_per_param > 0 && n > options.max_entries_per_param) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_param);
      std::sort(entries.begin(), entries.end());
    }
    for (int i : entries) {
      auto values = p.tensor.mutable_values();
      const double saved = values[i];
      values[i] = saved + options.step;
      const double plus = Evaluate(params, loss_fn);
      values[i] = saved - options.step;
      const double minus = Evaluate(params, loss_fn);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[pi][i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.entries_checked;
      if (rel > report.max_relative_error || report.worst_index < 0) {
        report.max_relative_error = rel;
        report.worst_parameter = p.name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace vqplan::numerics
