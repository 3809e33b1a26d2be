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

#ifndef VQPLAN_NUMERICS_GRAD_CHECK_H_
#define VQPLAN_NUMERICS_GRAD_CHECK_H_

#include <cstdint>
#include <functional>
#include <string>

#include "vqplan/numerics/param_store.h"
#include "vqplan/numerics/tape.h"

namespace vqplan::numerics {

// Builds a scalar loss on the given tape from the given parameters. Must be
// a pure function of the parameter values.
using LossFn = std::function<Var(Tape&, const ParamStore&)>;

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-3;
  // Denominator floor for the relative error, so entries whose true
  // derivative is ~0 are judged on absolute error instead.
  double floor = 1e-6;
  // Entries probed per parameter; 0 probes every entry. Subsampled entries
  // are chosen by a seeded shuffle.
  int max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int entries_checked = 0;
  bool passed = false;
};

// Compares Tape::Backward against central differences. Parameter values are
// perturbed in place and restored bit-exactly. Throws ContractError if two
// evaluations at the same point differ.
GradCheckReport GradCheck(ParamStore& params, const LossFn& loss_fn,
                          const GradCheckOptions& options = {});

}  // namespace vqplan::numerics

#endif  // VQPLAN_NUMERICS_GRAD_CHECK_H_
