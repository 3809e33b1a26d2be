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

#ifndef VQPLAN_NUMERICS_MLP_H_
#define VQPLAN_NUMERICS_MLP_H_

#include <span>
#include <string>
#include <vector>

#include "vqplan/common/rng.h"
#include "vqplan/numerics/param_store.h"
#include "vqplan/numerics/tape.h"

namespace vqplan::numerics {

enum class Activation { kTanh, kRelu, kLinear };

// widths = {input, hidden..., output}. Parameters are named
// "<name>/w<i>" ([out,in]) and "<name>/b<i>" ([1,out]).
struct MlpSpec {
  std::string name;
  std::vector<int> widths;
  Activation activation = Activation::kTanh;
  bool activate_output = false;

  int layers() const { return static_cast<int>(widths.size()) - 1; }
  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
};

// Glorot-uniform weights, zero biases.
void InitMlp(const MlpSpec& spec, ParamStore& store, Rng& rng);

// Throws DimensionError naming the layer on any width mismatch and
// ContractError if a layer's parameters are missing.
Var MlpForward(Tape& tape, const ParamStore& store, const MlpSpec& spec,
               Var input);

Var Activate(Tape& tape, Var x, Activation act);

// Tape-free forward pass for inference on `rows` stacked inputs. Produces the
// same values as MlpForward().
std::vector<double> MlpInfer(const ParamStore& store, const MlpSpec& spec,
                             std::span<const double> input, int rows = 1);

const char* ActivationName(Activation act);
Activation ParseActivation(const std::string& name);

}  // namespace vqplan::numerics

#endif  // VQPLAN_NUMERICS_MLP_H_
