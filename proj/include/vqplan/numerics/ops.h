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

#ifndef VQPLAN_NUMERICS_OPS_H_
#define VQPLAN_NUMERICS_OPS_H_

#include <span>
#include <vector>

#include "vqplan/numerics/tape.h"

namespace vqplan::numerics {

// x[B,in] * w[out,in]^T + b[1,out]. `b` may be an invalid Var (no bias).
Var Linear(Tape& tape, Var x, Var w, Var b);

Var Tanh(Tape& tape, Var x);
Var Relu(Tape& tape, Var x);

Var Add(Tape& tape, Var a, Var b);
Var Mul(Tape& tape, Var a, Var b);
Var Scale(Tape& tape, Var x, double s);
Var Sum(Tape& tape, Var x);  // 1x1
// Elementwise sum of same-shaped values.
Var AddN(Tape& tape, std::span<const Var> xs);

Var ConcatCols(Tape& tape, std::span<const Var> xs);
Var SliceCols(Tape& tape, Var x, int start, int count);
Var Reshape(Tape& tape, Var x, int rows, int cols);

// Row i of the result is row indices[i] of table[V,D].
Var Gather(Tape& tape, Var table, std::span<const int> indices);

// Sum over rows r with targets[r] >= 0 of weights[r] * -log softmax(row)[t].
// `weights` may be empty (all ones). Log-sum-exp is max-shifted.
Var SoftmaxCrossEntropy(Tape& tape, Var logits, std::span<const int> targets,
                        std::span<const double> weights = {});

// Single-row convenience form.
Var SoftmaxCrossEntropy(Tape& tape, Var logits, int target);

// Sum over rows of weights[r] * ||pred_r - target_r||^2; target has the same
// size as pred. `weights` may be empty (all ones).
Var SquaredError(Tape& tape, Var pred, std::span<const double> target,
                 std::span<const double> weights = {});

// Plain (untaped) helpers shared with inference code.
double LogSumExp(std::span<const double> logits);
void SoftmaxInPlace(std::span<double> logits);
std::vector<double> Softmax(std::span<const double> logits);

}  // namespace vqplan::numerics

#endif  // VQPLAN_NUMERICS_OPS_H_
