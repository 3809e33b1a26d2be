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

#ifndef VQPLAN_VQ_LAYER_H_
#define VQPLAN_VQ_LAYER_H_

#include <span>
#include <vector>

#include "vqplan/common/rng.h"
#include "vqplan/numerics/tape.h"
#include "vqplan/vq/codebook.h"

namespace vqplan::vq {

// Forward value is `quantized`; the backward pass hands the output gradient
// to `z_u` unchanged and nothing to `quantized`.
numerics::Var StraightThrough(numerics::Tape& tape, numerics::Var quantized,
                              numerics::Var z_u);

struct QuantizedBatch {
  numerics::Var output;      // [B, C*D], straight-through
  numerics::Var commitment;  // 1x1, sum over rows and books of ||z_u - sg(e)||^2
  std::vector<int> codes;    // [B, C] row-major
};

// C independent codebooks over consecutive D-wide slices of the input; the
// joint code is the tuple of per-book indices.
class QuantizationLayer {
 public:
  QuantizationLayer() = default;
  QuantizationLayer(int num_books, int num_codes, int dim, double decay = 0.99,
                    double epsilon = 1e-5);

  int num_books() const { return static_cast<int>(books_.size()); }
  int dim() const { return books_.front().dim(); }
  int width() const { return num_books() * dim(); }
  std::vector<int> sizes() const;
  int joint_cardinality() const { return JointCardinality(sizes()); }

  std::vector<Codebook>& books() { return books_; }
  const std::vector<Codebook>& books() const { return books_; }

  // Codes for one input row of width C*D.
  std::vector<int> Encode(std::span<const double> z) const;
  // Concatenated embeddings for a code tuple; throws on invalid indices.
  std::vector<double> Lookup(std::span<const int> codes) const;

  QuantizedBatch Forward(numerics::Tape& tape, numerics::Var z) const;

  // `z` is [B, C*D] and `codes` [B, C] as returned by Forward().
  void EmaUpdate(std::span<const double> z, std::span<const int> codes);
  void InitFromBatch(std::span<const double> z, Rng& rng);
  int DeadCodeRestart(std::span<const double> z, double threshold, Rng& rng);

 private:
  std::vector<double> BookSlice(std::span<const double> z, int book) const;
  std::vector<Codebook> books_;
};

}  // namespace vqplan::vq

#endif  // VQPLAN_VQ_LAYER_H_
