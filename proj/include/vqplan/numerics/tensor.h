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

#ifndef VQPLAN_NUMERICS_TENSOR_H_
#define VQPLAN_NUMERICS_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vqplan::numerics {

// Dense row-major array of doubles with an optional gradient buffer of the
// same length. Ops treat every tensor as a matrix: cols() is the last
// dimension and rows() is the product of the others.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor Zeros(std::vector<int> shape);
  static Tensor Matrix(int rows, int cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
  }

  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  int rows() const;
  int cols() const { return shape_.empty() ? 1 : shape_.back(); }

  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool has_gradient() const { return has_gradient_; }
  std::span<const double> gradient() const { return gradient_; }
  // Allocates a zero gradient on first use.
  std::span<double> mutable_gradient();
  void ClearGradient();

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
  std::vector<double> gradient_;
  bool has_gradient_ = false;
};

// Throws ContractError naming `what` if any entry is NaN or infinite.
void CheckFinite(std::span<const double> values, std::string_view what);

std::size_t ShapeSize(const std::vector<int>& shape);

}  // namespace vqplan::numerics

#endif  // VQPLAN_NUMERICS_TENSOR_H_
