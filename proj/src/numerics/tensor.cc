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

#include "vqplan/numerics/tensor.h"

#include <cmath>

#include "vqplan/common/error.h"
#include "vqplan/numerics/param_store.h"

namespace vqplan::numerics {

std::size_t ShapeSize(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (ShapeSize(shape_) != values_.size()) {
    throw DimensionError("tensor: value count " +
                         std::to_string(values_.size()) +
                         " does not match shape");
  }
  CheckFinite(values_, "tensor construction");
}

Tensor Tensor::Zeros(std::vector<int> shape) {
  const std::size_t n = ShapeSize(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

int Tensor::rows() const {
  if (shape_.size() <= 1) return 1;
  int r = 1;
  for (std::size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
  return r;
}

std::span<double> Tensor::mutable_gradient() {
  if (!has_gradient_) {
    gradient_.assign(values_.size(), 0.0);
    has_gradient_ = true;
  }
  return gradient_;
}

void Tensor::ClearGradient() {
  gradient_.clear();
  gradient_.shrink_to_fit();
  has_gradient_ = false;
}

void CheckFinite(std::span<const double> values, std::string_view what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw ContractError("non-finite value produced by " + std::string(what));
    }
  }
}

Parameter& ParamStore::Add(std::string name, Tensor init) {
  if (index_.count(name)) {
    throw ContractError("duplicate parameter '" + name + "'");
  }
  const std::size_t n = init.size();
  index_.emplace(name, static_cast<int>(params_.size()));
  params_.push_back(Parameter{std::move(name), std::move(init),
                              std::vector<double>(n, 0.0),
                              std::vector<double>(n, 0.0)});
  return params_.back();
}

bool ParamStore::Contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

int ParamStore::IndexOf(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? -1 : it->second;
}

const Parameter& ParamStore::Get(std::string_view name) const {
  const int i = IndexOf(name);
  if (i < 0) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return params_[i];
}

Parameter& ParamStore::Get(std::string_view name) {
  const int i = IndexOf(name);
  if (i < 0) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return params_[i];
}

std::size_t ParamStore::ScalarCount() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

void ParamStore::ZeroGradients() {
  for (auto& p : params_) {
    auto g = p.tensor.mutable_gradient();
    std::fill(g.begin(), g.end(), 0.0);
  }
}

void ParamStore::ClearGradients() {
  for (auto& p : params_) p.tensor.ClearGradient();
}

}  // namespace vqplan::numerics
