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

#ifndef VQPLAN_NUMERICS_PARAM_STORE_H_
#define VQPLAN_NUMERICS_PARAM_STORE_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vqplan/numerics/tensor.h"

namespace vqplan::numerics {

struct Parameter {
  std::string name;
  Tensor tensor;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

// Named trainable parameters in declaration order, plus optimizer state.
//
// The set of parameters is fixed once a model is built: tapes hold raw
// pointers into the value buffers, so Add() must not be called while any
// tape that references this store is alive.
class ParamStore {
 public:
  Parameter& Add(std::string name, Tensor init);

  bool Contains(std::string_view name) const;
  int IndexOf(std::string_view name) const;  // -1 when absent
  const Parameter& Get(std::string_view name) const;
  Parameter& Get(std::string_view name);
  const Parameter& at(int index) const { return params_.at(index); }
  Parameter& at(int index) { return params_.at(index); }

  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }
  int size() const { return static_cast<int>(params_.size()); }
  std::size_t ScalarCount() const;

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t step) { step_ = step; }
  void IncrementStep() { ++step_; }

  void ZeroGradients();
  void ClearGradients();

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, int> index_;
  std::int64_t step_ = 0;
};

}  // namespace vqplan::numerics

#endif  // VQPLAN_NUMERICS_PARAM_STORE_H_
