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

#include "vqplan/numerics/tape.h"

#include <string>

#include "vqplan/common/error.h"

namespace vqplan::numerics {

Var Tape::Constant(int rows, int cols, std::vector<double> values) {
  if (rows <= 0 || cols <= 0 ||
      values.size() != static_cast<std::size_t>(rows) * cols) {
    throw DimensionError("tape constant: shape does not match value count");
  }
  CheckFinite(values, "tape constant");
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.value = std::move(values);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::Param(const ParamStore& store, std::string_view name) {
  const int index = store.IndexOf(name);
  if (index < 0) {
    throw ContractError("tape: unknown parameter '" + std::string(name) + "'");
  }
  return Param(store, index);
}

Var Tape::Param(const ParamStore& store, int index) {
  const Parameter& p = store.at(index);
  Node n;
  n.rows = p.tensor.rows();
  n.cols = p.tensor.cols();
  n.external = p.tensor.values().data();
  n.param_index = index;
  n.store = &store;
  n.requires_grad = record_gradients_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::Record(int rows, int cols, std::vector<double> value,
                 std::vector<int> inputs, BackwardFn backward) {
  if (value.size() != static_cast<std::size_t>(rows) * cols) {
    throw DimensionError("tape record: shape does not match value count");
  }
  CheckFinite(value, "tape primitive");
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.value = std::move(value);
  bool needs_grad = false;
  if (record_gradients_) {
    for (int in : inputs) needs_grad = needs_grad || nodes_[in].requires_grad;
  }
  n.requires_grad = needs_grad;
  if (needs_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.external != nullptr) {
    return {n.external, static_cast<std::size_t>(n.rows) * n.cols};
  }
  return n.value;
}

double Tape::scalar(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.rows != 1 || n.cols != 1) throw ContractError("tape: value is not scalar");
  return value(v)[0];
}

std::span<double> Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(static_cast<std::size_t>(n.rows) * n.cols, 0.0);
  return n.grad;
}

void Tape::Backward(Var loss, ParamStore* params, bool accumulate) {
  if (!loss.valid() || loss.id >= size()) {
    throw ContractError("backward: loss is not on this tape");
  }
  if (nodes_[loss.id].rows != 1 || nodes_[loss.id].cols != 1) {
    throw ContractError("backward: loss must be a scalar (1x1)");
  }
  if (!record_gradients_) {
    throw ContractError("backward: tape was created without gradient recording");
  }
  for (auto& n : nodes_) n.grad.clear();
  grad(loss.id)[0] = 1.0;
  last_backward_visits_ = 0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.requires_grad) continue;
    ++last_backward_visits_;
    if (n.backward) n.backward(*this, id);
  }
  if (params == nullptr) return;
  if (!accumulate) params->ZeroGradients();
  for (const Node& n : nodes_) {
    if (n.param_index < 0 || n.grad.empty()) continue;
    if (n.store != params) {
      throw ContractError("backward: parameter leaf belongs to another store");
    }
    auto g = params->at(n.param_index).tensor.mutable_gradient();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  }
  for (auto& p : params->parameters()) p.tensor.mutable_gradient();
}

}  // namespace vqplan::numerics
