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

#ifndef VQPLAN_NUMERICS_TAPE_H_
#define VQPLAN_NUMERICS_TAPE_H_

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "vqplan/numerics/param_store.h"

namespace vqplan::numerics {

// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Records matrix-valued primitives in evaluation order so that a single
// reverse sweep computes gradients. Nodes are appended only, which keeps the
// list topologically sorted.
//
// A tape is owned by one thread. Parameter leaves point into a ParamStore
// without copying; the store is never written during the forward pass, so
// many tapes may read the same store concurrently.
class Tape {
 public:
  // Receives the tape and the id of the node being differentiated. The node's
  // output gradient is grad(self); implementations accumulate into the
  // gradients of their inputs (only those for which wants_grad() is true).
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(bool record_gradients = true)
      : record_gradients_(record_gradients) {}

  Var Constant(int rows, int cols, std::vector<double> values);
  Var Constant(const Tensor& t) {
    return Constant(t.rows(), t.cols(),
                    std::vector<double>(t.values().begin(), t.values().end()));
  }
  Var Param(const ParamStore& store, std::string_view name);
  Var Param(const ParamStore& store, int index);

  // Appends a primitive. This is also the extension point for custom-backward
  // primitives such as the straight-through estimator.
  Var Record(int rows, int cols, std::vector<double> value,
             std::vector<int> inputs, BackwardFn backward);

  int rows(Var v) const { return nodes_[v.id].rows; }
  int cols(Var v) const { return nodes_[v.id].cols; }
  std::span<const double> value(Var v) const;
  const double* data(Var v) const { return value(v).data(); }
  double scalar(Var v) const;

  bool records_gradients() const { return record_gradients_; }
  bool wants_grad(int id) const { return nodes_[id].requires_grad; }
  // Output gradient buffer of a node, allocated as zeros on first touch.
  std::span<double> grad(int id);
  // Gradient of a node after Backward(); empty if nothing flowed into it.
  std::span<const double> grad_of(Var v) const { return nodes_[v.id].grad; }

  int size() const { return static_cast<int>(nodes_.size()); }
  int last_backward_visits() const { return last_backward_visits_; }

  // Reverse sweep from a 1x1 loss. Every parameter in `params` gets a
  // gradient buffer (zero if unreachable); reached parameters receive
  // d loss / d param. Pass accumulate=true to add to existing gradients.
  void Backward(Var loss, ParamStore* params, bool accumulate = false);

 private:
  struct Node {
    int rows = 0;
    int cols = 0;
    std::vector<double> value;
    const double* external = nullptr;
    std::vector<double> grad;
    std::vector<int> inputs;
    BackwardFn backward;
    int param_index = -1;
    const ParamStore* store = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  bool record_gradients_;
  int last_backward_visits_ = 0;
};

}  // namespace vqplan::numerics

#endif  // VQPLAN_NUMERICS_TAPE_H_
