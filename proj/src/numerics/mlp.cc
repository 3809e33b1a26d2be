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

#include "vqplan/numerics/mlp.h"

#include <algorithm>
#include <cmath>

#include "vqplan/common/error.h"
#include "vqplan/kernels/kernels.h"
#include "vqplan/numerics/ops.h"

namespace vqplan::numerics {
namespace {

std::string WeightName(const MlpSpec& spec, int i) {
  return spec.name + "/w" + std::to_string(i);
}
std::string BiasName(const MlpSpec& spec, int i) {
  return spec.name + "/b" + std::to_string(i);
}

}  // namespace

void InitMlp(const MlpSpec& spec, ParamStore& store, Rng& rng) {
  if (spec.widths.size() < 2) {
    throw ContractError("mlp '" + spec.name + "': needs at least two widths");
  }
  for (int i = 0; i < spec.layers(); ++i) {
    const int in = spec.widths[i];
    const int out = spec.widths[i + 1];
    if (in <= 0 || out <= 0) {
      throw ContractError("mlp '" + spec.name + "': widths must be positive");
    }
    const double limit = std::sqrt(6.0 / (in + out));
    std::vector<double> w(static_cast<std::size_t>(in) * out);
    for (double& v : w) v = (2.0 * rng.Uniform() - 1.0) * limit;
    store.Add(WeightName(spec, i), Tensor::Matrix(out, in, std::move(w)));
    store.Add(BiasName(spec, i), Tensor::Zeros({1, out}));
  }
}

Var Activate(Tape& tape, Var x, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return Tanh(tape, x);
    case Activation::kRelu:
      return Relu(tape, x);
    case Activation::kLinear:
      return x;
  }
  return x;
}

Var MlpForward(Tape& tape, const ParamStore& store, const MlpSpec& spec,
               Var input) {
  Var h = input;
  for (int i = 0; i < spec.layers(); ++i) {
    const std::string wname = WeightName(spec, i);
    const std::string bname = BiasName(spec, i);
    if (!store.Contains(wname) || !store.Contains(bname)) {
      throw ContractError("mlp '" + spec.name + "' layer " + std::to_string(i) +
                          ": missing parameters");
    }
    const Tensor& w = store.Get(wname).tensor;
    if (w.rows() != spec.widths[i + 1] || w.cols() != spec.widths[i]) {
      throw DimensionError("mlp '" + spec.name + "' layer " +
                           std::to_string(i) + ": weight shape disagrees with spec");
    }
    if (tape.cols(h) != spec.widths[i]) {
      throw DimensionError("mlp '" + spec.name + "' layer " + std::to_string(i) +
                           ": input width " + std::to_string(tape.cols(h)) +
                           ", expected " + std::to_string(spec.widths[i]));
    }
    h = Linear(tape, h, tape.Param(store, wname), tape.Param(store, bname));
    if (i + 1 < spec.layers() || spec.activate_output) {
      h = Activate(tape, h, spec.activation);
    }
  }
  return h;
}

std::vector<double> MlpInfer(const ParamStore& store, const MlpSpec& spec,
                             std::span<const double> input, int rows) {
  if (input.size() != static_cast<std::size_t>(rows) * spec.input_width()) {
    throw DimensionError("mlp '" + spec.name + "' layer 0: input width " +
                         std::to_string(input.size() / std::max(rows, 1)) +
                         ", expected " + std::to_string(spec.input_width()));
  }
  const kernels::KernelTable& k = kernels::Active();
  std::vector<double> x(input.begin(), input.end());
  std::vector<double> y;
  for (int i = 0; i < spec.layers(); ++i) {
    const int in = spec.widths[i];
    const int out = spec.widths[i + 1];
    const int wi = store.IndexOf(WeightName(spec, i));
    const int bi = store.IndexOf(BiasName(spec, i));
    if (wi < 0 || bi < 0) {
      throw ContractError("mlp '" + spec.name + "' layer " + std::to_string(i) +
                          ": missing parameters");
    }
    const Tensor& w = store.at(wi).tensor;
    if (w.rows() != out || w.cols() != in) {
      throw DimensionError("mlp '" + spec.name + "' layer " +
                           std::to_string(i) + ": weight shape disagrees with spec");
    }
    y.assign(static_cast<std::size_t>(rows) * out, 0.0);
    k.gemm_nt(rows, out, in, x.data(), w.values().data(),
              store.at(bi).tensor.values().data(), y.data());
    if (i + 1 < spec.layers() || spec.activate_output) {
      switch (spec.activation) {
        case Activation::kTanh:
          for (double& v : y) v = std::tanh(v);
          break;
        case Activation::kRelu:
          for (double& v : y) v = v > 0.0 ? v : 0.0;
          break;
        case Activation::kLinear:
          break;
      }
    }
    x.swap(y);
  }
  return x;
}

const char* ActivationName(Activation act) {
  switch (act) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
    case Activation::kLinear:
      return "linear";
  }
  return "?";
}

Activation ParseActivation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "linear") return Activation::kLinear;
  throw ConfigError("unknown activation '" + name + "'");
}

}  // namespace vqplan::numerics
