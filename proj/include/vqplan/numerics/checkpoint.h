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

#ifndef VQPLAN_NUMERICS_CHECKPOINT_H_
#define VQPLAN_NUMERICS_CHECKPOINT_H_

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vqplan/numerics/param_store.h"

namespace vqplan::numerics {

// Versioned binary container: magic, format version, a JSON metadata block
// and named little-endian double arrays in insertion order. Values
// round-trip bit-exactly.
class Checkpoint {
 public:
  static constexpr int kFormatVersion = 1;

  nlohmann::json& meta() { return meta_; }
  const nlohmann::json& meta() const { return meta_; }

  void AddArray(std::string name, std::vector<double> values);
  bool HasArray(std::string_view name) const;
  // Throws ArtifactMismatch when absent.
  const std::vector<double>& Array(std::string_view name) const;
  const std::vector<std::pair<std::string, std::vector<double>>>& arrays() const {
    return arrays_;
  }

  void Write(const std::string& path) const;
  static Checkpoint Read(const std::string& path);

 private:
  nlohmann::json meta_ = nlohmann::json::object();
  std::vector<std::pair<std::string, std::vector<double>>> arrays_;
};

// Stores values, Adam moments and the step counter of every parameter under
// "<prefix>:" keys, with names and shapes recorded in meta()["params"][prefix].
void StoreParams(Checkpoint& ckpt, const ParamStore& params,
                 const std::string& prefix);

// Restores into a store of identical structure; any difference in names or
// shapes throws ArtifactMismatch.
void LoadParams(const Checkpoint& ckpt, ParamStore& params,
                const std::string& prefix);

}  // namespace vqplan::numerics

#endif  // VQPLAN_NUMERICS_CHECKPOINT_H_
