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

#ifndef VQPLAN_COMMON_ERROR_H_
#define VQPLAN_COMMON_ERROR_H_

#include <stdexcept>
#include <string>

namespace vqplan {

// Violated precondition of an operation (bad index, empty batch, ...).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Tensor shapes or widths that do not line up.
class DimensionError : public ContractError {
 public:
  explicit DimensionError(const std::string& what) : ContractError(what) {}
};

// Invalid experiment or search configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// An on-disk artifact that does not match what the consumer expects.
class ArtifactMismatch : public std::runtime_error {
 public:
  explicit ArtifactMismatch(const std::string& what)
      : std::runtime_error(what) {}
};

#define VQPLAN_CHECK(cond, msg)                                       \
  do {                                                                \
    if (!(cond)) throw ::vqplan::ContractError(std::string(msg));     \
  } while (false)

}  // namespace vqplan

#endif  // VQPLAN_COMMON_ERROR_H_
