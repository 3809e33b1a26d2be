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


#ifndef VQPLAN_COMMON_STRICT_JSON_H_
#define VQPLAN_COMMON_STRICT_JSON_H_

#include <set>
#include <string>
#include <utility>

#include "json.hpp"
#include "vqplan/common/error.h"

namespace vqplan {

// Reads typed fields from a JSON object and rejects keys nobody asked for.
// Errors are ConfigError and name the full dotted path of the field.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string path)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(Where("") + ": expected an object");
    }
  }

  bool Has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void Get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(Where(key) + ": wrong type");
    }
  }

  template <typename T>
  void Require(const std::string& key, T& out) {
    if (!j_.contains(key)) throw ConfigError(Where(key) + ": missing field");
    Get(key, out);
  }

  // Marks a nested object as consumed and returns it, or null when absent.
  const nlohmann::json* Child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  std::string Where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void Finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(Where(key) + ": unknown key");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace vqplan

#endif  // VQPLAN_COMMON_STRICT_JSON_H_
