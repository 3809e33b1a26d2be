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

#ifndef VQPLAN_COMMON_HASH_H_
#define VQPLAN_COMMON_HASH_H_

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace vqplan {

// 64-bit FNV-1a. Used for config fingerprints and dataset manifests, not for
// anything adversarial.
inline std::uint64_t Fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string HashHex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

inline std::string HashHex(std::string_view bytes) {
  return HashHex(Fnv1a64(bytes));
}

}  // namespace vqplan

#endif  // VQPLAN_COMMON_HASH_H_
