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

#ifndef VQPLAN_COMMON_RNG_H_
#define VQPLAN_COMMON_RNG_H_

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace vqplan {

// Counter-based generator: output i is a SplitMix64 hash of (key, i), so the
// full state is two integers and independent streams come from Split().
class Rng {
 public:
  using result_type = std::uint64_t;

  struct State {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;
  };

  explicit Rng(std::uint64_t seed = 0) : key_(Mix(seed ^ kSeedSalt)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return Mix(key_ + (++counter_) * kGamma); }

  // A child generator whose stream does not overlap this one.
  Rng Split(std::uint64_t stream_id) const {
    Rng child;
    child.key_ = Mix(key_ ^ Mix(stream_id * kGamma + kSplitSalt));
    child.counter_ = 0;
    return child;
  }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  int UniformInt(int n);

  double Normal(double mean = 0.0, double stddev = 1.0);
  double Gamma(double shape);

  // Index drawn proportionally to non-negative weights (sum must be > 0).
  int Categorical(std::span<const double> weights);

  std::vector<double> Dirichlet(int n, double alpha);

  State state() const { return {key_, counter_}; }
  void set_state(const State& s) {
    key_ = s.key;
    counter_ = s.counter;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSeedSalt = 0x6A09E667F3BCC909ULL;
  static constexpr std::uint64_t kSplitSalt = 0xBB67AE8584CAA73BULL;

  static std::uint64_t Mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace vqplan

#endif  // VQPLAN_COMMON_RNG_H_
