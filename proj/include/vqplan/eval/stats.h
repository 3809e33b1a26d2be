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


#ifndef VQPLAN_EVAL_STATS_H_
#define VQPLAN_EVAL_STATS_H_

namespace vqplan::eval {

inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool Overlaps(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }
};

// Wilson score interval for k successes in n trials; n = 0 gives [0, 1].
Interval Wilson(int k, int n, double z = kZ95);

// Newcombe hybrid score interval for p1 - p2 built from the two Wilson
// intervals.
Interval DifferenceInterval(int k1, int n1, int k2, int n2, double z = kZ95);

// Pooled two-proportion z test of p1 against p2.
struct ProportionTest {
  double p1 = 0.0;
  double p2 = 0.0;
  double z = 0.0;
  double p_two_sided = 1.0;
  double p_greater = 1.0;  // H1: p1 > p2
  double p_less = 1.0;     // H1: p1 < p2
};
ProportionTest TwoProportionTest(int k1, int n1, int k2, int n2);

double NormalCdf(double x);

}  // namespace vqplan::eval

#endif  // VQPLAN_EVAL_STATS_H_
