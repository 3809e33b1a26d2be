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


#include "vqplan/eval/stats.h"

#include <algorithm>
#include <cmath>

#include "vqplan/common/error.h"

namespace vqplan::eval {

double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

Interval Wilson(int k, int n, double z) {
  VQPLAN_CHECK(k >= 0 && n >= 0 && k <= n, "Wilson: need 0 <= k <= n");
  if (n == 0) return {0.0, 1.0};
  const double nn = n;
  const double p = k / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

Interval DifferenceInterval(int k1, int n1, int k2, int n2, double z) {
  VQPLAN_CHECK(n1 > 0 && n2 > 0, "DifferenceInterval: empty sample");
  const double p1 = static_cast<double>(k1) / n1;
  const double p2 = static_cast<double>(k2) / n2;
  const Interval a = Wilson(k1, n1, z);
  const Interval b = Wilson(k2, n2, z);
  const double d = p1 - p2;
  const double lo = d - std::sqrt((p1 - a.lo) * (p1 - a.lo) + (b.hi - p2) * (b.hi - p2));
  const double hi = d + std::sqrt((a.hi - p1) * (a.hi - p1) + (p2 - b.lo) * (p2 - b.lo));
  return {lo, hi};
}

ProportionTest TwoProportionTest(int k1, int n1, int k2, int n2) {
  VQPLAN_CHECK(n1 > 0 && n2 > 0, "TwoProportionTest: empty sample");
  ProportionTest t;
  t.p1 = static_cast<double>(k1) / n1;
  t.p2 = static_cast<double>(k2) / n2;
  const double pooled = static_cast<double>(k1 + k2) / (n1 + n2);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  if (se == 0.0) return t;  // identical degenerate samples
  t.z = (t.p1 - t.p2) / se;
  t.p_greater = 1.0 - NormalCdf(t.z);
  t.p_less = NormalCdf(t.z);
  t.p_two_sided = std::min(1.0, 2.0 * std::min(t.p_greater, t.p_less));
  return t;
}

}  // namespace vqplan::eval
