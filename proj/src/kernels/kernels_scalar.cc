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

#include "vqplan/kernels/kernels.h"

namespace vqplan::kernels {
namespace {

double Dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void Axpy(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void GemmNt(int m, int n, int k, const double* a, const double* b,
            const double* bias, double* c) {
  for (int i = 0; i < m; ++i) {
    const double* row = a + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double v = Dot(row, b + static_cast<std::size_t>(j) * k, k);
      c[static_cast<std::size_t>(i) * n + j] = bias ? v + bias[j] : v;
    }
  }
}

void GemmNnAcc(int m, int n, int k, const double* a, const double* b,
               double* c) {
  for (int i = 0; i < m; ++i) {
    double* out = c + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double s = a[static_cast<std::size_t>(i) * n + j];
      if (s != 0.0) Axpy(k, s, b + static_cast<std::size_t>(j) * k, out);
    }
  }
}

void GemmTnAcc(int m, int n, int k, const double* a, const double* b,
               double* c) {
  for (int i = 0; i < m; ++i) {
    const double* in = b + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double s = a[static_cast<std::size_t>(i) * n + j];
      if (s != 0.0) Axpy(k, s, in, c + static_cast<std::size_t>(j) * k);
    }
  }
}

void SquaredDistances(const double* query, const double* codes, int count,
                      int dim, double* out) {
  for (int j = 0; j < count; ++j) {
    const double* e = codes + static_cast<std::size_t>(j) * dim;
    double acc = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double diff = query[d] - e[d];
      acc += diff * diff;
    }
    out[j] = acc;
  }
}

int PuctArgmax(const double* prior, const std::int32_t* visits,
               const double* value_sum, int n, double q_weight,
               double factor) {
  int best = 0;
  double best_score = 0.0;
  for (int i = 0; i < n; ++i) {
    const double visits_i = static_cast<double>(visits[i]);
    const double q = visits[i] > 0 ? value_sum[i] / visits_i : 0.0;
    const double score = q_weight * q + prior[i] * (factor / (1.0 + visits_i));
    if (i == 0 || score > best_score) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

}  // namespace

const KernelTable& ScalarKernels() {
  static const KernelTable table = {
      Isa::kScalar, "scalar",   Dot,   Axpy, GemmNt, GemmNnAcc, GemmTnAcc,
      SquaredDistances, PuctArgmax};
  return table;
}

}  // namespace vqplan::kernels
