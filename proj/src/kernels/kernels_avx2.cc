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

// Compiled with -mavx2 -mfma. Nothing in this file may run before the
// dispatcher has checked the CPU, so there are no static initializers with
// vector code.

#include <immintrin.h>

#include "vqplan/kernels/kernels.h"

namespace vqplan::kernels {
namespace {

inline double HorizontalSum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d sum = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(sum, _mm_unpackhi_pd(sum, sum)));
}

double Dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8),
                           _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12),
                           _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = HorizontalSum(
      _mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void Axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d s = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(s, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(s, _mm256_loadu_pd(x + i + 4),
                                     _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(s, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Four output columns at a time so each load of the `a` row is reused.
void GemmNt(int m, int n, int k, const double* a, const double* b,
            const double* bias, double* c) {
  for (int i = 0; i < m; ++i) {
    const double* row = a + static_cast<std::size_t>(i) * k;
    double* out = c + static_cast<std::size_t>(i) * n;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + static_cast<std::size_t>(j) * k;
      const double* b1 = b0 + k;
      const double* b2 = b1 + k;
      const double* b3 = b2 + k;
      __m256d s0 = _mm256_setzero_pd();
      __m256d s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd();
      __m256d s3 = _mm256_setzero_pd();
      int t = 0;
      for (; t + 4 <= k; t += 4) {
        const __m256d x = _mm256_loadu_pd(row + t);
        s0 = _mm256_fmadd_pd(x, _mm256_loadu_pd(b0 + t), s0);
        s1 = _mm256_fmadd_pd(x, _mm256_loadu_pd(b1 + t), s1);
        s2 = _mm256_fmadd_pd(x, _mm256_loadu_pd(b2 + t), s2);
        s3 = _mm256_fmadd_pd(x, _mm256_loadu_pd(b3 + t), s3);
      }
      double r0 = HorizontalSum(s0);
      double r1 = HorizontalSum(s1);
      double r2 = HorizontalSum(s2);
      double r3 = HorizontalSum(s3);
      for (; t < k; ++t) {
        r0 += row[t] * b0[t];
        r1 += row[t] * b1[t];
        r2 += row[t] * b2[t];
        r3 += row[t] * b3[t];
      }
      if (bias) {
        r0 += bias[j];
        r1 += bias[j + 1];
        r2 += bias[j + 2];
        r3 += bias[j + 3];
      }
      out[j] = r0;
      out[j + 1] = r1;
      out[j + 2] = r2;
      out[j + 3] = r3;
    }
    for (; j < n; ++j) {
      const double v = Dot(row, b + static_cast<std::size_t>(j) * k, k);
      out[j] = bias ? v + bias[j] : v;
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
    __m256d acc = _mm256_setzero_pd();
    int d = 0;
    for (; d + 4 <= dim; d += 4) {
      const __m256d diff =
          _mm256_sub_pd(_mm256_loadu_pd(query + d), _mm256_loadu_pd(e + d));
      acc = _mm256_fmadd_pd(diff, diff, acc);
    }
    double total = HorizontalSum(acc);
    for (; d < dim; ++d) {
      const double diff = query[d] - e[d];
      total += diff * diff;
    }
    out[j] = total;
  }
}

int PuctArgmax(const double* prior, const std::int32_t* visits,
               const double* value_sum, int n, double q_weight,
               double factor) {
  const __m256d qw = _mm256_set1_pd(q_weight);
  const __m256d fac = _mm256_set1_pd(factor);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  alignas(32) double scores[4];
  int best = 0;
  double best_score = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d nv = _mm256_cvtepi32_pd(
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(visits + i)));
    const __m256d visited = _mm256_cmp_pd(nv, zero, _CMP_GT_OQ);
    // 0/0 lanes are masked to zero below.
    const __m256d q =
        _mm256_and_pd(visited, _mm256_div_pd(_mm256_loadu_pd(value_sum + i), nv));
    const __m256d u = _mm256_div_pd(fac, _mm256_add_pd(one, nv));
    const __m256d score = _mm256_add_pd(
        _mm256_mul_pd(qw, q), _mm256_mul_pd(_mm256_loadu_pd(prior + i), u));
    _mm256_store_pd(scores, score);
    for (int l = 0; l < 4; ++l) {
      if (i + l == 0 || scores[l] > best_score) {
        best = i + l;
        best_score = scores[l];
      }
    }
  }
  for (; i < n; ++i) {
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

const KernelTable* Avx2KernelTableImpl() {
  static const KernelTable table = {
      Isa::kAvx2, "avx2",    Dot,   Axpy, GemmNt, GemmNnAcc, GemmTnAcc,
      SquaredDistances, PuctArgmax};
  return &table;
}

}  // namespace vqplan::kernels
