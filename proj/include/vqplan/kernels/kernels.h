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

#ifndef VQPLAN_KERNELS_KERNELS_H_
#define VQPLAN_KERNELS_KERNELS_H_

// Dense inner loops used by the numerics engine, the codebook lookup and the
// tree-search selection rule. Each kernel has a scalar reference version and
// an AVX2/FMA version; the active table is chosen once at runtime.
//
// Matrices are row-major and densely packed.

#include <cstddef>
#include <cstdint>

namespace vqplan::kernels {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);

  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);

  // c[m,n] = a[m,k] * b[n,k]^T + bias[n]; bias may be null. Overwrites c.
  void (*gemm_nt)(int m, int n, int k, const double* a, const double* b,
                  const double* bias, double* c);

  // c[m,k] += a[m,n] * b[n,k]
  void (*gemm_nn_acc)(int m, int n, int k, const double* a, const double* b,
                      double* c);

  // c[n,k] += a[m,n]^T * b[m,k]
  void (*gemm_tn_acc)(int m, int n, int k, const double* a, const double* b,
                      double* c);

  // out[j] = ||query - codes[j]||^2 for each of `count` rows of width `dim`.
  void (*squared_distances)(const double* query, const double* codes,
                            int count, int dim, double* out);

  // argmax_i  q_weight * Q_i + prior_i * factor / (1 + N_i)
  // with Q_i = value_sum_i / N_i when N_i > 0 and 0 otherwise. Returns the
  // lowest index among exact ties. Both versions evaluate the score with the
  // same IEEE operation sequence (no fused multiply-add), so they agree
  // bit-for-bit.
  int (*puct_argmax)(const double* prior, const std::int32_t* visits,
                     const double* value_sum, int n, double q_weight,
                     double factor);
};

const KernelTable& ScalarKernels();

// Null when the AVX2 translation unit was not built for this target.
const KernelTable* Avx2Kernels();

bool CpuSupports(Isa isa);

// Table used by the rest of the library. Defaults to AVX2 when the CPU has
// it, unless the environment variable VQPLAN_KERNELS is set to "scalar".
const KernelTable& Active();

// Forces a table; throws if the CPU lacks the instruction set. Not meant to
// be called while other threads are running kernels.
void SetActive(Isa isa);

}  // namespace vqplan::kernels

#endif  // VQPLAN_KERNELS_KERNELS_H_
