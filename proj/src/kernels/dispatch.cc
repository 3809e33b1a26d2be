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

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "vqplan/kernels/kernels.h"

namespace vqplan::kernels {

#if defined(VQPLAN_HAVE_AVX2)
const KernelTable* Avx2KernelTableImpl();
#endif

const KernelTable* Avx2Kernels() {
#if defined(VQPLAN_HAVE_AVX2)
  return Avx2KernelTableImpl();
#else
  return nullptr;
#endif
}

bool CpuSupports(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(VQPLAN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

namespace {

const KernelTable* Detect() {
  const char* forced = std::getenv("VQPLAN_KERNELS");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) {
    return &ScalarKernels();
  }
  if (CpuSupports(Isa::kAvx2)) return Avx2Kernels();
  return &ScalarKernels();
}

std::atomic<const KernelTable*>& Slot() {
  static std::atomic<const KernelTable*> slot{Detect()};
  return slot;
}

}  // namespace

const KernelTable& Active() { return *Slot().load(std::memory_order_acquire); }

void SetActive(Isa isa) {
  if (!CpuSupports(isa)) {
    throw std::runtime_error("kernels: instruction set not available");
  }
  Slot().store(isa == Isa::kAvx2 ? Avx2Kernels() : &ScalarKernels(),
               std::memory_order_release);
}

}  // namespace vqplan::kernels
