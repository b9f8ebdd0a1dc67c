#pragma once

#include "tsal/simd/kernels.hpp"

namespace tsal::simd::detail {

extern const KernelTable scalar_table;
#if defined(TSAL_BUILD_AVX2)
extern const KernelTable avx2_table;
#endif
#if defined(TSAL_BUILD_NEON)
extern const KernelTable neon_table;
#endif

}  // namespace tsal::simd::detail
