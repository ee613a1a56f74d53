#include "capcrop/runtime.hpp"

#include <cstdlib>  // defines __GLIBC__ on glibc

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace capcrop {

void tune_allocator() {
#if defined(__GLIBC__)
  constexpr int kThreshold = 32 << 20;  // glibc rejects larger mmap thresholds
  mallopt(M_MMAP_THRESHOLD, kThreshold);
  mallopt(M_TRIM_THRESHOLD, kThreshold);
#endif
}

}  // namespace capcrop
