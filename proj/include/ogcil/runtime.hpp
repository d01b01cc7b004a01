#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ogcil {

// Training allocates and frees the same large temporaries every step. Keeping them on the
// heap instead of fresh mmap regions avoids page-fault churn.
inline void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace ogcil
