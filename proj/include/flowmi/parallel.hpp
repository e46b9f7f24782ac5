#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flowmi {

// Every parallel kernel in the library also has a serial driver. The two are
// bit-identical by construction: parallel loops only ever write disjoint
// per-index slots, and reductions happen afterwards in fixed index order.
enum class Exec { Serial, Parallel };

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline int thread_index() {
#ifdef _OPENMP
    return omp_get_thread_num();
#else
    return 0;
#endif
}

inline void set_worker_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

// Runs body(i) for i in [0, n). Parallel execution uses a static schedule;
// the body must only touch state owned by index i (plus read-only shared
// state), so the execution order never shows in the results.
template <class Body> void parallel_for(Exec exec, int n, const Body& body) {
    if (exec == Exec::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) body(i);
        return;
#endif
    }
    for (int i = 0; i < n; ++i) body(i);
}

} // namespace flowmi
