#pragma once

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gradsolve {

/// Environment variable read by configure_threads_from_env().
inline constexpr const char* kThreadsEnv = "GRADSOLVE_THREADS";

inline void set_thread_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void configure_threads_from_env() {
  if (const char* v = std::getenv(kThreadsEnv)) {
    try {
      set_thread_count(std::stoi(v));
    } catch (...) {
      // ignore malformed values
    }
  }
}

}  // namespace gradsolve
