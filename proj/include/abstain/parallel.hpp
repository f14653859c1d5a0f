#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace abstain::parallel {

// Execution policy for the batch kernels. The serial path is the reference
// implementation; tests assert it produces bitwise-identical results to the
// parallel path, which only ever writes to disjoint slots.
enum class Exec { serial, parallel };

namespace detail {
inline std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{-1};  // -1: unset, 0: runtime default
  return cap;
}
}  // namespace detail

// Caps OpenMP parallelism; 0 restores the runtime default.
inline void set_max_threads(int n) { detail::thread_cap().store(n); }

// Resolved thread cap: explicit set_max_threads() wins, then the
// ABSTAIN_RANK_THREADS environment variable, then the OpenMP default.
inline int max_threads() {
  int cap = detail::thread_cap().load();
  if (cap < 0) {
    const char* env = std::getenv("ABSTAIN_RANK_THREADS");
    cap = 0;
    if (env != nullptr) {
      const long parsed = std::strtol(env, nullptr, 10);
      if (parsed > 0) cap = static_cast<int>(parsed);
    }
    detail::thread_cap().store(cap);
  }
  return cap;
}

// Runs body(i) for i in [0, n). Exceptions thrown by the body are captured
// and rethrown on the calling thread once every iteration finished.
template <typename Body>
void par_for(std::size_t n, Body&& body, Exec exec = Exec::parallel) {
#ifdef _OPENMP
  if (exec == Exec::parallel && n > 1) {
    std::exception_ptr eptr = nullptr;
    std::atomic<bool> failed{false};
    std::mutex mu;
    const int cap = max_threads();
    const int threads = cap > 0 ? cap : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      if (failed.load(std::memory_order_relaxed)) continue;
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failed.exchange(true)) eptr = std::current_exception();
      }
    }
    if (eptr) std::rethrow_exception(eptr);
    return;
  }
#else
  (void)exec;
#endif
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace abstain::parallel
