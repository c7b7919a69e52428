#include "coneflow/parallel.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace coneflow {

namespace {
std::atomic<bool> g_parallel{true};
}

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

void set_parallel_enabled(bool on) {
  g_parallel.store(on, std::memory_order_relaxed);
}

int parallel_threads() {
#ifdef _OPENMP
  return parallel_enabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

namespace detail {

bool should_parallelize(std::size_t n, std::size_t work_per_item) {
#ifdef _OPENMP
  return parallel_enabled() && n > 1 && omp_get_max_threads() > 1 &&
         n * work_per_item >= kParallelGrain;
#else
  (void)n;
  (void)work_per_item;
  return false;
#endif
}

void run_parallel(std::size_t n, void* ctx, void (*body)(void*, std::size_t)) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    body(ctx, static_cast<std::size_t>(i));
  }
#else
  for (std::size_t i = 0; i < n; ++i) body(ctx, i);
#endif
}

}  // namespace detail
}  // namespace coneflow
