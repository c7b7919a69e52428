#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace coneflow {

// Parallelism policy: loops parallelize only across independent outputs or
// across fixed-size blocks whose partials are combined sequentially. Every
// summation therefore runs in one fixed order, and results are bitwise
// identical to the serial path for any thread count.

bool parallel_enabled();
void set_parallel_enabled(bool on);
int parallel_threads();  // 1 when disabled or built without OpenMP

// kernels only engage threads above this many scalar ops (overhead guard)
inline constexpr std::size_t kParallelGrain = std::size_t{1} << 15;

namespace detail {
void run_parallel(std::size_t n, void* ctx, void (*body)(void*, std::size_t));
bool should_parallelize(std::size_t n, std::size_t work_per_item);
}  // namespace detail

template <class F>
void parallel_for(std::size_t n, std::size_t work_per_item, F&& body) {
  if (detail::should_parallelize(n, work_per_item)) {
    auto thunk = [](void* ctx, std::size_t i) { (*static_cast<F*>(ctx))(i); };
    detail::run_parallel(n, &body, thunk);
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

// fixed block size for reductions; changing it changes results in the last
// ulp, so it is a constant, not a tuning knob
inline constexpr std::size_t kSumBlock = 256;

template <class F>
double blocked_sum(std::size_t n, F&& term) {
  if (n == 0) return 0.0;
  const std::size_t nb = (n + kSumBlock - 1) / kSumBlock;
  std::vector<double> partial(nb, 0.0);
  parallel_for(nb, kSumBlock, [&](std::size_t b) {
    const std::size_t lo = b * kSumBlock;
    const std::size_t hi = std::min(n, lo + kSumBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[b] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace coneflow
