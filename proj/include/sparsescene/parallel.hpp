#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sparsescene {

/// Worker count used by parallel_for; 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

namespace detail {
// Set on pool threads so nested parallel_for calls run inline.
inline thread_local bool in_pool = false;
}

/// Runs body(i) for i in [0, n) on up to max_workers threads (0 means
/// thread_count()). Each index is visited exactly once, so
/// writing results into slot i keeps the output independent of scheduling.
/// The first exception thrown by any body is rethrown on the caller.
/// Calls made from inside another parallel_for run serially.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, unsigned max_workers = 0) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(max_workers > 0 ? max_workers : thread_count(), n));
  if (workers <= 1 || detail::in_pool) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    const bool outer = detail::in_pool;
    detail::in_pool = true;
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
    detail::in_pool = outer;
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace sparsescene
