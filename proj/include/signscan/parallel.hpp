#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace signscan {

inline int default_threads() {
  if (const char* env = std::getenv("SIGNSCAN_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs fn(0..nitems-1) across threads. Items must be independent; callers that
/// need determinism write results into per-index slots.
inline void parallel_for(long nitems, int threads, const std::function<void(long)>& fn) {
  if (threads <= 0) threads = default_threads();
  threads = static_cast<int>(std::min<long>(threads, nitems));
  if (threads <= 1) {
    for (long i = 0; i < nitems; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const long i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= nitems) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace signscan
