#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ddsl {

/// Worker count: hardware concurrency, capped by the DDSL_THREADS env var.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DDSL_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

/// Runs fn(i) for i in [begin, end) over contiguous chunks. Each index is
/// processed exactly once, so results do not depend on the worker count as
/// long as fn(i) only writes state owned by i.
template <typename Fn>
void parallel_for(int begin, int end, Fn&& fn) {
  const int total = end - begin;
  if (total <= 0) return;
  const int workers = static_cast<int>(std::min<unsigned>(worker_count(), static_cast<unsigned>(total)));
  if (workers <= 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = begin + static_cast<int>(static_cast<long long>(total) * w / workers);
    const int hi = begin + static_cast<int>(static_cast<long long>(total) * (w + 1) / workers);
    pool.emplace_back([&, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace ddsl
