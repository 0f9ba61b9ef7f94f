#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace seqclt {

/// Worker count used by parallel_for; 0 selects hardware concurrency.
inline unsigned& parallel_threads() {
  static unsigned n = 0;
  return n;
}

/// Calls body(i) for i in [0, n) on a small thread pool. Work items are
/// handed out dynamically; results must be written to per-index slots so the
/// outcome does not depend on scheduling. The first exception is rethrown.
template <class Body>
void parallel_for(std::int64_t n, Body&& body) {
  unsigned threads = parallel_threads();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, std::max<std::int64_t>(n, 1)));
  if (threads <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  constexpr std::int64_t kChunk = 64;
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::int64_t begin = next.fetch_add(kChunk);
      if (begin >= n) return;
      const std::int64_t end = std::min(n, begin + kChunk);
      try {
        for (std::int64_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace seqclt
