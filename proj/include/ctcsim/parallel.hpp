// Deterministic work-sharing: items compute into their own slots, so results
// are independent of scheduling; callers reduce in index order.
#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ctcsim {

/// Runs fn(i) for i in [0, n). workers <= 1 runs inline. fn must only write
/// to per-index state. The first exception thrown by any item is rethrown.
inline void parallel_for(int64_t n, int workers,
                         const std::function<void(int64_t)>& fn) {
  if (n <= 0) {
    return;
  }
  if (workers <= 1 || n == 1) {
    for (int64_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<int64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    while (true) {
      const int64_t i = next.fetch_add(1);
      if (i >= n || failed.load()) {
        return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) {
          error = std::current_exception();
        }
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const int count = static_cast<int>(std::min<int64_t>(workers, n));
  threads.reserve(count);
  for (int t = 0; t < count; ++t) {
    threads.emplace_back(worker);
  }
  for (auto& t : threads) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

}  // namespace ctcsim
