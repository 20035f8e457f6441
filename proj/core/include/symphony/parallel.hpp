#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace symphony {

/// Runs fn(i) for every i in [0, n) on at most `max_workers` threads. The
/// first exception stops the hand-out of new indices and is rethrown after
/// all workers have joined.
template <typename Fn>
void parallel_for(std::size_t n, int max_workers, Fn&& fn) {
  if (n == 0) return;
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, max_workers)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (!failed.load(std::memory_order_relaxed)) {
          const auto i = next.fetch_add(1);
          if (i >= n) return;
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace symphony
