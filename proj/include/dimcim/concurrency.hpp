// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dimcim {

/// Runs fn(i) for i in [0, count) on at most `max_in_flight` threads. The
/// first exception thrown by any call stops dispatch and is rethrown here.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t max_in_flight, Fn&& fn) {
  const std::size_t workers = std::min(count, std::max<std::size_t>(1, max_in_flight));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (!stop.load(std::memory_order_relaxed)) {
          const std::size_t i = next.fetch_add(1);
          if (i >= count) return;
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            stop = true;
            return;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

/// Thread budget for an adapter that declares `declared` (0 = unbounded).
inline std::size_t effective_concurrency(std::size_t declared) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  return declared == 0 ? hw : std::min(declared, hw * 4);
}

}  // namespace dimcim
