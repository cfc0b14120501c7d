#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace permsig {

// Runs body(worker, index) for every index in [0, count) on `threads` workers.
// Indices are claimed in chunks from a shared counter; results must be written
// to per-index slots so the outcome never depends on scheduling. If any call
// throws, the exception of the lowest failing index is rethrown.
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body, std::size_t chunk = 1) {
  if (count == 0) return;
  threads = std::clamp<std::size_t>(threads, 1, count);
  chunk = std::max<std::size_t>(chunk, 1);
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(std::size_t{0}, i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_index = count;

  auto worker = [&](std::size_t w) {
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t begin = next.fetch_add(chunk, std::memory_order_relaxed);
      if (begin >= count) return;
      const std::size_t end = std::min(begin + chunk, count);
      for (std::size_t i = begin; i < end; ++i) {
        try {
          body(w, i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (i < first_error_index) {
            first_error_index = i;
            first_error = std::current_exception();
          }
          stop.store(true, std::memory_order_relaxed);
          return;
        }
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (std::size_t w = 1; w < threads; ++w) pool.emplace_back(worker, w);
    worker(0);
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace permsig
