#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tsal {

/// Worker count used by parallel_for; defaults to hardware concurrency.
std::size_t num_threads() noexcept;
void set_num_threads(std::size_t n) noexcept;

/// Runs body(i) for i in [0, count). Indices are split into contiguous blocks,
/// one per worker; each index is processed by exactly one worker, so results
/// never depend on the thread count as long as body(i) writes only state owned
/// by i. Falls back to a plain loop when count or the work estimate is small.
template <typename Body>
void parallel_for(std::size_t count, std::size_t work_per_item, Body&& body) {
  constexpr std::size_t kMinWorkPerThread = 1 << 15;
  std::size_t workers = std::min(num_threads(), count);
  if (work_per_item * count < kMinWorkPerThread * 2) workers = 1;
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t block = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * block;
    const std::size_t end = std::min(count, begin + block);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace tsal
