#include "tsal/parallel.hpp"

#include <atomic>

namespace tsal {
namespace {

std::atomic<std::size_t>& thread_setting() {
  static std::atomic<std::size_t> n{std::max<std::size_t>(1, std::thread::hardware_concurrency())};
  return n;
}

}  // namespace

std::size_t num_threads() noexcept { return thread_setting().load(std::memory_order_relaxed); }

void set_num_threads(std::size_t n) noexcept {
  thread_setting().store(std::max<std::size_t>(1, n), std::memory_order_relaxed);
}

}  // namespace tsal
