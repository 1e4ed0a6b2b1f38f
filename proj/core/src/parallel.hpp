#pragma once
// Deterministic block-parallel execution. Work is split into independently
// computed blocks whose outputs land in preallocated slots, so results are
// identical for any worker count. DJS_THREADS caps the pool (default:
// hardware concurrency).

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace djs::detail {

inline int worker_count() {
  if (const char* env = std::getenv("DJS_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(block) for block = 0..block_count-1. Blocks must not share
// mutable state. Exceptions are rethrown on the calling thread.
inline void parallel_for_blocks(std::size_t block_count,
                                const std::function<void(std::size_t)>& body) {
  const int workers =
      static_cast<int>(std::min<std::size_t>(block_count, worker_count()));
  if (workers <= 1) {
    for (std::size_t b = 0; b < block_count; ++b) body(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t b = next.fetch_add(1);
      if (b >= block_count) return;
      try {
        body(b);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace djs::detail
