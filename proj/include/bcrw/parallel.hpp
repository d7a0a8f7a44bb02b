#pragma once

// Deterministic block scheduling. Work is cut into fixed blocks that do
// not depend on the worker count; workers pull block indices from an
// atomic counter and write results into per-block slots, which callers
// then reduce in block order.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bcrw {

inline int resolve_workers(int workers) {
  if (workers > 0) return workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Calls fn(block) for block in [0, blocks) on up to `workers` threads.
/// The first exception thrown by any block is rethrown after all threads
/// have joined.
template <class Fn>
void parallel_blocks(std::size_t blocks, int workers, Fn&& fn) {
  workers = std::max(1, std::min<int>(resolve_workers(workers), static_cast<int>(std::max<std::size_t>(blocks, 1))));
  if (workers == 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1, std::memory_order_relaxed);
      if (b >= blocks) return;
      try {
        fn(b);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(blocks);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

/// Per-block results reduced in block order: out[b] = fn(begin, end) over
/// the index range of block b.
template <class T, class Fn>
std::vector<T> map_blocks(std::size_t n, std::size_t block_size, int workers, Fn&& fn) {
  const std::size_t blocks = (n + block_size - 1) / block_size;
  std::vector<T> out(blocks);
  parallel_blocks(blocks, workers, [&](std::size_t b) {
    const std::size_t begin = b * block_size;
    out[b] = fn(begin, std::min(n, begin + block_size));
  });
  return out;
}

}  // namespace bcrw
