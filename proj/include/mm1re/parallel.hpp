#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mm1re {

// Replicas are cut into fixed-size blocks independent of the worker count.
// Each block draws from its own random streams, keyed by the block index, and
// is reduced in replica order; blocks are merged in block order. Results are
// therefore bit-identical for any number of workers.
inline constexpr std::uint64_t kReplicaBlock = 4096;

inline unsigned resolve_workers(unsigned requested) noexcept {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// `reduce_block(begin, end)` returns a Partial for replicas [begin, end);
// `merge(acc, partial)` folds partials in block order.
template <class Partial, class ReduceBlock, class Merge>
Partial reduce_replicas(std::uint64_t n_replicas, unsigned workers,
                        ReduceBlock&& reduce_block, Merge&& merge,
                        Partial init = Partial{}) {
  const std::uint64_t n_blocks = (n_replicas + kReplicaBlock - 1) / kReplicaBlock;
  std::vector<Partial> partials(n_blocks);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const std::uint64_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      const std::uint64_t begin = b * kReplicaBlock;
      const std::uint64_t end = std::min(n_replicas, begin + kReplicaBlock);
      try {
        partials[b] = reduce_block(begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n_blocks);
      }
    }
  };

  const unsigned n_threads = static_cast<unsigned>(
      std::min<std::uint64_t>(resolve_workers(workers), std::max<std::uint64_t>(n_blocks, 1)));
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  Partial acc = std::move(init);
  for (auto& p : partials) merge(acc, p);
  return acc;
}

}  // namespace mm1re
