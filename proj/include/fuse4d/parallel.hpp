#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace fuse4d {

/// Maps a --threads request to a worker count (0 = hardware concurrency).
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs fn(i) for every i in [begin, end), splitting the range into
/// contiguous chunks, one per worker. Workers write to disjoint per-index
/// data only, so results are identical for any thread count.
template <typename Fn>
void parallel_for(int begin, int end, int threads, Fn&& fn) {
  const int n = end - begin;
  if (n <= 0) return;
  threads = std::min(resolve_threads(threads), n);
  if (threads <= 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = begin + t * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace fuse4d
