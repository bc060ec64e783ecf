#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <utility>
#include <vector>

namespace dve {

inline int& detail_thread_slot() {
  static int n = 1;
  return n;
}

inline void set_num_threads(int n) { detail_thread_slot() = std::max(1, n); }
inline int num_threads() { return detail_thread_slot(); }

// Runs fn(i) for i in [0, n), split into contiguous chunks, one per worker.
// Each index is handled by exactly one worker, so results are independent of
// the thread count as long as fn(i) touches only state owned by index i.
template <class F>
void parallel_for(std::int64_t n, F&& fn) {
  const int nt = static_cast<int>(std::min<std::int64_t>(num_threads(), n));
  if (nt <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::int64_t chunk = (n + nt - 1) / nt;
  std::vector<std::thread> workers;
  workers.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    const std::int64_t lo = t * chunk;
    const std::int64_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([lo, hi, &fn] {
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace dve
