#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace steinflow::parallel {

namespace detail {
inline std::atomic<unsigned>& requested_workers() {
  static std::atomic<unsigned> value{0};
  return value;
}
}  // namespace detail

/// Cap the number of worker threads; 0 means one per hardware thread.
inline void set_worker_count(unsigned workers) { detail::requested_workers() = workers; }

inline unsigned worker_count() {
  const unsigned requested = detail::requested_workers();
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Run body(lo, hi) over contiguous chunks of [0, n). Each index is visited by
/// exactly one chunk; callers that write only to per-index slots get results
/// independent of the worker count.
template <typename Body>
void for_chunks(std::size_t n, Body&& body, std::size_t min_chunk = 16) {
  if (n == 0) return;
  const std::size_t max_workers = std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_chunk));
  const std::size_t workers = std::min<std::size_t>(worker_count(), max_workers);
  if (workers <= 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  body(std::size_t{0}, std::min(n, chunk));
}

}  // namespace steinflow::parallel
