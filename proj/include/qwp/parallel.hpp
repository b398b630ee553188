#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qwp::detail {

/// Runs body(begin, end) over [0, n) in contiguous chunks on up to `threads`
/// threads. Chunks never overlap, so per-row results do not depend on the
/// thread count.
template <typename Body>
void parallel_for(std::size_t n, std::size_t chunk, int threads, Body&& body) {
  if (n == 0) return;
  chunk = std::max<std::size_t>(chunk, 1);
  const std::size_t chunks = (n + chunk - 1) / chunk;
  const auto workers = static_cast<std::size_t>(std::clamp<long>(threads, 1, static_cast<long>(chunks)));
  if (workers == 1) {
    for (std::size_t start = 0; start < n; start += chunk) body(start, std::min(n, start + chunk));
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += workers) {
          const std::size_t start = c * chunk;
          body(start, std::min(n, start + chunk));
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace qwp::detail
