#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace shmm {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers write results by
/// index, so output does not depend on scheduling. Rethrows the first exception
/// (lowest index) after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn &&fn)
{
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr first;
  std::size_t first_index = n;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (i < first_index) {
            first_index = i;
            first = std::current_exception();
          }
        }
      }
    });
  }
  for (auto &t : pool)
    t.join();
  if (first)
    std::rethrow_exception(first);
}

} // namespace shmm
