// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_PARALLEL_HPP
#define OVSEG3R_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace ovseg3r {

/// Resolve a requested thread count: 0 means hardware concurrency,
/// with the OVSEG3R_THREADS env var taking over when set.
inline int resolve_threads(int requested) {
  if (requested <= 0) {
    if (const char* env = std::getenv("OVSEG3R_THREADS")) {
      const int n = std::atoi(env);
      if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
  }
  return requested;
}

/// Static range split over worker threads. Each worker sees a disjoint
/// [begin,end) slice and must write only pre-assigned output slots, so
/// results do not depend on the thread count. A worker exception is
/// rethrown on the calling thread (lowest worker wins, deterministic).
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& body) {
  const int t = resolve_threads(threads);
  if (t <= 1 || n < 2048) {
    body(static_cast<std::size_t>(0), n);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(t), n);
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, &errors, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

} // namespace ovseg3r

#endif // OVSEG3R_PARALLEL_HPP
