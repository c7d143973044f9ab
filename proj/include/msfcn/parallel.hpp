#ifndef MSFCN_PARALLEL_HPP
#define MSFCN_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace msfcn {

// Thread cap: MSFCN_THREADS env var, default = available cores.
inline int max_threads() {
  if (const char* env = std::getenv("MSFCN_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, count). Work items must be independent and
// write only to their own output slots, so results do not depend on the
// thread count. A throwing item stops its thread; the first captured
// exception is rethrown on the calling thread after the join.
template <typename Fn>
void parallel_for(int64_t count, Fn&& fn) {
  if (count <= 0) return;
  int threads = std::min<int64_t>(max_threads(), count);
  if (threads <= 1) {
    for (int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int64_t i = t; i < count; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace msfcn

#endif
