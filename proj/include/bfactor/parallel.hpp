#ifndef BFACTOR_PARALLEL_HPP
#define BFACTOR_PARALLEL_HPP

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bfactor {

// Resolves a thread-count request: values < 1 fall back to BFACTOR_THREADS
// from the environment, then to the hardware concurrency.
int resolve_threads(int requested);

// Runs fn(begin, end) over a static contiguous partition of [0, n). Work
// items may write only to their own output slots; with that discipline the
// result is identical for any thread count. The first exception thrown by a
// worker is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
  threads = resolve_threads(threads);
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    fn(std::int64_t{0}, n);
    return;
  }
  const int workers = static_cast<int>(
      std::min<std::int64_t>(n, static_cast<std::int64_t>(threads)));
  const std::int64_t chunk = (n + workers - 1) / workers;

  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = w * chunk;
    const std::int64_t hi = std::min<std::int64_t>(lo + chunk, n);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn, &error, &error_mutex] {
      try {
        fn(lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace bfactor

#endif  // BFACTOR_PARALLEL_HPP
