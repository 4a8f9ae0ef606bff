#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace idrm {

// Number of worker threads. Override with the IDRM_THREADS environment
// variable; defaults to the hardware concurrency.
inline int thread_count() {
  static int n = [] {
    if (const char* env = std::getenv("IDRM_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return n;
}

// Runs fn(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
// Chunk boundaries depend only on n and chunk_size, never on the thread
// count, so per-chunk partial results can be reduced in chunk order for a
// bit-deterministic total.
template <typename Fn>
void for_chunks(long n, long chunk_size, Fn&& fn) {
  if (n <= 0) return;
  const long n_chunks = (n + chunk_size - 1) / chunk_size;
  const int workers = std::min<long>(thread_count(), n_chunks);
  if (workers <= 1) {
    for (long c = 0; c < n_chunks; ++c)
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (long c = w; c < n_chunks; c += workers)
        fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    });
  }
  for (auto& th : pool) th.join();
}

inline long chunk_count(long n, long chunk_size) {
  return n <= 0 ? 0 : (n + chunk_size - 1) / chunk_size;
}

}  // namespace idrm
