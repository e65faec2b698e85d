#include "bbmlab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

namespace bbmlab {

namespace {
constexpr std::size_t kChunk = 256;
}

int thread_count() {
  static const int cached = [] {
    const char* env = std::getenv("BBMLAB_THREADS");
    if (!env) return 1;
    int v = std::atoi(env);
    return std::clamp(v, 1, 64);
  }();
  return cached;
}

double chunked_sum(std::size_t n, const std::function<void(std::size_t, double&)>& body) {
  if (n == 0) return 0.0;
  const std::size_t nchunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(nchunks, 0.0);

  auto run_chunk = [&](std::size_t c) {
    double acc = 0.0;
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(n, lo + kChunk);
    for (std::size_t i = lo; i < hi; ++i) body(i, acc);
    partial[c] = acc;
  };

  const int nt = thread_count();
  if (nt <= 1 || nchunks <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t c = next.fetch_add(1);
          if (c >= nchunks) break;
          run_chunk(c);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  // Sequential merge in chunk order keeps the rounding history fixed.
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

void chunked_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  const std::size_t nchunks = (n + kChunk - 1) / kChunk;
  auto run_chunk = [&](std::size_t c) {
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(n, lo + kChunk);
    for (std::size_t i = lo; i < hi; ++i) body(i);
  };

  const int nt = thread_count();
  if (nt <= 1 || nchunks <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c) run_chunk(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= nchunks) break;
        run_chunk(c);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace bbmlab
