#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace bbmlab {

/// Number of worker threads.  Reads the BBMLAB_THREADS environment variable
/// once per process; defaults to 1.  Values are clamped to [1, 64].
int thread_count();

/// Deterministic parallel reduction over the index range [0, n).
///
/// The range is split into fixed-size chunks (256 indices) regardless of the
/// thread count, each chunk is reduced independently into a local double, and
/// the per-chunk partial sums are then added sequentially in chunk order.
/// Because the chunk boundaries and the merge order never depend on how many
/// threads ran, the result is bit-identical for any thread count, including 1.
///
/// `body(i, acc)` must add index i's contribution into acc with plain `+=`
/// style updates; it must not touch state shared across indices.
double chunked_sum(std::size_t n, const std::function<void(std::size_t, double&)>& body);

/// Same chunking scheme for a loop with no reduction (parallel for).  The
/// body must only write to per-index slots.
void chunked_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace bbmlab
