#pragma once

#include <cstddef>
#include <functional>

namespace tpcflow {

/// Worker cap: min(hardware_concurrency, TPCFLOW_THREADS if set). At least 1.
std::size_t worker_count();

/// Runs fn(block_begin, block_end) over [0, n) split into contiguous blocks,
/// one per worker. Blocks are disjoint, so fn may write to per-index slots
/// without synchronization. Results must not depend on scheduling order;
/// callers that reduce should reduce per-block and combine in block order.
void parallel_blocks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

/// Sums fn(block_begin, block_end) over the same blocks, combining partial
/// sums in block order so the result is independent of scheduling.
double parallel_reduce_sum(std::size_t n,
                           const std::function<double(std::size_t, std::size_t)>& fn);

}  // namespace tpcflow
