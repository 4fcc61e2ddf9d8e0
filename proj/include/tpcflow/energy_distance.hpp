#pragma once

#include <cstddef>
#include <vector>

namespace tpcflow {

/// Energy distance 2 E|a-b| - E|a-a'| - E|b-b'| between two point sets
/// (row-major, d columns). All three expectations use the biased V-statistic
/// (all ordered pairs, diagonal included), which makes the statistic exactly
/// zero for identical sets and nonnegative in general. Pairwise sums are
/// parallelized over row blocks and reduced in block order, so the result is
/// identical regardless of scheduling.
double energy_distance(const std::vector<double>& a, const std::vector<double>& b, std::size_t dim);

}  // namespace tpcflow
