#include "tpcflow/energy_distance.hpp"

#include <cmath>

#include "tpcflow/errors.hpp"
#include "tpcflow/threading.hpp"

namespace tpcflow {

namespace {

// mean over all ordered pairs (i from xs, j from ys) of |xs_i - ys_j|
double mean_cross_distance(const std::vector<double>& xs, const std::vector<double>& ys,
                           std::size_t dim) {
    const std::size_t n = xs.size() / dim;
    const std::size_t m = ys.size() / dim;
    const double total = parallel_reduce_sum(n, [&](std::size_t lo, std::size_t hi) {
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double* xi = xs.data() + i * dim;
            for (std::size_t j = 0; j < m; ++j) {
                const double* yj = ys.data() + j * dim;
                double sq = 0.0;
                for (std::size_t c = 0; c < dim; ++c) {
                    const double diff = xi[c] - yj[c];
                    sq += diff * diff;
                }
                acc += std::sqrt(sq);
            }
        }
        return acc;
    });
    return total / (static_cast<double>(n) * static_cast<double>(m));
}

}  // namespace

double energy_distance(const std::vector<double>& a, const std::vector<double>& b,
                       std::size_t dim) {
    if (dim == 0) throw ConfigError("energy_distance: dim must be >= 1");
    if (a.empty() || b.empty()) throw ConfigError("energy_distance: point sets must be nonempty");
    if (a.size() % dim != 0 || b.size() % dim != 0) {
        throw ConfigError("energy_distance: row size not a multiple of dim");
    }
    const double cross = mean_cross_distance(a, b, dim);
    const double within_a = mean_cross_distance(a, a, dim);
    const double within_b = mean_cross_distance(b, b, dim);
    return 2.0 * cross - within_a - within_b;
}

}  // namespace tpcflow
