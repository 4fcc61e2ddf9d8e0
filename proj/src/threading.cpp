#include "tpcflow/threading.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace tpcflow {

std::size_t worker_count() {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("TPCFLOW_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
    }
    return n;
}

void parallel_blocks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

double parallel_reduce_sum(std::size_t n,
                           const std::function<double(std::size_t, std::size_t)>& fn) {
    if (n == 0) return 0.0;
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) return fn(0, n);
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<double> partial(workers, 0.0);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, &partial, w, lo, hi] { partial[w] = fn(lo, hi); });
    }
    for (auto& th : pool) th.join();
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace tpcflow
