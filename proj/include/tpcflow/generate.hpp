#pragma once

#include <cstdint>
#include <vector>

#include "tpcflow/ode.hpp"

namespace tpcflow {

/// Solver choice shared by the sampling, reflow and evaluation entry points.
struct SolverSettings {
    bool adaptive = true;  // false = fixed-step Euler
    int euler_steps = 100;
    Rk45Options rk45;
};

struct GenerateResult {
    std::vector<double> base_points;  // n x dim draws z0 (row-major)
    std::vector<double> points;       // successful endpoints z1, row-major
    std::vector<std::size_t> ok_rows; // indices into base_points that succeeded
    long failures = 0;
    long nfe_total = 0;
    std::vector<Trajectory> trajectories;  // filled only when requested
};

/// Integrates the probability-flow ODE from n seeded base draws to t = 1.
/// Trajectories integrate independently (parallel over a worker pool, results
/// written to per-row slots, NFE summed in row order). A failed integration
/// is skipped and counted rather than aborting the batch.
GenerateResult generate_samples(const ModelArch& arch, const ParamVector& params, std::size_t n,
                                std::uint64_t seed, const SolverSettings& solver,
                                bool keep_trajectories = false);

}  // namespace tpcflow
