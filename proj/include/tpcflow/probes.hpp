#pragma once

#include <functional>
#include <vector>

#include "tpcflow/paths.hpp"
#include "tpcflow/velocity_model.hpp"

namespace tpcflow {

/// Path-sampled probe points shared across model comparisons: identical
/// endpoints and times give identical banks for every field probed.
struct TrajectoryBank {
    PathKind kind;
    std::vector<EndpointPair> endpoints;
    std::vector<double> t;  // primary times, drawn from [0, 1 - delta_max]
};

TrajectoryBank make_trajectory_bank(const DataSource& source, const PathKind& kind, std::size_t n,
                                    double delta_max, Rng& rng);

/// Arbitrary velocity field (x, t) -> v, for probing trained models and
/// closed-form test fields alike.
using FieldFn = std::function<std::vector<double>(const std::vector<double>&, double)>;

FieldFn model_field(const ModelArch& arch, const ParamVector& params);

/// Trajectory-averaged squared temporal derivative estimate
///   mean over bank of |v(x_{t+delta}, t+delta) - v(x_t, t)|^2 / delta^2,
/// the measurable form of the local-pairing expansion. delta must lie in
/// (0, 0.1]; bank times must leave room for t + delta <= 1.
double time_variation_probe(const FieldFn& field, const TrajectoryBank& bank, double delta);

/// Straightness proxy of the flow induced by the field: mean over n seeded
/// trajectories of the average over Euler steps of |v(z_k, t_k) - (z_N - z_0)|^2.
/// Zero iff every trajectory is traversed at constant velocity.
double straightness_probe(const FieldFn& field, std::size_t n, int euler_steps, int dim, Rng& rng);

}  // namespace tpcflow
