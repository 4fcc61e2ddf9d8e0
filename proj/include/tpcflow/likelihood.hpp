#pragma once

#include <vector>

#include "tpcflow/ode.hpp"

namespace tpcflow {

struct NllResult {
    double nats_per_dim = 0.0;        // batch mean
    std::vector<double> per_sample;   // per-sample nats/dim
    long nfe_total = 0;               // RHS evaluations across the batch
};

/// Velocity field with its exact divergence, the pair the likelihood
/// integrator needs. Factories must be cheap to copy (one instance is built
/// per worker).
struct DivergenceField {
    std::function<void(double t, const double* x, double* v)> velocity;
    std::function<double(double t, const double* x)> divergence;
};

using DivergenceFieldFactory = std::function<DivergenceField()>;

/// Exact negative log-likelihood of data points under a flow field.
/// Each point is carried backward from t = 1 to t = 0 through the augmented
/// system (z, l) with dl/dt = div v(z, t). The backward-accumulated l(0)
/// equals the integral of div v from 1 to 0, so per sample
///   nll = -log N(z_0; 0, I) - l(0),
/// reported in nats per dimension. Integration uses RK45 at the same
/// tolerances as forward sampling.
NllResult exact_nll_field(const DivergenceFieldFactory& make_field, int dim,
                          const std::vector<std::vector<double>>& x1_batch,
                          const Rk45Options& opts = {});

/// Model-bound version; divergence comes from dim exact reverse passes.
/// Requires dim <= 4.
NllResult exact_nll(const ModelArch& arch, const ParamVector& params,
                    const std::vector<std::vector<double>>& x1_batch,
                    const Rk45Options& opts = {});

}  // namespace tpcflow
