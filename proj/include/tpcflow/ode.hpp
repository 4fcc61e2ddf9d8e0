#pragma once

#include <functional>
#include <vector>

#include "tpcflow/param_vector.hpp"
#include "tpcflow/velocity_model.hpp"

namespace tpcflow {

/// Right-hand side f(t, y) -> dy. dy arrives sized like y.
using OdeFn = std::function<void(double t, const std::vector<double>& y, std::vector<double>& dy)>;

/// Integration record. For generation runs t runs 0 -> 1; the likelihood
/// integrator reuses the same machinery backwards. nfe counts every RHS
/// evaluation performed.
struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    long nfe = 0;
    long accepted = 0;  // adaptive runs only
    long rejected = 0;

    const std::vector<double>& front() const { return states.front(); }
    const std::vector<double>& back() const { return states.back(); }
};

/// Explicit Euler with N uniform steps from t0 to t1: y_{k+1} = y_k + h f.
/// nfe = N exactly. Throws IntegrationError (with the step index) if a state
/// goes non-finite.
Trajectory euler_integrate(const OdeFn& f, const std::vector<double>& y0, int n_steps,
                           double t0 = 0.0, double t1 = 1.0);

struct Rk45Options {
    double atol = 1e-5;   // protocol default
    double rtol = 1e-5;
    double h_init = 1e-3;
    double h_min = 1e-12;  // below this the step size has underflowed
    bool dense = false;    // keep every accepted state, not just endpoints
};

/// Dormand-Prince 5(4) with FSAL and PI step-size control (Hairer's DOPRI5
/// controller: factor = err^-0.17 / facold^0.04 * 0.9, clamped to [0.2, 10]).
/// NFE accounting: the initial derivative costs 1 evaluation and every
/// attempted step costs 6 (stage 1 is reused from the previous accepted
/// step's stage 7), so nfe = 1 + 6 * (accepted + rejected).
Trajectory rk45_integrate(const OdeFn& f, const std::vector<double>& y0, double t0, double t1,
                          const Rk45Options& opts = {});

/// RHS adapter for the learned probability-flow ODE z' = v(z, t).
OdeFn velocity_ode(const ModelArch& arch, const ParamVector& params);

}  // namespace tpcflow
