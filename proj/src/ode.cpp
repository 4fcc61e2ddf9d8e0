#include "tpcflow/ode.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "tpcflow/errors.hpp"

namespace tpcflow {

namespace {

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// 5th-order solution weights equal row kA[6]; e = b5 - b4 gives the embedded
// error estimate directly.
constexpr double kE[7] = {71.0 / 57600, 0.0,           -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

}  // namespace

Trajectory euler_integrate(const OdeFn& f, const std::vector<double>& y0, int n_steps, double t0,
                           double t1) {
    if (n_steps < 1) throw ConfigError("euler_integrate: N must be >= 1");
    Trajectory traj;
    traj.times.reserve(static_cast<std::size_t>(n_steps) + 1);
    traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    traj.times.push_back(t0);
    traj.states.push_back(y0);

    const double h = (t1 - t0) / static_cast<double>(n_steps);
    std::vector<double> y = y0;
    std::vector<double> dy(y.size());
    for (int k = 0; k < n_steps; ++k) {
        const double t = t0 + h * static_cast<double>(k);
        f(t, y, dy);
        ++traj.nfe;
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += h * dy[i];
        if (!all_finite(y)) throw IntegrationError("euler_integrate: non-finite state", k);
        // pin the final time exactly
        traj.times.push_back(k + 1 == n_steps ? t1 : t0 + h * static_cast<double>(k + 1));
        traj.states.push_back(y);
    }
    return traj;
}

Trajectory rk45_integrate(const OdeFn& f, const std::vector<double>& y0, double t0, double t1,
                          const Rk45Options& opts) {
    if (!(opts.atol > 0.0) || !(opts.rtol > 0.0)) {
        throw ConfigError("rk45_integrate: atol and rtol must be > 0");
    }
    const std::size_t n = y0.size();
    const double direction = (t1 >= t0) ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);

    Trajectory traj;
    traj.times.push_back(t0);
    traj.states.push_back(y0);
    if (span == 0.0) return traj;

    std::vector<std::vector<double>> k(7, std::vector<double>(n));
    std::vector<double> y = y0, y_stage(n), y_new(n);

    double t = t0;
    double h = direction * std::min(std::abs(opts.h_init), span);
    f(t, y, k[0]);
    ++traj.nfe;

    // PI controller state (Hairer DOPRI5: expo1 = 1/5 - beta*0.75, beta = 0.04).
    constexpr double kBeta = 0.04;
    constexpr double kExpo1 = 0.2 - kBeta * 0.75;
    constexpr double kSafe = 0.9;
    constexpr double kFacMin = 0.2;
    constexpr double kFacMax = 10.0;
    double facold = 1e-4;

    bool last_step = false;
    long step_index = 0;
    while (!last_step) {
        if (std::abs(h) < opts.h_min) {
            throw IntegrationError("rk45_integrate: step size underflow", step_index);
        }
        if ((t + h - t1) * direction >= 0.0) {
            h = t1 - t;
            last_step = true;
        }

        for (int s = 1; s < 7; ++s) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int j = 0; j < s; ++j) acc += kA[s][j] * k[static_cast<std::size_t>(j)][i];
                y_stage[i] = y[i] + h * acc;
            }
            f(t + kC[s] * h, y_stage, k[static_cast<std::size_t>(s)]);
            ++traj.nfe;
        }
        // stage 7 input is the 5th-order solution itself (FSAL)
        for (std::size_t i = 0; i < n; ++i) y_new[i] = y_stage[i];
        if (!all_finite(y_new)) {
            throw IntegrationError("rk45_integrate: non-finite state", step_index);
        }

        double err_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double est = 0.0;
            for (int s = 0; s < 7; ++s) est += kE[s] * k[static_cast<std::size_t>(s)][i];
            est *= h;
            const double scale = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            const double ratio = est / scale;
            err_sq += ratio * ratio;
        }
        const double err = std::sqrt(err_sq / static_cast<double>(n));

        const double fac11 = std::pow(std::max(err, 1e-16), kExpo1);
        if (err <= 1.0) {
            // accept
            t = last_step ? t1 : t + h;
            y.swap(y_new);
            k[0].swap(k[6]);  // FSAL: stage 7 becomes stage 1 of the next step
            ++traj.accepted;
            if (opts.dense || last_step) {
                traj.times.push_back(t);
                traj.states.push_back(y);
            }
            double fac = fac11 / std::pow(facold, kBeta);
            fac = std::max(1.0 / kFacMax, std::min(1.0 / kFacMin, fac / kSafe));
            facold = std::max(err, 1e-4);
            h = h / fac;
        } else {
            // reject: shrink, retry from the same point (k[0] still valid)
            ++traj.rejected;
            last_step = false;
            const double fac = std::min(1.0 / kFacMin, fac11 / kSafe);
            h = h / fac;
        }
        ++step_index;
    }
    return traj;
}

OdeFn velocity_ode(const ModelArch& arch, const ParamVector& params) {
    auto cache = std::make_shared<ForwardCache>();
    return [arch, &params, cache](double t, const std::vector<double>& y, std::vector<double>& dy) {
        dy.resize(y.size());
        forward(arch, params, y.data(), std::clamp(t, 0.0, 1.0), dy.data(), *cache);
    };
}

}  // namespace tpcflow
