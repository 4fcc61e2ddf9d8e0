#include "tpcflow/probes.hpp"

#include <cmath>

#include "tpcflow/errors.hpp"

namespace tpcflow {

TrajectoryBank make_trajectory_bank(const DataSource& source, const PathKind& kind, std::size_t n,
                                    double delta_max, Rng& rng) {
    if (!(delta_max >= 0.0 && delta_max < 1.0)) {
        throw ConfigError("make_trajectory_bank: delta_max must lie in [0,1)");
    }
    TrajectoryBank bank;
    bank.kind = kind;
    bank.endpoints = sample_endpoints(source, n, rng);
    bank.t.resize(n);
    for (auto& t : bank.t) t = rng.uniform01() * (1.0 - delta_max);
    return bank;
}

FieldFn model_field(const ModelArch& arch, const ParamVector& params) {
    return [arch, &params](const std::vector<double>& x, double t) {
        return forward(arch, params, x, t);
    };
}

double time_variation_probe(const FieldFn& field, const TrajectoryBank& bank, double delta) {
    if (!(delta > 0.0 && delta <= 0.1)) {
        throw ConfigError("time_variation_probe: delta must lie in (0, 0.1]");
    }
    if (bank.endpoints.empty()) throw ConfigError("time_variation_probe: empty bank");
    const std::size_t d = bank.endpoints.front().x0.size();
    std::vector<double> x_lo(d), x_hi(d);
    double acc = 0.0;
    for (std::size_t i = 0; i < bank.endpoints.size(); ++i) {
        const double t = bank.t[i];
        if (t + delta > 1.0) throw DomainError("time_variation_probe: t + delta exceeds 1");
        path_state(bank.kind, bank.endpoints[i], t, x_lo.data(), nullptr);
        path_state(bank.kind, bank.endpoints[i], t + delta, x_hi.data(), nullptr);
        const std::vector<double> v_lo = field(x_lo, t);
        const std::vector<double> v_hi = field(x_hi, t + delta);
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = v_hi[c] - v_lo[c];
            sq += diff * diff;
        }
        acc += sq / (delta * delta);
    }
    return acc / static_cast<double>(bank.endpoints.size());
}

double straightness_probe(const FieldFn& field, std::size_t n, int euler_steps, int dim, Rng& rng) {
    if (euler_steps < 1) throw ConfigError("straightness_probe: euler_steps must be >= 1");
    const double h = 1.0 / static_cast<double>(euler_steps);
    double acc = 0.0;
    std::vector<double> z0(static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& c : z0) c = rng.normal();
        std::vector<double> z = z0;
        std::vector<std::vector<double>> velocities;
        velocities.reserve(static_cast<std::size_t>(euler_steps));
        for (int k = 0; k < euler_steps; ++k) {
            const double t = h * static_cast<double>(k);
            velocities.push_back(field(z, t));
            for (int c = 0; c < dim; ++c) {
                z[static_cast<std::size_t>(c)] += h * velocities.back()[static_cast<std::size_t>(c)];
            }
        }
        double per_traj = 0.0;
        for (const auto& v : velocities) {
            double sq = 0.0;
            for (int c = 0; c < dim; ++c) {
                const double diff =
                    v[static_cast<std::size_t>(c)] - (z[static_cast<std::size_t>(c)] - z0[static_cast<std::size_t>(c)]);
                sq += diff * diff;
            }
            per_traj += sq;
        }
        acc += per_traj / static_cast<double>(euler_steps);
    }
    return acc / static_cast<double>(n);
}

}  // namespace tpcflow
