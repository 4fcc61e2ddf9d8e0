#include "tpcflow/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "tpcflow/errors.hpp"
#include "tpcflow/threading.hpp"

namespace tpcflow {

NllResult exact_nll_field(const DivergenceFieldFactory& make_field, int dim,
                          const std::vector<std::vector<double>>& x1_batch,
                          const Rk45Options& opts) {
    const auto d = static_cast<std::size_t>(dim);
    constexpr double kLog2Pi = 1.8378770664093454836;

    NllResult result;
    result.per_sample.assign(x1_batch.size(), 0.0);
    std::vector<long> nfe(x1_batch.size(), 0);

    parallel_blocks(x1_batch.size(), [&](std::size_t lo, std::size_t hi) {
        DivergenceField field = make_field();
        OdeFn augmented = [&](double t, const std::vector<double>& y, std::vector<double>& dy) {
            dy.resize(d + 1);
            const double tc = std::clamp(t, 0.0, 1.0);
            field.velocity(tc, y.data(), dy.data());
            dy[d] = field.divergence(tc, y.data());
        };
        for (std::size_t i = lo; i < hi; ++i) {
            if (x1_batch[i].size() != d) throw DataError("exact_nll: sample dimension mismatch");
            std::vector<double> y(d + 1, 0.0);
            std::copy(x1_batch[i].begin(), x1_batch[i].end(), y.begin());
            const Trajectory traj = rk45_integrate(augmented, y, 1.0, 0.0, opts);
            nfe[i] = traj.nfe;
            const auto& z0 = traj.back();
            double log_base = 0.0;
            for (std::size_t c = 0; c < d; ++c) log_base += -0.5 * (kLog2Pi + z0[c] * z0[c]);
            result.per_sample[i] = (-log_base - z0[d]) / static_cast<double>(dim);
        }
    });

    double acc = 0.0;
    for (double v : result.per_sample) acc += v;
    result.nats_per_dim = x1_batch.empty() ? 0.0 : acc / static_cast<double>(x1_batch.size());
    for (long v : nfe) result.nfe_total += v;
    return result;
}

NllResult exact_nll(const ModelArch& arch, const ParamVector& params,
                    const std::vector<std::vector<double>>& x1_batch, const Rk45Options& opts) {
    if (arch.dim > 4) {
        throw ConfigError("exact_nll: exact divergence is limited to dim <= 4");
    }
    auto factory = [&arch, &params]() {
        auto cache = std::make_shared<ForwardCache>();
        DivergenceField field;
        field.velocity = [&arch, &params, cache](double t, const double* x, double* v) {
            forward(arch, params, x, t, v, *cache);
        };
        field.divergence = [&arch, &params](double t, const double* x) {
            return divergence(arch, params, x, t);
        };
        return field;
    };
    return exact_nll_field(factory, arch.dim, x1_batch, opts);
}

}  // namespace tpcflow
