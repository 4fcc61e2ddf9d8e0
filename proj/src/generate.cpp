#include "tpcflow/generate.hpp"

#include "tpcflow/errors.hpp"
#include "tpcflow/rng.hpp"
#include "tpcflow/threading.hpp"

namespace tpcflow {

GenerateResult generate_samples(const ModelArch& arch, const ParamVector& params, std::size_t n,
                                std::uint64_t seed, const SolverSettings& solver,
                                bool keep_trajectories) {
    const auto d = static_cast<std::size_t>(arch.dim);
    GenerateResult result;
    result.base_points.resize(n * d);
    Rng rng = Rng(seed).child("sample");
    for (auto& v : result.base_points) v = rng.normal();

    std::vector<std::vector<double>> endpoint(n);
    std::vector<long> nfe(n, 0);
    std::vector<char> ok(n, 0);
    std::vector<Trajectory> trajs(keep_trajectories ? n : 0);

    parallel_blocks(n, [&](std::size_t lo, std::size_t hi) {
        ForwardCache cache;
        OdeFn f = [&](double t, const std::vector<double>& y, std::vector<double>& dy) {
            dy.resize(y.size());
            forward(arch, params, y.data(), t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t), dy.data(), cache);
        };
        for (std::size_t i = lo; i < hi; ++i) {
            std::vector<double> z0(d);
            for (std::size_t c = 0; c < d; ++c) z0[c] = result.base_points[i * d + c];
            try {
                Trajectory traj = solver.adaptive
                                      ? rk45_integrate(f, z0, 0.0, 1.0, solver.rk45)
                                      : euler_integrate(f, z0, solver.euler_steps);
                nfe[i] = traj.nfe;
                endpoint[i] = traj.back();
                ok[i] = 1;
                if (keep_trajectories) trajs[i] = std::move(traj);
            } catch (const IntegrationError&) {
                ok[i] = 0;
            }
        }
    });

    for (std::size_t i = 0; i < n; ++i) {
        if (ok[i]) {
            result.ok_rows.push_back(i);
            result.points.insert(result.points.end(), endpoint[i].begin(), endpoint[i].end());
            result.nfe_total += nfe[i];
        } else {
            ++result.failures;
        }
    }
    if (keep_trajectories) result.trajectories = std::move(trajs);
    return result;
}

}  // namespace tpcflow
