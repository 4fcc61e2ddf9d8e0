#include "tpcflow/variance_lab.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "tpcflow/datasets2d.hpp"
#include "tpcflow/errors.hpp"
#include "tpcflow/tpc_loss.hpp"

namespace tpcflow {

namespace {

struct Moments {
    std::vector<double> mean_g, mean_h;
    double var_g = 0.0, var_h = 0.0, cov = 0.0, mean_sq_diff = 0.0;
};

// Centered second moments with divisor n-1 shared by every statistic, so the
// polarization identity E|G-H|^2 = VarG + VarH - 2Cov holds exactly.
Moments compute_moments(const PairedGradSamples& s) {
    if (s.n < 2) throw DegenerateError("paired-gradient statistics need >= 2 samples");
    Moments mo;
    mo.mean_g.assign(s.m, 0.0);
    mo.mean_h.assign(s.m, 0.0);
    for (std::size_t i = 0; i < s.n; ++i) {
        const double* g = s.g_row(i);
        const double* h = s.h_row(i);
        for (std::size_t c = 0; c < s.m; ++c) {
            mo.mean_g[c] += g[c];
            mo.mean_h[c] += h[c];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(s.n);
    for (std::size_t c = 0; c < s.m; ++c) {
        mo.mean_g[c] *= inv_n;
        mo.mean_h[c] *= inv_n;
    }
    const double inv_nm1 = 1.0 / static_cast<double>(s.n - 1);
    for (std::size_t i = 0; i < s.n; ++i) {
        const double* g = s.g_row(i);
        const double* h = s.h_row(i);
        for (std::size_t c = 0; c < s.m; ++c) {
            const double dg = g[c] - mo.mean_g[c];
            const double dh = h[c] - mo.mean_h[c];
            mo.var_g += dg * dg;
            mo.var_h += dh * dh;
            mo.cov += dg * dh;
            mo.mean_sq_diff += (dg - dh) * (dg - dh);
        }
    }
    mo.var_g *= inv_nm1;
    mo.var_h *= inv_nm1;
    mo.cov *= inv_nm1;
    mo.mean_sq_diff *= inv_nm1;
    return mo;
}

}  // namespace

TimeMap TimeMap::identity() {
    return {[](double t) { return t; }, 1.0};
}

TimeMap TimeMap::antithetic() {
    return {[](double t) { return 1.0 - t; }, 1.0};
}

TimeMap TimeMap::shift(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("TimeMap::shift: delta must be in (0,1)");
    return {[delta](double t) { return t + delta; }, 1.0 - delta};
}

TimeMap TimeMap::learned(const PairingSpec& spec, const ParamVector& params) {
    if (!spec.learned()) throw ConfigError("TimeMap::learned: pairing mode is Fixed");
    return {[spec, params](double t) { return phi_eval(spec, params, t, nullptr); }, 1.0};
}

PairedGradSamples collect_paired_grads(const ModelArch& arch, const TrainConfig& config,
                                       const ParamVector& params, const DataSource& source,
                                       const TimeMap& psi, std::size_t n, std::uint64_t seed,
                                       bool share_noise) {
    if (n < 2) throw ConfigError("collect_paired_grads: n must be >= 2");
    PairedGradSamples out;
    out.n = n;
    out.m = params.size();
    out.g.assign(n * out.m, 0.0);
    out.h.assign(n * out.m, 0.0);

    Rng root(seed);
    Rng rng_data = root.child("data");
    Rng rng_noise = root.child("noise");

    TrainConfig one = config;
    one.batch_size = 1;
    one.sigma_noise = config.sigma_noise;

    ParamVector grad = params.zeros_like();
    for (std::size_t i = 0; i < n; ++i) {
        LossBatch batch = assemble_batch(source, one, rng_data, rng_noise, share_noise);
        batch.t[0] = rng_data.uniform01() * psi.t_max;  // respect the map domain
        const double t_partner = psi.map(batch.t[0]);

        grad = params.zeros_like();
        fm_loss(arch, one, params, batch, &grad);
        std::copy(grad.values().begin(), grad.values().end(), out.g.begin() + i * out.m);

        LossBatch partner = batch;
        partner.t[0] = t_partner;
        if (!share_noise && !partner.eps_paired.empty()) {
            partner.eps_primary = batch.eps_paired;  // independent draw for H
        }
        grad = params.zeros_like();
        fm_loss(arch, one, params, partner, &grad);
        std::copy(grad.values().begin(), grad.values().end(), out.h.begin() + i * out.m);
    }
    return out;
}

VarianceReport control_variate_stats(const PairedGradSamples& samples,
                                     std::optional<double> alpha) {
    const Moments mo = compute_moments(samples);
    VarianceReport report;
    report.n_samples = samples.n;
    report.var_g = mo.var_g;
    report.var_h = mo.var_h;
    report.cov = mo.cov;
    if (!alpha.has_value() && !(mo.var_h > 0.0)) {
        throw DegenerateError("control_variate_stats: Var(H) = 0 with alpha omitted");
    }
    report.rho = (mo.var_g > 0.0 && mo.var_h > 0.0)
                     ? mo.cov / std::sqrt(mo.var_g * mo.var_h)
                     : 0.0;
    report.alpha_star = alpha.value_or(mo.var_h > 0.0 ? mo.cov / mo.var_h : 0.0);
    const double a = report.alpha_star;
    report.var_reduced = mo.var_g + a * a * mo.var_h - 2.0 * a * mo.cov;

    // Independent second pass: empirical variance of the combined variable.
    double direct = 0.0;
    std::vector<double> q(samples.n);
    for (std::size_t i = 0; i < samples.n; ++i) {
        const double* g = samples.g_row(i);
        const double* h = samples.h_row(i);
        double sq = 0.0;
        for (std::size_t c = 0; c < samples.m; ++c) {
            const double z = (g[c] - mo.mean_g[c]) - a * (h[c] - mo.mean_h[c]);
            sq += z * z;
        }
        q[i] = sq;
        direct += sq;
    }
    direct /= static_cast<double>(samples.n - 1);
    report.var_reduced_direct = direct;
    report.identity_gap = std::abs(direct - report.var_reduced);

    // Plug-in SE of the mean of q (q_i are i.i.d. up to the estimated center).
    const double mean_q = direct * static_cast<double>(samples.n - 1) / static_cast<double>(samples.n);
    double var_q = 0.0;
    for (double qi : q) var_q += (qi - mean_q) * (qi - mean_q);
    var_q /= static_cast<double>(samples.n - 1);
    report.se_var_reduced = std::sqrt(var_q / static_cast<double>(samples.n));
    return report;
}

CorrBoundCheck corr_lower_bound_check(const PairedGradSamples& samples, int n_batches) {
    const Moments mo = compute_moments(samples);
    if (!(mo.var_g > 0.0)) throw DegenerateError("corr_lower_bound_check: Var(G) = 0");
    if (!(mo.var_h > 0.0)) throw DegenerateError("corr_lower_bound_check: Var(H) = 0");
    CorrBoundCheck check;
    check.lhs = mo.cov / std::sqrt(mo.var_g * mo.var_h);
    check.rhs = 1.0 - mo.mean_sq_diff / (2.0 * mo.var_g);
    check.gap = check.lhs - check.rhs;

    // Batch-means SE: recompute the gap on consecutive sample splits.
    const std::size_t k = std::max<std::size_t>(2, std::min<std::size_t>(
                                                       static_cast<std::size_t>(n_batches),
                                                       samples.n / 2));
    const std::size_t per = samples.n / k;
    std::vector<double> gaps;
    gaps.reserve(k);
    for (std::size_t b = 0; b < k; ++b) {
        PairedGradSamples sub;
        sub.n = per;
        sub.m = samples.m;
        sub.g.assign(samples.g.begin() + static_cast<std::ptrdiff_t>(b * per * samples.m),
                     samples.g.begin() + static_cast<std::ptrdiff_t>((b + 1) * per * samples.m));
        sub.h.assign(samples.h.begin() + static_cast<std::ptrdiff_t>(b * per * samples.m),
                     samples.h.begin() + static_cast<std::ptrdiff_t>((b + 1) * per * samples.m));
        const Moments sm = compute_moments(sub);
        if (sm.var_g > 0.0 && sm.var_h > 0.0) {
            gaps.push_back(sm.cov / std::sqrt(sm.var_g * sm.var_h) -
                           (1.0 - sm.mean_sq_diff / (2.0 * sm.var_g)));
        }
    }
    if (gaps.size() >= 2) {
        double mean = 0.0;
        for (double g : gaps) mean += g;
        mean /= static_cast<double>(gaps.size());
        double var = 0.0;
        for (double g : gaps) var += (g - mean) * (g - mean);
        var /= static_cast<double>(gaps.size() - 1);
        check.se_gap = std::sqrt(var / static_cast<double>(gaps.size()));
    }
    return check;
}

PairedGradSamples planted_gaussian_pairs(std::size_t n, std::size_t m, double rho, double scale_h,
                                         std::uint64_t seed) {
    if (!(rho >= -1.0 && rho <= 1.0)) throw ConfigError("planted pairs: rho must lie in [-1,1]");
    PairedGradSamples out;
    out.n = n;
    out.m = m;
    out.g.resize(n * m);
    out.h.resize(n * m);
    Rng rng = Rng(seed).child("planted");
    const double ortho = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (std::size_t i = 0; i < n * m; ++i) {
        const double a = rng.normal();
        const double b = rng.normal();
        out.g[i] = a;
        out.h[i] = scale_h * (rho * a + ortho * b);
    }
    return out;
}

TikhonovInstance make_rff_instance(std::uint64_t seed, std::size_t n_features, std::size_t n_rows,
                                   std::size_t dataset_points) {
    Rng root(seed);
    Rng rng_feat = root.child("features");
    Rng rng_draw = root.child("draws");

    Dataset2D ds;
    ds.name = "two_moons";
    ds.n = dataset_points;
    ds.noise = 0.05;
    ds.seed = seed;
    const DataSource source = DataSource::from_points(2, generate(ds));
    const PathKind kind = PathKind::linear();

    // random Fourier features of (x, t): cos(w . [x; t] + p)
    const std::size_t in_dim = 3;
    std::vector<double> w(n_features * in_dim);
    std::vector<double> phase(n_features);
    for (auto& v : w) v = rng_feat.normal();
    for (auto& v : phase) v = rng_feat.uniform(0.0, 2.0 * 3.14159265358979323846);

    TikhonovInstance inst;
    inst.n_features = n_features;
    inst.out_dim = 2;
    inst.n_rows = n_rows;
    inst.feat_primary.resize(n_rows * n_features);
    inst.feat_paired.resize(n_rows * n_features);
    inst.targets.resize(n_rows * 2);

    auto fill_features = [&](const double* x, double t, double* row) {
        for (std::size_t j = 0; j < n_features; ++j) {
            const double* wj = w.data() + j * in_dim;
            row[j] = std::cos(wj[0] * x[0] + wj[1] * x[1] + wj[2] * t + phase[j]);
        }
    };

    std::vector<double> x(2), u(2);
    for (std::size_t i = 0; i < n_rows; ++i) {
        const auto eps = sample_endpoints(source, 1, rng_draw);
        const double t = rng_draw.uniform01();
        path_state(kind, eps[0], t, x.data(), u.data());
        fill_features(x.data(), t, inst.feat_primary.data() + i * n_features);
        inst.targets[2 * i] = u[0];
        inst.targets[2 * i + 1] = u[1];
        const double tq = 1.0 - t;  // antithetic partner
        path_state(kind, eps[0], tq, x.data(), nullptr);
        fill_features(x.data(), tq, inst.feat_paired.data() + i * n_features);
    }
    return inst;
}

std::vector<TikhonovRow> tikhonov_check(const TikhonovInstance& inst,
                                        const std::vector<double>& lambdas, double tolerance) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const auto jn = static_cast<Eigen::Index>(inst.n_features);
    const auto m = static_cast<Eigen::Index>(inst.n_rows);
    const auto dout = static_cast<Eigen::Index>(inst.out_dim);

    Eigen::Map<const MatrixXd> feat(inst.feat_primary.data(), jn, m);   // column-major: J x M
    Eigen::Map<const MatrixXd> featp(inst.feat_paired.data(), jn, m);
    Eigen::Map<const MatrixXd> targets(inst.targets.data(), dout, m);

    const double inv_m = 1.0 / static_cast<double>(inst.n_rows);
    const MatrixXd a_mat = feat * feat.transpose() * inv_m;                       // E f f^T
    const MatrixXd diff = feat - featp;
    const MatrixXd c_mat = diff * diff.transpose() * inv_m;                       // E (f-f')(f-f')^T
    const MatrixXd b_mat = feat * targets.transpose() * inv_m;                    // J x d

    auto solve = [&](const MatrixXd& lhs, bool& ridged) {
        Eigen::LDLT<MatrixXd> ldlt(lhs);
        const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
        const double dmax = pivots.maxCoeff();
        bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(dmax > 0.0) ||
                        pivots.minCoeff() <= 1e-12 * dmax;
        if (!singular) {
            MatrixXd sol = ldlt.solve(b_mat);
            if ((lhs * sol - b_mat).norm() <= 1e-8 * (b_mat.norm() + 1.0)) return sol;
            singular = true;
        }
        ridged = ridged || singular;
        MatrixXd reg = lhs;
        reg.diagonal().array() += 1e-10;
        return MatrixXd(Eigen::LDLT<MatrixXd>(reg).solve(b_mat));
    };

    bool base_ridged = false;
    const MatrixXd w_star = solve(a_mat, base_ridged);  // unregularized minimizer
    const double risk_star =
        ((w_star.transpose() * feat - targets).squaredNorm()) * inv_m;

    std::vector<TikhonovRow> rows;
    rows.reserve(lambdas.size());
    for (const double lambda : lambdas) {
        if (!(lambda > 0.0)) throw ConfigError("tikhonov_check: lambda must be > 0");
        TikhonovRow row;
        row.lambda = lambda;
        row.ridged = base_ridged;
        const MatrixXd lhs = a_mat + lambda * c_mat;
        const MatrixXd w_lam = solve(lhs, row.ridged);
        row.tpc_norm = ((w_lam.transpose() * diff).squaredNorm()) * inv_m;
        row.bound = risk_star / lambda;
        row.slack = row.bound - row.tpc_norm;
        row.satisfied = row.tpc_norm <= row.bound + tolerance;
        rows.push_back(row);
    }
    return rows;
}

GatedVarianceReport gated_estimator_variance(const TrainConfig& config, const DataSource& source,
                                             const ParamVector& params, std::size_t n_draws,
                                             std::uint64_t seed) {
    if (n_draws < 2) throw ConfigError("gated_estimator_variance: n_draws must be >= 2");
    GatedVarianceReport report;
    report.n_draws = n_draws;
    report.batch_gated = static_cast<std::size_t>(config.batch_size);
    report.batch_baseline = static_cast<std::size_t>(
        std::lround(static_cast<double>(config.batch_size) * (1.0 + config.p_tpc)));
    report.evals_per_step_gated =
        static_cast<double>(config.batch_size) * (1.0 + config.p_tpc);
    report.evals_per_step_baseline = static_cast<double>(report.batch_baseline);

    auto scalar_variance = [&](const TrainConfig& cfg, bool gated,
                               std::uint64_t stream) {
        Rng root(stream);
        Rng rng_data = root.child("data");
        Rng rng_gate = root.child("gate");
        Rng rng_noise = root.child("noise");
        std::vector<std::vector<double>> draws(n_draws);
        ParamVector grad = params.zeros_like();
        for (std::size_t i = 0; i < n_draws; ++i) {
            const LossBatch batch = assemble_batch(source, cfg, rng_data, rng_noise);
            const bool gate = gated && rng_gate.bernoulli(cfg.p_tpc);
            grad = params.zeros_like();
            total_loss(cfg.arch, cfg, params, batch, gate, &grad);
            draws[i] = grad.values();
        }
        const std::size_t m = params.size();
        std::vector<double> mean(m, 0.0);
        for (const auto& d : draws)
            for (std::size_t c = 0; c < m; ++c) mean[c] += d[c];
        for (auto& v : mean) v /= static_cast<double>(n_draws);
        double var = 0.0;
        for (const auto& d : draws) {
            for (std::size_t c = 0; c < m; ++c) {
                const double dev = d[c] - mean[c];
                var += dev * dev;
            }
        }
        return var / static_cast<double>(n_draws - 1);
    };

    report.var_gated = scalar_variance(config, true, seed);

    // Same seed for both arms (common random numbers tighten the comparison;
    // with lambda_tpc = 0 and equal batch sizes the two arms coincide).
    TrainConfig baseline = config;
    baseline.p_tpc = 0.0;
    baseline.batch_size = static_cast<int>(report.batch_baseline);
    report.var_baseline = scalar_variance(baseline, false, seed);
    report.ratio = report.var_baseline > 0.0 ? report.var_gated / report.var_baseline : 0.0;
    return report;
}

}  // namespace tpcflow
