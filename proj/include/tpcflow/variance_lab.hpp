#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tpcflow/train_config.hpp"

namespace tpcflow {

/// Paired per-sample gradients under shared randomness, stored row-wise:
/// row i holds G_i = grad of |v(x_t,t)-u_t|^2 and H_i = the same gradient at
/// the partner time, both from the identical endpoint draw (and, unless noise
/// sharing is off, the same perturbation).
struct PairedGradSamples {
    std::size_t n = 0;
    std::size_t m = 0;       // gradient dimension
    std::vector<double> g;   // n x m
    std::vector<double> h;   // n x m

    const double* g_row(std::size_t i) const { return g.data() + i * m; }
    const double* h_row(std::size_t i) const { return h.data() + i * m; }
};

/// Time pairing used by the lab: the map plus the largest primary time it can
/// accept (shift maps t -> t + delta need t <= 1 - delta).
struct TimeMap {
    std::function<double(double)> map;
    double t_max = 1.0;

    static TimeMap identity();
    static TimeMap antithetic();
    static TimeMap shift(double delta);
    /// Learned pairing evaluated at frozen parameters.
    static TimeMap learned(const PairingSpec& spec, const ParamVector& params);
};

/// n independent endpoint/time draws at frozen params; per draw the
/// flow-matching gradient at t and at psi(t). share_noise applies the primary
/// state perturbation to the partner as well (full common random numbers).
PairedGradSamples collect_paired_grads(const ModelArch& arch, const TrainConfig& config,
                                       const ParamVector& params, const DataSource& source,
                                       const TimeMap& psi, std::size_t n, std::uint64_t seed,
                                       bool share_noise = false);

/// Scalar-moment report under the convention Var(Z) = E|Z - EZ|^2,
/// Cov(G,H) = E<G - EG, H - EH>; empirical moments use divisor n-1.
/// var_reduced_direct recomputes Var(G - alpha H) by a second pass over the
/// rows; identity_gap = |direct - (VarG + a^2 VarH - 2a Cov)| must vanish to
/// numerical precision. se_var_reduced is the plug-in standard error of the
/// direct estimate.
struct VarianceReport {
    double var_g = 0.0;
    double var_h = 0.0;
    double cov = 0.0;
    double rho = 0.0;
    double alpha_star = 0.0;
    double var_reduced = 0.0;
    double var_reduced_direct = 0.0;
    double identity_gap = 0.0;
    double se_var_reduced = 0.0;
    std::size_t n_samples = 0;
};

/// alpha omitted selects the optimal alpha* = Cov / Var(H).
/// Throws DegenerateError when Var(H) = 0 and alpha is omitted.
VarianceReport control_variate_stats(const PairedGradSamples& samples,
                                     std::optional<double> alpha = std::nullopt);

/// Correlation lower bound: lhs = Corr(G,H), rhs = 1 - E|G-H|^2 / (2 Var G)
/// on empirically centered samples. Equality is the polarization identity
/// when Var G = Var H. se_gap is a batch-means standard error of the gap over
/// n_batches splits.
struct CorrBoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double gap = 0.0;     // lhs - rhs
    double se_gap = 0.0;
};

CorrBoundCheck corr_lower_bound_check(const PairedGradSamples& samples, int n_batches = 25);

/// Planted-covariance Gaussian pairs: per coordinate h = rho g + sqrt(1-rho^2) z
/// scaled by scale_h, so Corr(G,H) = rho and Var(H) = scale_h^2 Var(G) exactly
/// in population.
PairedGradSamples planted_gaussian_pairs(std::size_t n, std::size_t m, double rho, double scale_h,
                                         std::uint64_t seed);

/// Closed-form quadratic instance: targets regressed on features that are
/// linear in the coefficient matrix, with a paired-feature difference forming
/// the coupling seminorm. The regularized minimizer solves
/// (A + lambda C) w_r = b_r per output row in closed form.
struct TikhonovInstance {
    std::size_t n_features = 0;          // J
    std::size_t out_dim = 0;             // d
    std::size_t n_rows = 0;              // M
    std::vector<double> feat_primary;    // M x J at (x_t, t)
    std::vector<double> feat_paired;     // M x J at (x_t', t')
    std::vector<double> targets;         // M x d
};

/// Random Fourier features of (x, t) over a linear-interpolant path with
/// antithetic pairing and a fixed two-moons dataset.
TikhonovInstance make_rff_instance(std::uint64_t seed, std::size_t n_features = 10,
                                   std::size_t n_rows = 4096, std::size_t dataset_points = 256);

struct TikhonovRow {
    double lambda = 0.0;
    double tpc_norm = 0.0;   // |v_lambda|^2 in the coupling seminorm
    double bound = 0.0;      // R(v*) / lambda
    double slack = 0.0;      // bound - tpc_norm
    bool satisfied = false;
    bool ridged = false;     // normal equations needed the 1e-10 ridge
};

/// Evaluates the contraction inequality on every grid lambda. tolerance is
/// the solver slack admitted when comparing the two sides.
std::vector<TikhonovRow> tikhonov_check(const TikhonovInstance& instance,
                                        const std::vector<double>& lambdas,
                                        double tolerance = 1e-8);

/// Gradient-estimator variance of the full training objective at frozen
/// params, comparing the configured gate probability against p_tpc = 0 at
/// matched expected model evaluations per step (the baseline batch grows by
/// the factor 1 + p_tpc). Scalar-variance convention throughout.
struct GatedVarianceReport {
    double var_gated = 0.0;
    double var_baseline = 0.0;
    double ratio = 0.0;              // gated / baseline
    std::size_t batch_gated = 0;
    std::size_t batch_baseline = 0;
    double evals_per_step_gated = 0.0;     // expected model evaluations
    double evals_per_step_baseline = 0.0;
    std::size_t n_draws = 0;
};

GatedVarianceReport gated_estimator_variance(const TrainConfig& config, const DataSource& source,
                                             const ParamVector& params, std::size_t n_draws,
                                             std::uint64_t seed);

}  // namespace tpcflow
