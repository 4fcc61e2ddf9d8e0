#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpcflow/rng.hpp"

namespace tpcflow {

/// One endpoint draw: base sample x0 ~ N(0, I) and data sample x1. The pair
/// is the shared randomness for paired-timestep evaluation, so both members
/// of a temporal pair are computed from the identical (x0, x1).
struct EndpointPair {
    std::vector<double> x0;
    std::vector<double> x1;
    std::uint64_t id = 0;
};

/// State and conditional target at time t along the configured path:
/// x_t = Phi_t(x0, x1), u_t = d/dt Phi_t(x0, x1).
struct PathSample {
    std::vector<double> x_t;
    std::vector<double> u_t;
    double t = 0.0;
    std::uint64_t endpoint_id = 0;
};

enum class PathKindTag { LinearInterp, OTSigma, VPDiffusion, Coupled };

/// Probability-path family. Coupled reuses the linear interpolant but draws
/// endpoints verbatim from a coupling table (the reflow retraining setup).
struct PathKind {
    PathKindTag tag = PathKindTag::LinearInterp;
    double sigma_min = 0.0;             // OTSigma
    double beta_min = 0.1;              // VPDiffusion, linear beta schedule
    double beta_max = 20.0;

    static PathKind linear() { return {}; }
    static PathKind ot(double sigma_min);
    static PathKind vp(double beta_min = 0.1, double beta_max = 20.0);
    static PathKind coupled() { return {PathKindTag::Coupled, 0.0, 0.1, 20.0}; }
};

/// Data rows feeding endpoint sampling: either x1 rows from a dataset or
/// (x0, x1) rows from a coupling table.
struct DataSource {
    int dim = 0;
    std::vector<double> x1_rows;      // n x dim (dataset mode)
    std::vector<double> x0_rows;      // n x dim, nonempty only for couplings
    bool coupled = false;

    std::size_t size() const;
    static DataSource from_points(int dim, std::vector<double> rows);
    static DataSource from_coupling(int dim, std::vector<double> x0, std::vector<double> x1);
    /// Dataset CSV has d columns "x1..xd"; coupling CSV has 2d columns (x0 then x1).
    static DataSource load_csv(const std::string& path, bool coupling);
};

/// Draws batch_size endpoint pairs: x0 i.i.d. standard normal and x1 sampled
/// uniformly with replacement from the source (or (x0, x1) rows verbatim from
/// the coupling table). Throws DataError on an empty source.
std::vector<EndpointPair> sample_endpoints(const DataSource& source, std::size_t batch_size,
                                           Rng& rng);

/// Evaluates (x_t, u_t). Throws DomainError if t is outside [0,1].
PathSample sample_path(const PathKind& kind, const EndpointPair& ep, double t);

/// Both members computed from the identical endpoints (common random numbers),
/// carrying the same endpoint id.
std::pair<PathSample, PathSample> sample_paired(const PathKind& kind, const EndpointPair& ep,
                                                double t, double t_prime);

/// x_t <- x_t + eps, eps ~ N(0, sigma^2 I); u_t and t unchanged.
/// Throws ConfigError if sigma < 0. sigma = 0 is the identity.
PathSample noise_augment(PathSample sample, double sigma, Rng& rng);

/// Analytic u as a function of t only (endpoints fixed) and its own time
/// derivative. The second derivative feeds the learned-pairing gradient when
/// the paired flow-matching residual is enabled on a VP path; it is zero for
/// the affine kinds.
void path_state(const PathKind& kind, const EndpointPair& ep, double t, double* x_t, double* u_t);
void path_velocity_rate(const PathKind& kind, const EndpointPair& ep, double t, double* dudt);

}  // namespace tpcflow
