#include "tpcflow/paths.hpp"

#include <algorithm>
#include <cmath>

#include "tpcflow/csv.hpp"
#include "tpcflow/errors.hpp"

namespace tpcflow {

namespace {

void require_unit_interval(double t, const char* who) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError(std::string(who) + ": t = " + std::to_string(t) + " outside [0,1]");
    }
}

// VP path in base->data time: x_t = m(t) x1 + s(t) x0 with
//   m(t) = exp(-B(1-t)/2),  B(s) = beta_min s + (beta_max-beta_min) s^2 / 2,
//   s(t) = sqrt(1 - m(t)^2).
// The base draw x0 doubles as the path noise, so paired samples share it.
struct VpTerms {
    double m, dm, s, ds;
};

VpTerms vp_terms(const PathKind& kind, double t) {
    const double tau = 1.0 - t;
    const double beta_tau = kind.beta_min + (kind.beta_max - kind.beta_min) * tau;
    const double big_b = kind.beta_min * tau + 0.5 * (kind.beta_max - kind.beta_min) * tau * tau;
    const double m = std::exp(-0.5 * big_b);
    const double dm = 0.5 * beta_tau * m;
    const double s = std::sqrt(std::max(0.0, 1.0 - m * m));
    // s -> 0 at t = 1 where the conditional velocity is singular; the clamp
    // keeps u finite for boundary probes (training never draws t = 1 exactly).
    const double s_eff = std::max(s, 1e-8);
    const double ds = -m * dm / s_eff;
    return {m, dm, s, ds};
}

}  // namespace

PathKind PathKind::ot(double sigma_min) {
    if (!(sigma_min >= 0.0 && sigma_min < 1.0)) {
        throw ConfigError("OTSigma: sigma_min must lie in [0,1)");
    }
    PathKind k;
    k.tag = PathKindTag::OTSigma;
    k.sigma_min = sigma_min;
    return k;
}

PathKind PathKind::vp(double beta_min, double beta_max) {
    if (!(beta_min > 0.0) || !(beta_max > 0.0)) {
        throw ConfigError("VPDiffusion: beta schedule must be positive");
    }
    PathKind k;
    k.tag = PathKindTag::VPDiffusion;
    k.beta_min = beta_min;
    k.beta_max = beta_max;
    return k;
}

std::size_t DataSource::size() const {
    return dim == 0 ? 0 : x1_rows.size() / static_cast<std::size_t>(dim);
}

DataSource DataSource::from_points(int dim, std::vector<double> rows) {
    DataSource src;
    src.dim = dim;
    src.x1_rows = std::move(rows);
    return src;
}

DataSource DataSource::from_coupling(int dim, std::vector<double> x0, std::vector<double> x1) {
    if (x0.size() != x1.size()) throw DataError("coupling: x0/x1 row blocks differ in size");
    DataSource src;
    src.dim = dim;
    src.x0_rows = std::move(x0);
    src.x1_rows = std::move(x1);
    src.coupled = true;
    return src;
}

DataSource DataSource::load_csv(const std::string& path, bool coupling) {
    const CsvTable table = read_csv(path);
    if (!coupling) {
        DataSource src;
        src.dim = static_cast<int>(table.cols());
        src.x1_rows = table.values;
        return src;
    }
    if (table.cols() % 2 != 0) throw DataError("coupling CSV must have 2d columns: " + path);
    const int dim = static_cast<int>(table.cols() / 2);
    const std::size_t n = table.rows();
    std::vector<double> x0(n * static_cast<std::size_t>(dim));
    std::vector<double> x1(n * static_cast<std::size_t>(dim));
    for (std::size_t r = 0; r < n; ++r) {
        for (int c = 0; c < dim; ++c) {
            x0[r * static_cast<std::size_t>(dim) + static_cast<std::size_t>(c)] =
                table.at(r, static_cast<std::size_t>(c));
            x1[r * static_cast<std::size_t>(dim) + static_cast<std::size_t>(c)] =
                table.at(r, static_cast<std::size_t>(dim + c));
        }
    }
    return from_coupling(dim, std::move(x0), std::move(x1));
}

std::vector<EndpointPair> sample_endpoints(const DataSource& source, std::size_t batch_size,
                                           Rng& rng) {
    if (source.size() == 0) throw DataError("sample_endpoints: empty data source");
    const auto d = static_cast<std::size_t>(source.dim);
    std::vector<EndpointPair> batch(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) {
        EndpointPair& ep = batch[b];
        ep.id = b;
        ep.x0.resize(d);
        ep.x1.resize(d);
        const std::size_t row = rng.uniform_index(source.size());
        for (std::size_t c = 0; c < d; ++c) ep.x1[c] = source.x1_rows[row * d + c];
        if (source.coupled) {
            for (std::size_t c = 0; c < d; ++c) ep.x0[c] = source.x0_rows[row * d + c];
        } else {
            for (std::size_t c = 0; c < d; ++c) ep.x0[c] = rng.normal();
        }
    }
    return batch;
}

void path_state(const PathKind& kind, const EndpointPair& ep, double t, double* x_t, double* u_t) {
    const std::size_t d = ep.x0.size();
    switch (kind.tag) {
        case PathKindTag::LinearInterp:
        case PathKindTag::Coupled:
            for (std::size_t i = 0; i < d; ++i) {
                if (x_t) x_t[i] = (1.0 - t) * ep.x0[i] + t * ep.x1[i];
                if (u_t) u_t[i] = ep.x1[i] - ep.x0[i];
            }
            break;
        case PathKindTag::OTSigma: {
            const double a = 1.0 - (1.0 - kind.sigma_min) * t;
            for (std::size_t i = 0; i < d; ++i) {
                if (x_t) x_t[i] = a * ep.x0[i] + t * ep.x1[i];
                if (u_t) u_t[i] = ep.x1[i] - (1.0 - kind.sigma_min) * ep.x0[i];
            }
            break;
        }
        case PathKindTag::VPDiffusion: {
            const VpTerms v = vp_terms(kind, t);
            for (std::size_t i = 0; i < d; ++i) {
                if (x_t) x_t[i] = v.m * ep.x1[i] + v.s * ep.x0[i];
                if (u_t) u_t[i] = v.dm * ep.x1[i] + v.ds * ep.x0[i];
            }
            break;
        }
    }
}

void path_velocity_rate(const PathKind& kind, const EndpointPair& ep, double t, double* dudt) {
    const std::size_t d = ep.x0.size();
    if (kind.tag != PathKindTag::VPDiffusion) {
        std::fill(dudt, dudt + d, 0.0);  // u is t-independent for affine kinds
        return;
    }
    const VpTerms v = vp_terms(kind, t);
    const double dbeta = -(kind.beta_max - kind.beta_min);  // d/dt beta(1-t)
    const double tau = 1.0 - t;
    const double beta_tau = kind.beta_min + (kind.beta_max - kind.beta_min) * tau;
    const double d2m = 0.5 * (v.dm * beta_tau + v.m * dbeta);
    const double s_eff = std::max(v.s, 1e-8);
    const double d2s = (-v.dm * v.dm - v.m * d2m - v.ds * v.ds) / s_eff;
    for (std::size_t i = 0; i < d; ++i) dudt[i] = d2m * ep.x1[i] + d2s * ep.x0[i];
}

PathSample sample_path(const PathKind& kind, const EndpointPair& ep, double t) {
    require_unit_interval(t, "sample_path");
    PathSample s;
    s.t = t;
    s.endpoint_id = ep.id;
    s.x_t.resize(ep.x0.size());
    s.u_t.resize(ep.x0.size());
    path_state(kind, ep, t, s.x_t.data(), s.u_t.data());
    return s;
}

std::pair<PathSample, PathSample> sample_paired(const PathKind& kind, const EndpointPair& ep,
                                                double t, double t_prime) {
    require_unit_interval(t, "sample_paired");
    require_unit_interval(t_prime, "sample_paired");
    return {sample_path(kind, ep, t), sample_path(kind, ep, t_prime)};
}

PathSample noise_augment(PathSample sample, double sigma, Rng& rng) {
    if (sigma < 0.0) throw ConfigError("noise_augment: sigma must be >= 0");
    if (sigma > 0.0) {
        for (auto& v : sample.x_t) v += sigma * rng.normal();
    }
    return sample;
}

}  // namespace tpcflow
