#include "tpcflow/pairing.hpp"

#include <cmath>

#include "tpcflow/errors.hpp"
#include "tpcflow/nn_primitives.hpp"

namespace tpcflow {

namespace {

void require_unit_interval(double t, const char* who) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError(std::string(who) + ": t = " + std::to_string(t) + " outside [0,1]");
    }
}

}  // namespace

PairingMode pairing_mode_from_string(const std::string& name) {
    if (name == "fixed") return PairingMode::Fixed;
    if (name == "learned") return PairingMode::Learned;
    throw ConfigError("unknown pairing mode '" + name + "' (expected fixed|learned)");
}

std::string to_string(PairingMode mode) {
    return mode == PairingMode::Fixed ? "fixed" : "learned";
}

double psi_fixed(double t) {
    require_unit_interval(t, "psi_fixed");
    return 1.0 - t;
}

void add_pairing_segments(const PairingSpec& spec, ParamVector& params) {
    if (!spec.learned()) return;
    if (spec.hidden < 1) throw ConfigError("pairing: hidden must be >= 1");
    if (spec.mono_grid < 2) throw ConfigError("pairing: mono grid K must be >= 2");
    const auto h = static_cast<std::size_t>(spec.hidden);
    params.add_segment("phi.a_raw", h);
    params.add_segment("phi.b", h);
    params.add_segment("phi.c", 1);
    double* b = params.data("phi.b");
    for (int i = 0; i < spec.hidden; ++i) {
        b[i] = spec.hidden == 1 ? -0.5
                                : -1.0 + static_cast<double>(i) / static_cast<double>(spec.hidden - 1);
    }
    // a_raw and c stay zero: slopes softplus(0) = log 2, offset 0.
}

double phi_eval(const PairingSpec& spec, const ParamVector& params, double t, PhiGrad* grad) {
    if (!spec.learned()) throw ConfigError("phi_eval: pairing mode is not Learned");
    require_unit_interval(t, "phi_eval");
    const double* a_raw = params.data("phi.a_raw");
    const double* b = params.data("phi.b");
    const double c = params.data("phi.c")[0];

    double z = c;
    for (int i = 0; i < spec.hidden; ++i) {
        z += nn::softplus(a_raw[i]) * nn::sigmoid(t + b[i]);
    }
    const double out = nn::sigmoid(z);

    if (grad != nullptr) {
        const double dz = nn::sigmoid_grad(z);
        grad->d_a_raw.resize(static_cast<std::size_t>(spec.hidden));
        grad->d_b.resize(static_cast<std::size_t>(spec.hidden));
        grad->d_c = dz;
        double slope = 0.0;
        for (int i = 0; i < spec.hidden; ++i) {
            const double a = nn::softplus(a_raw[i]);
            const double inner = nn::sigmoid(t + b[i]);
            const double dinner = nn::sigmoid_grad(t + b[i]);
            grad->d_a_raw[static_cast<std::size_t>(i)] = dz * inner * nn::softplus_grad(a_raw[i]);
            grad->d_b[static_cast<std::size_t>(i)] = dz * a * dinner;
            slope += a * dinner;
        }
        grad->d_t = dz * slope;
    }
    return out;
}

double pair_time(const PairingSpec& spec, const ParamVector& params, double t) {
    return spec.learned() ? phi_eval(spec, params, t, nullptr) : psi_fixed(t);
}

MonoPenalty mono_penalty(const PairingSpec& spec, const ParamVector& params, int grid_size,
                         ParamVector* grad) {
    MonoPenalty result;
    if (!spec.learned()) return result;
    if (grid_size < 2) throw ConfigError("mono_penalty: grid size K must be >= 2");

    PhiGrad g_lo, g_hi;
    double t_lo = 1.0 / static_cast<double>(grid_size);
    double v_lo = phi_eval(spec, params, t_lo, grad ? &g_lo : nullptr);
    for (int k = 1; k < grid_size; ++k) {
        const double t_hi = static_cast<double>(k + 1) / static_cast<double>(grid_size);
        const double v_hi = phi_eval(spec, params, t_hi, grad ? &g_hi : nullptr);
        if (v_hi < v_lo) result.count += 1;
        const double gap = v_lo - v_hi;
        if (gap > 0.0) {
            result.surrogate += gap;
            if (grad != nullptr) {
                double* da = grad->data("phi.a_raw");
                double* db = grad->data("phi.b");
                double* dc = grad->data("phi.c");
                for (int i = 0; i < spec.hidden; ++i) {
                    da[i] += g_lo.d_a_raw[static_cast<std::size_t>(i)] -
                             g_hi.d_a_raw[static_cast<std::size_t>(i)];
                    db[i] += g_lo.d_b[static_cast<std::size_t>(i)] -
                             g_hi.d_b[static_cast<std::size_t>(i)];
                }
                dc[0] += g_lo.d_c - g_hi.d_c;
            }
        }
        t_lo = t_hi;
        v_lo = v_hi;
        std::swap(g_lo, g_hi);
    }
    return result;
}

}  // namespace tpcflow
