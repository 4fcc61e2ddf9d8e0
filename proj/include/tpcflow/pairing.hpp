#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpcflow/param_vector.hpp"

namespace tpcflow {

enum class PairingMode { Fixed, Learned };

PairingMode pairing_mode_from_string(const std::string& name);
std::string to_string(PairingMode mode);

/// The pairing operator assigning the auxiliary time t' to a primary time t.
/// Fixed mode is the parameter-free antithetic map t' = 1 - t. Learned mode is
/// the monotone one-hidden-layer sigmoid map
///   phi(t) = sigmoid( sum_i softplus(a_raw_i) * sigmoid(t + b_i) + c ),
/// whose effective slopes softplus(a_raw_i) are strictly positive, so phi is
/// nondecreasing by construction. Parameters live in the shared ParamVector
/// under segments "phi.a_raw", "phi.b", "phi.c".
struct PairingSpec {
    PairingMode mode = PairingMode::Fixed;
    int hidden = 8;      // H
    int mono_grid = 32;  // K

    bool learned() const { return mode == PairingMode::Learned; }
};

/// Antithetic map 1 - t. Throws DomainError outside [0,1].
double psi_fixed(double t);

/// Adds and initializes the phi segments: a_raw = 0 (slopes softplus(0)),
/// b evenly spaced in [-1, 0], c = 0 — a smooth monotone ramp over [0,1].
void add_pairing_segments(const PairingSpec& spec, ParamVector& params);

/// phi gradient w.r.t. its own parameters, plus the slope dphi/dt used when
/// t' feeds back into path states.
struct PhiGrad {
    std::vector<double> d_a_raw;
    std::vector<double> d_b;
    double d_c = 0.0;
    double d_t = 0.0;
};

/// Evaluates phi(t) in (0,1). Throws ConfigError when spec.mode != Learned,
/// DomainError when t is outside [0,1]. grad may be null.
double phi_eval(const PairingSpec& spec, const ParamVector& params, double t, PhiGrad* grad);

/// Maps t to its partner under the spec (psi_fixed or phi).
double pair_time(const PairingSpec& spec, const ParamVector& params, double t);

struct MonoPenalty {
    int count = 0;          // adjacent order violations on the grid (reported metric)
    double surrogate = 0.0;  // sum of hinge gaps max(0, phi(g_k) - phi(g_{k+1}))
};

/// Order violations of phi on the grid g_k = k/K, k = 1..K. The indicator
/// count is the reported metric; the hinge surrogate carries the training
/// gradient (the indicator has zero gradient almost everywhere). count = 0
/// implies surrogate = 0. grad (w.r.t. phi parameters, surrogate term) may be
/// null. Fixed mode has no parameters: both fields are zero.
MonoPenalty mono_penalty(const PairingSpec& spec, const ParamVector& params, int grid_size,
                         ParamVector* grad);

}  // namespace tpcflow
