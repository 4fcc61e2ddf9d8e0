#pragma once

#include <cmath>

namespace tpcflow::nn {

// Closed primitive set for every differentiable program in the toolkit:
// affine maps, tanh / SiLU / sigmoid / softplus, squared L2, scalar
// multiply/add, concatenation. Each nonlinearity ships with its derivative
// so per-layer backprop stays local.

inline double sigmoid(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double sigmoid_grad(double z) {
    const double s = sigmoid(z);
    return s * (1.0 - s);
}

inline double silu(double z) { return z * sigmoid(z); }

inline double silu_grad(double z) {
    const double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}

inline double tanh_grad(double z) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
}

/// log(1 + e^z), overflow-safe.
inline double softplus(double z) {
    if (z > 30.0) return z;
    if (z < -30.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

/// d softplus / dz = sigmoid(z).
inline double softplus_grad(double z) { return sigmoid(z); }

}  // namespace tpcflow::nn
