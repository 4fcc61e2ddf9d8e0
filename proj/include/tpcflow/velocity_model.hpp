#pragma once

#include <cstdint>
#include <vector>

#include "tpcflow/param_vector.hpp"

namespace tpcflow {

/// MLP architecture for the velocity field v(x, t).
/// depth counts affine layers (>= 2); hidden layers use SiLU, output is linear.
/// The network input is [x, sin/cos time features, raw t], so the first layer
/// consumes dim + 2*freqs + 1 values. Time-feature frequencies are 2^k * pi
/// for k = 0..freqs-1, making the embedding of t = 0 exact (0, 1) pairs.
struct ModelArch {
    int dim = 2;
    int hidden = 64;
    int depth = 3;
    int freqs = 4;

    int input_dim() const { return dim + 2 * freqs + 1; }
    int layer_in(int layer) const { return layer == 0 ? input_dim() : hidden; }
    int layer_out(int layer) const { return layer == depth - 1 ? dim : hidden; }

    /// Throws ConfigError unless dim >= 1, hidden >= 1, depth >= 2, freqs >= 0.
    void validate() const;
};

/// Segment names are "v.w0", "v.b0", ..., one weight/bias pair per layer.
/// Weight layout is row-major (out x in). Biases start at zero; weights are
/// Glorot-uniform in +-sqrt(6 / (fan_in + fan_out)), deterministic in seed.
ParamVector init_params(const ModelArch& arch, std::uint64_t seed);

/// Appends the velocity segments to an existing vector (used when the model
/// shares a ParamVector with pairing parameters).
void add_velocity_segments(const ModelArch& arch, ParamVector& params);
void init_velocity_segments(const ModelArch& arch, ParamVector& params, std::uint64_t seed);

/// Per-evaluation scratch: inputs, pre-activations and activations per layer.
/// Reusable across calls; backward() reads the forward pass stored here.
struct ForwardCache {
    std::vector<double> input;                    // embedded input
    std::vector<std::vector<double>> pre;         // pre-activation per layer
    std::vector<std::vector<double>> act;         // post-activation per layer
    std::vector<double> d_input;                  // input cotangent (backward output)
};

/// The embedded network input [x, sin/cos features, t].
std::vector<double> embed_input(const ModelArch& arch, const double* x, double t);

/// v(x, t). Throws DomainError if t is outside [0,1], NumericalError (with the
/// offending layer segment) if an intermediate value is non-finite.
void forward(const ModelArch& arch, const ParamVector& params, const double* x, double t,
             double* v_out, ForwardCache& cache);

std::vector<double> forward(const ModelArch& arch, const ParamVector& params,
                            const std::vector<double>& x, double t);

/// Row-wise batched forward: x is n x dim, v_out is n x dim.
void forward_batch(const ModelArch& arch, const ParamVector& params, const double* x,
                   const double* t, std::size_t n, double* v_out);

/// Reverse pass for the forward stored in cache. Accumulates parameter
/// gradients into grad (same layout as params; only v.* segments touched)
/// and, when requested, writes input cotangents:
///   dx_out (dim values) and dt_out get dL/dx and dL/dt for cotangent dv.
void backward(const ModelArch& arch, const ParamVector& params, const ForwardCache& cache,
              const double* dv, ParamVector* grad, double* dx_out, double* dt_out);

/// Exact d x d Jacobian dv/dx at (x, t) via dim reverse passes; row-major.
void jacobian_x(const ModelArch& arch, const ParamVector& params, const double* x, double t,
                double* jac_out);

/// Trace of dv/dx (used by the exact-likelihood integrator).
double divergence(const ModelArch& arch, const ParamVector& params, const double* x, double t);

}  // namespace tpcflow
