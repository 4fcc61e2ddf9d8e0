#include "tpcflow/velocity_model.hpp"

#include <cmath>
#include <string>

#include "tpcflow/errors.hpp"
#include "tpcflow/nn_primitives.hpp"
#include "tpcflow/rng.hpp"

namespace tpcflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string weight_name(int layer) { return "v.w" + std::to_string(layer); }
std::string bias_name(int layer) { return "v.b" + std::to_string(layer); }

void embed_into(const ModelArch& arch, const double* x, double t, std::vector<double>& input) {
    input.resize(static_cast<std::size_t>(arch.input_dim()));
    for (int i = 0; i < arch.dim; ++i) input[static_cast<std::size_t>(i)] = x[i];
    double omega = kPi;  // 2^k * pi
    for (int k = 0; k < arch.freqs; ++k) {
        input[static_cast<std::size_t>(arch.dim + 2 * k)] = std::sin(omega * t);
        input[static_cast<std::size_t>(arch.dim + 2 * k + 1)] = std::cos(omega * t);
        omega *= 2.0;
    }
    input[static_cast<std::size_t>(arch.input_dim() - 1)] = t;
}

}  // namespace

void ModelArch::validate() const {
    if (dim < 1) throw ConfigError("arch: dim must be >= 1");
    if (hidden < 1) throw ConfigError("arch: hidden must be >= 1");
    if (depth < 2) throw ConfigError("arch: depth must be >= 2");
    if (freqs < 0) throw ConfigError("arch: freqs must be >= 0");
}

void add_velocity_segments(const ModelArch& arch, ParamVector& params) {
    arch.validate();
    for (int layer = 0; layer < arch.depth; ++layer) {
        const auto fan_in = static_cast<std::size_t>(arch.layer_in(layer));
        const auto fan_out = static_cast<std::size_t>(arch.layer_out(layer));
        params.add_segment(weight_name(layer), fan_in * fan_out);
        params.add_segment(bias_name(layer), fan_out);
    }
}

void init_velocity_segments(const ModelArch& arch, ParamVector& params, std::uint64_t seed) {
    Rng rng = Rng(seed).child("init");
    for (int layer = 0; layer < arch.depth; ++layer) {
        const int fan_in = arch.layer_in(layer);
        const int fan_out = arch.layer_out(layer);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        double* w = params.data(weight_name(layer));
        for (int i = 0; i < fan_in * fan_out; ++i) w[i] = rng.uniform(-bound, bound);
        // biases stay zero
    }
}

ParamVector init_params(const ModelArch& arch, std::uint64_t seed) {
    ParamVector params;
    add_velocity_segments(arch, params);
    init_velocity_segments(arch, params, seed);
    return params;
}

std::vector<double> embed_input(const ModelArch& arch, const double* x, double t) {
    std::vector<double> input;
    embed_into(arch, x, t, input);
    return input;
}

void forward(const ModelArch& arch, const ParamVector& params, const double* x, double t,
             double* v_out, ForwardCache& cache) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError("velocity forward: t = " + std::to_string(t) + " outside [0,1]");
    }
    embed_into(arch, x, t, cache.input);
    cache.pre.resize(static_cast<std::size_t>(arch.depth));
    cache.act.resize(static_cast<std::size_t>(arch.depth));

    const std::vector<double>* in = &cache.input;
    for (int layer = 0; layer < arch.depth; ++layer) {
        const int n_in = arch.layer_in(layer);
        const int n_out = arch.layer_out(layer);
        auto& pre = cache.pre[static_cast<std::size_t>(layer)];
        auto& act = cache.act[static_cast<std::size_t>(layer)];
        pre.resize(static_cast<std::size_t>(n_out));
        act.resize(static_cast<std::size_t>(n_out));
        const double* w = params.data(weight_name(layer));
        const double* b = params.data(bias_name(layer));
        for (int o = 0; o < n_out; ++o) {
            const double* wrow = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(n_in);
            double acc = b[o];
            for (int i = 0; i < n_in; ++i) acc += wrow[i] * (*in)[static_cast<std::size_t>(i)];
            pre[static_cast<std::size_t>(o)] = acc;
            if (!std::isfinite(acc)) {
                throw NumericalError("non-finite pre-activation", weight_name(layer));
            }
            act[static_cast<std::size_t>(o)] = (layer == arch.depth - 1) ? acc : nn::silu(acc);
        }
        in = &act;
    }
    const auto& out = cache.act[static_cast<std::size_t>(arch.depth - 1)];
    for (int i = 0; i < arch.dim; ++i) v_out[i] = out[static_cast<std::size_t>(i)];
}

std::vector<double> forward(const ModelArch& arch, const ParamVector& params,
                            const std::vector<double>& x, double t) {
    ForwardCache cache;
    std::vector<double> v(static_cast<std::size_t>(arch.dim));
    forward(arch, params, x.data(), t, v.data(), cache);
    return v;
}

void forward_batch(const ModelArch& arch, const ParamVector& params, const double* x,
                   const double* t, std::size_t n, double* v_out) {
    ForwardCache cache;
    const auto d = static_cast<std::size_t>(arch.dim);
    for (std::size_t r = 0; r < n; ++r) {
        forward(arch, params, x + r * d, t[r], v_out + r * d, cache);
    }
}

void backward(const ModelArch& arch, const ParamVector& params, const ForwardCache& cache,
              const double* dv, ParamVector* grad, double* dx_out, double* dt_out) {
    // delta = dL/d(pre-activation) of the current layer, walked backwards.
    std::vector<double> delta(cache.act.back().size());
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = dv[i];

    std::vector<double> delta_prev;
    for (int layer = arch.depth - 1; layer >= 0; --layer) {
        const int n_in = arch.layer_in(layer);
        const int n_out = arch.layer_out(layer);
        const auto& in = (layer == 0) ? cache.input : cache.act[static_cast<std::size_t>(layer - 1)];
        const double* w = params.data(weight_name(layer));

        if (grad != nullptr) {
            double* gw = grad->data(weight_name(layer));
            double* gb = grad->data(bias_name(layer));
            for (int o = 0; o < n_out; ++o) {
                const double dl = delta[static_cast<std::size_t>(o)];
                double* gwrow = gw + static_cast<std::size_t>(o) * static_cast<std::size_t>(n_in);
                for (int i = 0; i < n_in; ++i) gwrow[i] += dl * in[static_cast<std::size_t>(i)];
                gb[o] += dl;
            }
        }

        delta_prev.assign(static_cast<std::size_t>(n_in), 0.0);
        for (int o = 0; o < n_out; ++o) {
            const double dl = delta[static_cast<std::size_t>(o)];
            const double* wrow = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(n_in);
            for (int i = 0; i < n_in; ++i) delta_prev[static_cast<std::size_t>(i)] += dl * wrow[i];
        }
        if (layer > 0) {
            const auto& pre = cache.pre[static_cast<std::size_t>(layer - 1)];
            for (int i = 0; i < n_in; ++i) {
                delta_prev[static_cast<std::size_t>(i)] *=
                    nn::silu_grad(pre[static_cast<std::size_t>(i)]);
            }
        }
        delta.swap(delta_prev);
    }

    // delta now holds dL/d(embedded input); fold the time features into dt.
    if (dx_out != nullptr) {
        for (int i = 0; i < arch.dim; ++i) dx_out[i] = delta[static_cast<std::size_t>(i)];
    }
    if (dt_out != nullptr) {
        const double t = cache.input[static_cast<std::size_t>(arch.input_dim() - 1)];
        double dt = delta[static_cast<std::size_t>(arch.input_dim() - 1)];  // raw t channel
        double omega = kPi;
        for (int k = 0; k < arch.freqs; ++k) {
            const double ds = delta[static_cast<std::size_t>(arch.dim + 2 * k)];
            const double dc = delta[static_cast<std::size_t>(arch.dim + 2 * k + 1)];
            dt += ds * omega * std::cos(omega * t) - dc * omega * std::sin(omega * t);
            omega *= 2.0;
        }
        *dt_out = dt;
    }
}

void jacobian_x(const ModelArch& arch, const ParamVector& params, const double* x, double t,
                double* jac_out) {
    ForwardCache cache;
    std::vector<double> v(static_cast<std::size_t>(arch.dim));
    forward(arch, params, x, t, v.data(), cache);
    std::vector<double> dv(static_cast<std::size_t>(arch.dim), 0.0);
    std::vector<double> dx(static_cast<std::size_t>(arch.dim));
    for (int row = 0; row < arch.dim; ++row) {
        dv.assign(dv.size(), 0.0);
        dv[static_cast<std::size_t>(row)] = 1.0;
        backward(arch, params, cache, dv.data(), nullptr, dx.data(), nullptr);
        for (int col = 0; col < arch.dim; ++col) {
            jac_out[static_cast<std::size_t>(row) * static_cast<std::size_t>(arch.dim) +
                    static_cast<std::size_t>(col)] = dx[static_cast<std::size_t>(col)];
        }
    }
}

double divergence(const ModelArch& arch, const ParamVector& params, const double* x, double t) {
    ForwardCache cache;
    std::vector<double> v(static_cast<std::size_t>(arch.dim));
    forward(arch, params, x, t, v.data(), cache);
    std::vector<double> dv(static_cast<std::size_t>(arch.dim), 0.0);
    std::vector<double> dx(static_cast<std::size_t>(arch.dim));
    double trace = 0.0;
    for (int row = 0; row < arch.dim; ++row) {
        dv.assign(dv.size(), 0.0);
        dv[static_cast<std::size_t>(row)] = 1.0;
        backward(arch, params, cache, dv.data(), nullptr, dx.data(), nullptr);
        trace += dx[static_cast<std::size_t>(row)];
    }
    return trace;
}

}  // namespace tpcflow
