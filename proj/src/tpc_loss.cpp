#include "tpcflow/tpc_loss.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <utility>

#include "tpcflow/errors.hpp"

namespace tpcflow {

namespace {

double squared_norm(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
    return acc;
}

}  // namespace

LossBatch assemble_batch(const DataSource& source, const TrainConfig& config, Rng& rng_data,
                         Rng& rng_noise, bool share_noise) {
    LossBatch batch;
    batch.dim = source.dim;
    batch.endpoints = sample_endpoints(source, static_cast<std::size_t>(config.batch_size), rng_data);
    batch.t.resize(batch.endpoints.size());
    for (auto& t : batch.t) t = rng_data.uniform01();
    if (config.sigma_noise > 0.0) {
        const std::size_t total = batch.endpoints.size() * static_cast<std::size_t>(batch.dim);
        batch.eps_primary.resize(total);
        batch.eps_paired.resize(total);
        for (auto& e : batch.eps_primary) e = config.sigma_noise * rng_noise.normal();
        if (share_noise) {
            batch.eps_paired = batch.eps_primary;
        } else {
            for (auto& e : batch.eps_paired) e = config.sigma_noise * rng_noise.normal();
        }
    }
    return batch;
}

double fm_loss(const ModelArch& arch, const TrainConfig& config, const ParamVector& params,
               const LossBatch& batch, ParamVector* grad) {
    if (batch.size() == 0) throw ConfigError("fm_loss: empty batch");
    const auto d = static_cast<std::size_t>(arch.dim);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    ForwardCache cache;
    std::vector<double> x(d), u(d), v(d), cot(d);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        path_state(config.path, batch.endpoints[i], batch.t[i], x.data(), u.data());
        if (!batch.eps_primary.empty()) {
            for (std::size_t c = 0; c < d; ++c) x[c] += batch.eps_primary[i * d + c];
        }
        forward(arch, params, x.data(), batch.t[i], v.data(), cache);
        for (std::size_t c = 0; c < d; ++c) {
            const double r = v[c] - u[c];
            loss += r * r;
            cot[c] = 2.0 * inv_b * r;
        }
        if (grad != nullptr) backward(arch, params, cache, cot.data(), grad, nullptr, nullptr);
    }
    return loss * inv_b;
}

double tpc_pair_loss(const ModelArch& arch, const TrainConfig& config, const ParamVector& params,
                     const LossBatch& batch, ParamVector* grad) {
    // Pair term in isolation (unit weight, gate open); shares the exact
    // per-row machinery of total_loss below.
    TrainConfig probe = config;
    probe.lambda_tpc = 1.0;
    probe.lambda_mono = 0.0;
    probe.paired_fm_residual = false;
    ParamVector fm_only = params.zeros_like();
    // Subtract the FM part so only the pair term remains.
    const double fm = fm_loss(arch, probe, params, batch, grad ? &fm_only : nullptr);
    const LossTerms terms = total_loss(arch, probe, params, batch, /*gate=*/true, grad);
    if (grad != nullptr) grad->axpy(-1.0, fm_only);
    (void)fm;
    return terms.tpc;
}

LossTerms total_loss(const ModelArch& arch, const TrainConfig& config, const ParamVector& params,
                     const LossBatch& batch, bool gate, ParamVector* grad) {
    if (batch.size() == 0) throw ConfigError("total_loss: empty batch");
    const auto d = static_cast<std::size_t>(arch.dim);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const bool learned = config.pairing.learned();
    const bool eval_pair = gate;

    LossTerms terms;
    terms.gate = gate;
    terms.fm_paired = std::numeric_limits<double>::quiet_NaN();

    ForwardCache cache_p, cache_q;
    std::vector<double> xp(d), up(d), vp(d), xq(d), uq(d), vq(d);
    std::vector<double> cot_p(d), cot_q(d), dxq(d), dudt(d);
    PhiGrad phi_grad;

    double fm_acc = 0.0, tpc_acc = 0.0, fm_q_acc = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const EndpointPair& ep = batch.endpoints[i];
        const double t = batch.t[i];
        path_state(config.path, ep, t, xp.data(), up.data());
        if (!batch.eps_primary.empty()) {
            for (std::size_t c = 0; c < d; ++c) xp[c] += batch.eps_primary[i * d + c];
        }
        forward(arch, params, xp.data(), t, vp.data(), cache_p);
        for (std::size_t c = 0; c < d; ++c) {
            const double r = vp[c] - up[c];
            fm_acc += r * r;
            cot_p[c] = 2.0 * inv_b * r;
        }

        if (eval_pair) {
            const double tq = learned ? phi_eval(config.pairing, params, t, grad ? &phi_grad : nullptr)
                                      : psi_fixed(t);
            path_state(config.path, ep, tq, xq.data(), uq.data());
            if (!batch.eps_paired.empty()) {
                for (std::size_t c = 0; c < d; ++c) xq[c] += batch.eps_paired[i * d + c];
            }
            forward(arch, params, xq.data(), tq, vq.data(), cache_q);

            for (std::size_t c = 0; c < d; ++c) {
                const double diff = vp[c] - vq[c];
                tpc_acc += diff * diff;
                const double w = 2.0 * inv_b * config.lambda_tpc;
                cot_p[c] += w * diff;
                cot_q[c] = -w * diff;
            }
            const double rq_scale = 2.0 * inv_b;
            for (std::size_t c = 0; c < d; ++c) {
                const double rq = vq[c] - uq[c];
                fm_q_acc += rq * rq;
                if (config.paired_fm_residual) cot_q[c] += rq_scale * rq;
            }

            if (grad != nullptr) {
                double dt_model = 0.0;
                backward(arch, params, cache_q, cot_q.data(), grad,
                         learned ? dxq.data() : nullptr, learned ? &dt_model : nullptr);
                if (learned) {
                    // tq moves the paired state along the path (dPhi/dt = u)
                    // and, for the paired residual, the target u itself.
                    double dt_total = dt_model;
                    for (std::size_t c = 0; c < d; ++c) dt_total += dxq[c] * uq[c];
                    if (config.paired_fm_residual) {
                        path_velocity_rate(config.path, ep, tq, dudt.data());
                        for (std::size_t c = 0; c < d; ++c) {
                            dt_total -= rq_scale * (vq[c] - uq[c]) * dudt[c];
                        }
                    }
                    double* ga = grad->data("phi.a_raw");
                    double* gb = grad->data("phi.b");
                    double* gc = grad->data("phi.c");
                    for (int h = 0; h < config.pairing.hidden; ++h) {
                        ga[h] += dt_total * phi_grad.d_a_raw[static_cast<std::size_t>(h)];
                        gb[h] += dt_total * phi_grad.d_b[static_cast<std::size_t>(h)];
                    }
                    gc[0] += dt_total * phi_grad.d_c;
                }
            }
        }
        if (grad != nullptr) backward(arch, params, cache_p, cot_p.data(), grad, nullptr, nullptr);
    }

    terms.fm = fm_acc * inv_b;
    terms.total = terms.fm;
    if (eval_pair) {
        terms.tpc = tpc_acc * inv_b;
        terms.fm_paired = fm_q_acc * inv_b;
        terms.total += config.lambda_tpc * terms.tpc;
        if (config.paired_fm_residual) terms.total += terms.fm_paired;
    }
    if (learned) {
        ParamVector* mono_grad = nullptr;
        ParamVector scratch;
        if (grad != nullptr && config.lambda_mono > 0.0) {
            scratch = params.zeros_like();
            mono_grad = &scratch;
        }
        const MonoPenalty mono =
            mono_penalty(config.pairing, params, config.pairing.mono_grid, mono_grad);
        terms.surrogate = mono.surrogate;
        terms.mono_count = mono.count;
        terms.total += config.lambda_mono * mono.surrogate;
        if (mono_grad != nullptr) grad->axpy(config.lambda_mono, scratch);
    }
    if (!std::isfinite(terms.total)) throw NumericalError("total_loss produced non-finite value");
    return terms;
}

DifferentiableProgram fm_loss_program(const ModelArch& arch, const TrainConfig& config,
                                      LossBatch batch) {
    auto shared = std::make_shared<LossBatch>(std::move(batch));
    DifferentiableProgram prog;
    prog.forward = [arch, config, shared](const ParamVector& p) {
        return fm_loss(arch, config, p, *shared, nullptr);
    };
    prog.gradient = [arch, config, shared](const ParamVector& p) {
        ParamVector g = p.zeros_like();
        fm_loss(arch, config, p, *shared, &g);
        return g;
    };
    return prog;
}

DifferentiableProgram tpc_pair_loss_program(const ModelArch& arch, const TrainConfig& config,
                                            LossBatch batch) {
    auto shared = std::make_shared<LossBatch>(std::move(batch));
    DifferentiableProgram prog;
    prog.forward = [arch, config, shared](const ParamVector& p) {
        return tpc_pair_loss(arch, config, p, *shared, nullptr);
    };
    prog.gradient = [arch, config, shared](const ParamVector& p) {
        ParamVector g = p.zeros_like();
        tpc_pair_loss(arch, config, p, *shared, &g);
        return g;
    };
    return prog;
}

DifferentiableProgram total_loss_program(const ModelArch& arch, const TrainConfig& config,
                                         LossBatch batch, bool gate) {
    auto shared = std::make_shared<LossBatch>(std::move(batch));
    DifferentiableProgram prog;
    prog.forward = [arch, config, shared, gate](const ParamVector& p) {
        return total_loss(arch, config, p, *shared, gate, nullptr).total;
    };
    prog.gradient = [arch, config, shared, gate](const ParamVector& p) {
        ParamVector g = p.zeros_like();
        total_loss(arch, config, p, *shared, gate, &g);
        return g;
    };
    return prog;
}

DifferentiableProgram phi_program(const PairingSpec& spec, std::vector<double> probe_times) {
    auto shared = std::make_shared<std::vector<double>>(std::move(probe_times));
    DifferentiableProgram prog;
    prog.forward = [spec, shared](const ParamVector& p) {
        double acc = 0.0;
        for (double t : *shared) acc += phi_eval(spec, p, t, nullptr);
        return acc / static_cast<double>(shared->size());
    };
    prog.gradient = [spec, shared](const ParamVector& p) {
        ParamVector g = p.zeros_like();
        const double inv_n = 1.0 / static_cast<double>(shared->size());
        PhiGrad pg;
        double* ga = g.data("phi.a_raw");
        double* gb = g.data("phi.b");
        double* gc = g.data("phi.c");
        for (double t : *shared) {
            phi_eval(spec, p, t, &pg);
            for (int h = 0; h < spec.hidden; ++h) {
                ga[h] += inv_n * pg.d_a_raw[static_cast<std::size_t>(h)];
                gb[h] += inv_n * pg.d_b[static_cast<std::size_t>(h)];
            }
            gc[0] += inv_n * pg.d_c;
        }
        return g;
    };
    return prog;
}

}  // namespace tpcflow
