#include "tpcflow/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "tpcflow/adam.hpp"
#include "tpcflow/csv.hpp"
#include "tpcflow/datasets2d.hpp"
#include "tpcflow/errors.hpp"

namespace tpcflow {

namespace {

std::string checkpoint_name(long step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_%08ld.tpcf", step);
    return buf;
}

Checkpoint make_checkpoint(const TrainConfig& config, const ParamVector& params, long step) {
    Checkpoint ckpt;
    ckpt.arch = config.arch;
    ckpt.pairing = config.pairing;
    ckpt.seed = config.seed;
    ckpt.step = step;
    ckpt.params = params;
    return ckpt;
}

}  // namespace

VarianceLogEntry grad_variance_window(const std::vector<double>& grad_norms, long step,
                                      int window) {
    if (window < 2) throw ConfigError("grad_variance_window: window must be >= 2");
    if (grad_norms.size() < static_cast<std::size_t>(window)) {
        throw ConfigError("grad_variance_window: fewer recorded steps than window");
    }
    const std::size_t lo = grad_norms.size() - static_cast<std::size_t>(window);
    double mean = 0.0;
    for (std::size_t i = lo; i < grad_norms.size(); ++i) mean += grad_norms[i];
    mean /= static_cast<double>(window);
    double var = 0.0;
    for (std::size_t i = lo; i < grad_norms.size(); ++i) {
        const double dev = grad_norms[i] - mean;
        var += dev * dev;
    }
    var /= static_cast<double>(window - 1);
    return {step, window, mean, var};
}

DataSource make_data_source(const TrainConfig& config) {
    if (config.path.tag == PathKindTag::Coupled) {
        return DataSource::load_csv(config.coupling_csv, /*coupling=*/true);
    }
    if (config.dataset == "csv") {
        return DataSource::load_csv(config.dataset_csv, /*coupling=*/false);
    }
    Dataset2D ds;
    ds.name = config.dataset;
    ds.n = static_cast<std::size_t>(config.dataset_n);
    ds.noise = config.dataset_noise;
    ds.seed = config.seed;
    return DataSource::from_points(2, generate(ds));
}

TrainResult train(const TrainConfig& config, const DataSource& source,
                  const std::optional<std::string>& out_dir) {
    config.validate();
    if (source.dim != config.arch.dim) {
        throw ConfigError("train: data dimension " + std::to_string(source.dim) +
                          " does not match arch dim " + std::to_string(config.arch.dim));
    }

    // theta and phi share one ParamVector; phi segments exist only in
    // learned-pairing mode.
    ParamVector params;
    add_velocity_segments(config.arch, params);
    add_pairing_segments(config.pairing, params);
    init_velocity_segments(config.arch, params, config.seed);

    Adam opt(params, config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps);
    if (config.pairing.learned()) {
        opt.set_segment_lr("phi.a_raw", config.lr_phi);
        opt.set_segment_lr("phi.b", config.lr_phi);
        opt.set_segment_lr("phi.c", config.lr_phi);
    }

    Rng root(config.seed);
    Rng rng_data = root.child("data");
    Rng rng_gate = root.child("gate");
    Rng rng_noise = root.child("noise");

    TrainResult result;
    result.telemetry.reserve(static_cast<std::size_t>(config.steps));
    std::vector<double> grad_norms;
    grad_norms.reserve(static_cast<std::size_t>(config.steps));

    std::ofstream telemetry_file, variance_file;
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        telemetry_file.open(*out_dir + "/telemetry.csv");
        telemetry_file << "step,b,L_FM,L_TPC,surrogate,grad_norm,wall_ms,L_FM_paired\n";
        variance_file.open(*out_dir + "/variance_log.csv");
        variance_file << "step,window,grad_norm_mean,grad_norm_var\n";
    }
    auto flush_row = [&](const StepTelemetry& row) {
        if (!telemetry_file.is_open()) return;
        telemetry_file << row.step << ',' << (row.gate ? 1 : 0) << ',' << format_double(row.fm)
                       << ',' << format_double(row.tpc) << ',' << format_double(row.surrogate)
                       << ',' << format_double(row.grad_norm) << ',' << format_double(row.wall_ms)
                       << ',' << format_double(row.fm_paired) << '\n';
    };

    ParamVector last_good = params;
    ParamVector grad = params.zeros_like();

    for (long step = 0; step < config.steps; ++step) {
        const auto wall_start = std::chrono::steady_clock::now();
        StepTelemetry row;
        row.step = step;
        row.fm_paired = std::numeric_limits<double>::quiet_NaN();

        // One gate draw per minibatch, recorded before the loss can throw.
        const bool gate = rng_gate.bernoulli(config.p_tpc);
        row.gate = gate;

        bool failed = false;
        try {
            const LossBatch batch = assemble_batch(source, config, rng_data, rng_noise);
            grad = params.zeros_like();
            const LossTerms terms = total_loss(config.arch, config, params, batch, gate, &grad);
            row.fm = terms.fm;
            row.tpc = terms.tpc;
            row.surrogate = terms.surrogate;
            row.fm_paired = terms.fm_paired;

            double gnorm = grad.norm2();
            if (!std::isfinite(gnorm)) throw NumericalError("non-finite gradient norm");
            if (gnorm > config.clip_norm) {
                grad *= config.clip_norm / gnorm;
                gnorm = config.clip_norm;
            }
            row.grad_norm = gnorm;

            last_good = params;
            opt.step(params, grad);
            params.check_finite("parameters after update");
        } catch (const NumericalError&) {
            failed = true;
        }

        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                wall_start)
                          .count();
        result.telemetry.push_back(row);
        flush_row(row);

        if (failed) {
            params = last_good;  // retain the last good state
            result.nan_abort = true;
            result.steps_run = step;
            break;
        }

        grad_norms.push_back(row.grad_norm);
        if (grad_norms.size() >= static_cast<std::size_t>(config.variance_window)) {
            const VarianceLogEntry entry =
                grad_variance_window(grad_norms, step, config.variance_window);
            result.variance_log.push_back(entry);
            if (variance_file.is_open()) {
                variance_file << entry.step << ',' << entry.window << ','
                              << format_double(entry.grad_norm_mean) << ','
                              << format_double(entry.grad_norm_var) << '\n';
            }
        }
        result.steps_run = step + 1;

        if (out_dir && (step + 1) % config.checkpoint_every == 0) {
            save_checkpoint(*out_dir + "/" + checkpoint_name(step + 1),
                            make_checkpoint(config, params, step + 1));
        }
    }

    result.checkpoint = make_checkpoint(config, params, result.steps_run);
    if (out_dir) save_checkpoint(*out_dir + "/final.tpcf", result.checkpoint);
    return result;
}

ReflowResult reflow(const Checkpoint& ckpt, std::size_t n_pairs, const SolverSettings& solver,
                    std::uint64_t seed) {
    const GenerateResult gen =
        generate_samples(ckpt.arch, ckpt.params, n_pairs, seed, solver, false);
    const auto d = static_cast<std::size_t>(ckpt.arch.dim);
    std::vector<double> x0;
    x0.reserve(gen.ok_rows.size() * d);
    for (const std::size_t row : gen.ok_rows) {
        for (std::size_t c = 0; c < d; ++c) x0.push_back(gen.base_points[row * d + c]);
    }
    ReflowResult result;
    result.coupling = DataSource::from_coupling(ckpt.arch.dim, std::move(x0), gen.points);
    result.skipped = gen.failures;
    result.nfe_total = gen.nfe_total;
    return result;
}

void write_telemetry_csv(const std::string& path, const std::vector<StepTelemetry>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write telemetry CSV: " + path);
    out << "step,b,L_FM,L_TPC,surrogate,grad_norm,wall_ms,L_FM_paired\n";
    for (const auto& row : rows) {
        out << row.step << ',' << (row.gate ? 1 : 0) << ',' << format_double(row.fm) << ','
            << format_double(row.tpc) << ',' << format_double(row.surrogate) << ','
            << format_double(row.grad_norm) << ',' << format_double(row.wall_ms) << ','
            << format_double(row.fm_paired) << '\n';
    }
}

void write_variance_csv(const std::string& path, const std::vector<VarianceLogEntry>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write variance CSV: " + path);
    out << "step,window,grad_norm_mean,grad_norm_var\n";
    for (const auto& row : rows) {
        out << row.step << ',' << row.window << ',' << format_double(row.grad_norm_mean) << ','
            << format_double(row.grad_norm_var) << '\n';
    }
}

void write_coupling_csv(const std::string& path, const DataSource& coupling) {
    if (!coupling.coupled) throw DataError("write_coupling_csv: source is not a coupling");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write coupling CSV: " + path);
    const auto d = static_cast<std::size_t>(coupling.dim);
    for (std::size_t c = 0; c < d; ++c) out << "x0_" << (c + 1) << ',';
    for (std::size_t c = 0; c < d; ++c) out << "x1_" << (c + 1) << (c + 1 < d ? "," : "");
    out << '\n';
    for (std::size_t r = 0; r < coupling.size(); ++r) {
        for (std::size_t c = 0; c < d; ++c) out << format_double(coupling.x0_rows[r * d + c]) << ',';
        for (std::size_t c = 0; c < d; ++c) {
            out << format_double(coupling.x1_rows[r * d + c]) << (c + 1 < d ? "," : "");
        }
        out << '\n';
    }
}

}  // namespace tpcflow
