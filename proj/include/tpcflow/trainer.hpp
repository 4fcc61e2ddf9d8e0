#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tpcflow/checkpoint.hpp"
#include "tpcflow/generate.hpp"
#include "tpcflow/tpc_loss.hpp"

namespace tpcflow {

/// One telemetry row per optimizer step (mirrors the telemetry CSV columns).
struct StepTelemetry {
    long step = 0;
    bool gate = false;
    double fm = 0.0;
    double tpc = 0.0;
    double surrogate = 0.0;
    double grad_norm = 0.0;
    double wall_ms = 0.0;
    double fm_paired = 0.0;  // NaN when the pair was not evaluated
};

struct VarianceLogEntry {
    long step = 0;
    int window = 0;
    double grad_norm_mean = 0.0;
    double grad_norm_var = 0.0;
};

/// Variance of the trailing `window` gradient norms ending at `step`
/// (unbiased, divisor window-1). Requires at least `window` recorded values.
VarianceLogEntry grad_variance_window(const std::vector<double>& grad_norms, long step, int window);

struct TrainResult {
    Checkpoint checkpoint;  // final parameters (or last good ones on abort)
    std::vector<StepTelemetry> telemetry;
    std::vector<VarianceLogEntry> variance_log;
    long steps_run = 0;
    bool nan_abort = false;
};

/// Runs Adam over theta (+ phi when pairing is learned) for config.steps
/// minibatches. Deterministic in config.seed: endpoints/times, the Bernoulli
/// gate, state noise and initialization each draw from their own named child
/// stream. When out_dir is set, writes telemetry.csv, variance_log.csv and
/// periodic checkpoints (ckpt_<step>.tpcf plus final.tpcf) as it goes.
/// A non-finite loss or parameter aborts the run, keeping the last good
/// parameters in the returned checkpoint (and on disk).
TrainResult train(const TrainConfig& config, const DataSource& source,
                  const std::optional<std::string>& out_dir = std::nullopt);

/// Builds the configured data source (generator datasets, CSV datasets, or a
/// coupling table) with the dataset stream of the run seed.
DataSource make_data_source(const TrainConfig& config);

struct ReflowResult {
    DataSource coupling;  // (z0, z1) rows for retraining (path kind Coupled)
    long skipped = 0;
    long nfe_total = 0;
};

/// Draws n_pairs base samples, transports them through the checkpointed flow,
/// and returns the (z0, z1) coupling used to train the next rectification
/// depth. Failed trajectories are skipped and counted.
ReflowResult reflow(const Checkpoint& ckpt, std::size_t n_pairs, const SolverSettings& solver,
                    std::uint64_t seed);

void write_telemetry_csv(const std::string& path, const std::vector<StepTelemetry>& rows);
void write_variance_csv(const std::string& path, const std::vector<VarianceLogEntry>& rows);
void write_coupling_csv(const std::string& path, const DataSource& coupling);

}  // namespace tpcflow
