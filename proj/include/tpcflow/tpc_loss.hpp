#pragma once

#include <vector>

#include "tpcflow/program.hpp"
#include "tpcflow/train_config.hpp"

namespace tpcflow {

/// One minibatch with every random draw frozen in: endpoints, primary times,
/// and (optional) additive state noise for the primary and paired evaluations.
/// With the batch fixed, loss values and gradients are pure functions of the
/// parameters (the Bernoulli gate is passed separately by the caller).
struct LossBatch {
    int dim = 0;
    std::vector<EndpointPair> endpoints;
    std::vector<double> t;
    std::vector<double> eps_primary;  // batch x dim, empty when sigma_noise = 0
    std::vector<double> eps_paired;

    std::size_t size() const { return endpoints.size(); }
};

/// Draws a batch: endpoints and times from rng_data, perturbations from
/// rng_noise. Paired perturbations are drawn independently of the primary
/// ones; share_noise forces both evaluations to reuse the primary draw
/// (exposed for the variance laboratory's common-random-numbers comparison).
LossBatch assemble_batch(const DataSource& source, const TrainConfig& config, Rng& rng_data,
                         Rng& rng_noise, bool share_noise = false);

/// Per-batch objective values. total is
///   L_FM + gate * lambda_tpc * L_TPC + lambda_mono * surrogate
/// (plus the partner residual inside the gated term when paired_fm_residual
/// is set). fm_paired is NaN when the gate is closed and the pair was never
/// evaluated.
struct LossTerms {
    double fm = 0.0;
    double tpc = 0.0;
    double fm_paired = 0.0;
    double surrogate = 0.0;
    int mono_count = 0;
    double total = 0.0;
    bool gate = false;
};

/// Evaluates the full objective, optionally accumulating d total / d params
/// into grad (which must share the params layout and arrive zeroed or be
/// accumulated into deliberately). Exact reverse-mode throughout, including
/// the chain through t' = phi(t) into the paired path state.
LossTerms total_loss(const ModelArch& arch, const TrainConfig& config, const ParamVector& params,
                     const LossBatch& batch, bool gate, ParamVector* grad);

/// Mean squared flow-matching residual of the primary states only.
double fm_loss(const ModelArch& arch, const TrainConfig& config, const ParamVector& params,
               const LossBatch& batch, ParamVector* grad);

/// Mean squared velocity discrepancy across the configured pairing.
double tpc_pair_loss(const ModelArch& arch, const TrainConfig& config, const ParamVector& params,
                     const LossBatch& batch, ParamVector* grad);

// Programs binding a frozen batch (and frozen gate) for finite-difference
// verification; the contract is finite_diff_check <= 1e-4.
DifferentiableProgram fm_loss_program(const ModelArch& arch, const TrainConfig& config,
                                      LossBatch batch);
DifferentiableProgram tpc_pair_loss_program(const ModelArch& arch, const TrainConfig& config,
                                            LossBatch batch);
DifferentiableProgram total_loss_program(const ModelArch& arch, const TrainConfig& config,
                                         LossBatch batch, bool gate);
/// Mean of phi over the probe times, differentiable in the phi segments.
DifferentiableProgram phi_program(const PairingSpec& spec, std::vector<double> probe_times);

}  // namespace tpcflow
