#pragma once

#include <cstdint>
#include <string>

#include "tpcflow/pairing.hpp"
#include "tpcflow/paths.hpp"
#include "tpcflow/velocity_model.hpp"

namespace tpcflow {

/// Everything a training run needs, mirrored 1:1 by the JSON config files.
struct TrainConfig {
    // objective
    double lambda_tpc = 0.10;
    double p_tpc = 0.75;
    double lambda_mono = 0.001;
    PairingSpec pairing{PairingMode::Learned, 8, 32};
    bool paired_fm_residual = false;  // adds the partner's own flow-matching
                                      // residual to the gated term

    // path and data
    PathKind path = PathKind::linear();
    std::string dataset = "two_moons";  // two_moons|checkerboard|eight_gaussians|std_normal|csv
    std::string dataset_csv;
    std::string coupling_csv;           // endpoint table when path = coupled
    long dataset_n = 20000;
    double dataset_noise = 0.05;
    double sigma_noise = 0.0;           // additive state perturbation scale

    // model
    ModelArch arch;

    // optimizer
    double lr = 1e-3;
    double lr_phi = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 10.0;

    // run shape
    long steps = 20000;
    int batch_size = 64;
    std::uint64_t seed = 1;
    long checkpoint_every = 1000;
    int variance_window = 200;

    /// Throws ConfigError on any invalid field.
    void validate() const;
};

TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json(const TrainConfig& config);

}  // namespace tpcflow
