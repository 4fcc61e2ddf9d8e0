#include "tpcflow/train_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tpcflow/errors.hpp"

namespace tpcflow {

namespace {

std::string path_kind_name(const PathKind& kind) {
    switch (kind.tag) {
        case PathKindTag::LinearInterp: return "linear";
        case PathKindTag::OTSigma: return "ot";
        case PathKindTag::VPDiffusion: return "vp";
        case PathKindTag::Coupled: return "coupled";
    }
    return "linear";
}

}  // namespace

void TrainConfig::validate() const {
    if (lambda_tpc < 0.0) throw ConfigError("lambda_tpc must be >= 0");
    if (!(p_tpc >= 0.0 && p_tpc <= 1.0)) throw ConfigError("p_tpc must lie in [0,1]");
    if (lambda_mono < 0.0) throw ConfigError("lambda_mono must be >= 0");
    if (sigma_noise < 0.0) throw ConfigError("sigma_noise must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (steps < 0) throw ConfigError("steps must be >= 0");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    if (variance_window < 2) throw ConfigError("variance_window must be >= 2");
    if (lr <= 0.0 || lr_phi <= 0.0) throw ConfigError("learning rates must be > 0");
    if (clip_norm <= 0.0) throw ConfigError("clip_norm must be > 0");
    if (dataset_n < 1) throw ConfigError("dataset_n must be >= 1");
    if (pairing.learned()) {
        if (pairing.hidden < 1) throw ConfigError("pairing hidden width must be >= 1");
        if (pairing.mono_grid < 2) throw ConfigError("pairing mono grid must be >= 2");
    }
    arch.validate();
    if (path.tag == PathKindTag::Coupled && coupling_csv.empty()) {
        throw ConfigError("path 'coupled' requires coupling_csv");
    }
    if (dataset == "csv" && dataset_csv.empty()) {
        throw ConfigError("dataset 'csv' requires dataset_csv");
    }
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }

    TrainConfig c;
    try {
        c.lambda_tpc = j.value("lambda_tpc", c.lambda_tpc);
        c.p_tpc = j.value("p_tpc", c.p_tpc);
        c.lambda_mono = j.value("lambda_mono", c.lambda_mono);
        c.paired_fm_residual = j.value("paired_fm_residual", c.paired_fm_residual);
        if (j.contains("pairing")) c.pairing.mode = pairing_mode_from_string(j.at("pairing"));
        c.pairing.hidden = j.value("pairing_hidden", c.pairing.hidden);
        c.pairing.mono_grid = j.value("mono_grid", c.pairing.mono_grid);

        const std::string path_name = j.value("path", std::string("linear"));
        if (path_name == "linear") {
            c.path = PathKind::linear();
        } else if (path_name == "ot") {
            c.path = PathKind::ot(j.value("sigma_min", 0.0));
        } else if (path_name == "vp") {
            c.path = PathKind::vp(j.value("beta_min", 0.1), j.value("beta_max", 20.0));
        } else if (path_name == "coupled") {
            c.path = PathKind::coupled();
        } else {
            throw ConfigError("unknown path kind '" + path_name + "'");
        }

        c.dataset = j.value("dataset", c.dataset);
        c.dataset_csv = j.value("dataset_csv", c.dataset_csv);
        c.coupling_csv = j.value("coupling_csv", c.coupling_csv);
        c.dataset_n = j.value("dataset_n", c.dataset_n);
        c.dataset_noise = j.value("dataset_noise", c.dataset_noise);
        c.sigma_noise = j.value("sigma_noise", c.sigma_noise);

        if (j.contains("arch")) {
            const auto& a = j.at("arch");
            c.arch.dim = a.value("dim", c.arch.dim);
            c.arch.hidden = a.value("hidden", c.arch.hidden);
            c.arch.depth = a.value("depth", c.arch.depth);
            c.arch.freqs = a.value("freqs", c.arch.freqs);
        }

        c.lr = j.value("lr", c.lr);
        c.lr_phi = j.value("lr_phi", c.lr_phi);
        c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
        c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
        c.adam_eps = j.value("adam_eps", c.adam_eps);
        c.clip_norm = j.value("clip_norm", c.clip_norm);

        c.steps = j.value("steps", c.steps);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.seed = j.value("seed", c.seed);
        c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
        c.variance_window = j.value("variance_window", c.variance_window);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    c.validate();
    return c;
}

std::string train_config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["lambda_tpc"] = c.lambda_tpc;
    j["p_tpc"] = c.p_tpc;
    j["lambda_mono"] = c.lambda_mono;
    j["paired_fm_residual"] = c.paired_fm_residual;
    j["pairing"] = to_string(c.pairing.mode);
    j["pairing_hidden"] = c.pairing.hidden;
    j["mono_grid"] = c.pairing.mono_grid;
    j["path"] = path_kind_name(c.path);
    j["sigma_min"] = c.path.sigma_min;
    j["beta_min"] = c.path.beta_min;
    j["beta_max"] = c.path.beta_max;
    j["dataset"] = c.dataset;
    j["dataset_csv"] = c.dataset_csv;
    j["coupling_csv"] = c.coupling_csv;
    j["dataset_n"] = c.dataset_n;
    j["dataset_noise"] = c.dataset_noise;
    j["sigma_noise"] = c.sigma_noise;
    j["arch"] = {{"dim", c.arch.dim},
                 {"hidden", c.arch.hidden},
                 {"depth", c.arch.depth},
                 {"freqs", c.arch.freqs}};
    j["lr"] = c.lr;
    j["lr_phi"] = c.lr_phi;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_eps"] = c.adam_eps;
    j["clip_norm"] = c.clip_norm;
    j["steps"] = c.steps;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["checkpoint_every"] = c.checkpoint_every;
    j["variance_window"] = c.variance_window;
    return j.dump(2);
}

}  // namespace tpcflow
