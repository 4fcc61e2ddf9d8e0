// tpcflow: train / sample / eval / variance / reflow over one model stack.
//
// Exit codes (stable contract):
//   0 success, 1 configuration error, 2 numeric abort,
//   3 integration failures above threshold, 4 degenerate statistics.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tpcflow/checkpoint.hpp"
#include "tpcflow/csv.hpp"
#include "tpcflow/energy_distance.hpp"
#include "tpcflow/errors.hpp"
#include "tpcflow/likelihood.hpp"
#include "tpcflow/trainer.hpp"
#include "tpcflow/variance_lab.hpp"
#include "tpcflow/version.hpp"

namespace {

using nlohmann::json;
using namespace tpcflow;

std::string now_utc_iso() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
}

/// Every subcommand drops a manifest into its output directory before doing
/// real work; the config snapshot is byte-identical to the input file, so
/// snapshot + seed replay the run.
struct Manifest {
    std::string out_dir;
    json doc;

    Manifest(const std::string& command, const std::string& out, const std::string& config_snapshot,
             std::uint64_t seed, const json& args) {
        out_dir = out;
        std::filesystem::create_directories(out);
        doc["command"] = command;
        doc["config_snapshot"] = config_snapshot;
        doc["git_describe"] = kGitDescribe;
        doc["seed"] = seed;
        doc["args"] = args;
        doc["started_utc"] = now_utc_iso();
        doc["ended_utc"] = nullptr;
        doc["outputs"] = json::array();
        flush();
    }

    void add_output(const std::string& path) {
        doc["outputs"].push_back(path);
        flush();
    }

    void finish() {
        doc["ended_utc"] = now_utc_iso();
        flush();
    }

    void flush() const { write_file(out_dir + "/manifest.json", doc.dump(2) + "\n"); }
};

struct SolverArgs {
    std::string solver = "rk45";
    int steps = 100;
    double atol = 1e-5;
    double rtol = 1e-5;

    SolverSettings settings() const {
        SolverSettings s;
        if (solver == "euler") {
            s.adaptive = false;
            s.euler_steps = steps;
        } else if (solver == "rk45") {
            s.adaptive = true;
            s.rk45.atol = atol;
            s.rk45.rtol = rtol;
        } else {
            throw ConfigError("unknown solver '" + solver + "' (expected euler|rk45)");
        }
        return s;
    }

    json to_json() const {
        return {{"solver", solver}, {"steps", steps}, {"atol", atol}, {"rtol", rtol}};
    }
};

void write_samples_csv(const std::string& path, const std::vector<double>& points,
                       std::size_t dim) {
    CsvTable table;
    for (std::size_t c = 0; c < dim; ++c) table.columns.push_back("x" + std::to_string(c + 1));
    table.values = points;
    write_csv(path, table);
}

void write_trajectories_csv(const std::string& path, const std::vector<Trajectory>& trajs,
                            std::size_t dim) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trajectory CSV: " + path);
    out << "traj_id,t";
    for (std::size_t c = 0; c < dim; ++c) out << ",x" << (c + 1);
    out << '\n';
    for (std::size_t id = 0; id < trajs.size(); ++id) {
        const auto& traj = trajs[id];
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            out << id << ',' << format_double(traj.times[k]);
            for (std::size_t c = 0; c < dim; ++c) out << ',' << format_double(traj.states[k][c]);
            out << '\n';
        }
    }
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override) {
    const std::string snapshot = read_file(config_path);
    TrainConfig config = load_train_config(config_path);
    if (seed_override) config.seed = *seed_override;

    Manifest manifest("train", out_dir, snapshot, config.seed,
                      json{{"config", config_path}, {"out", out_dir}});
    manifest.add_output("telemetry.csv");
    manifest.add_output("variance_log.csv");
    manifest.add_output("final.tpcf");

    const DataSource source = make_data_source(config);
    const TrainResult result = train(config, source, out_dir);

    json metrics;
    metrics["steps_run"] = result.steps_run;
    metrics["nan_abort"] = result.nan_abort;
    if (!result.telemetry.empty()) {
        metrics["final_fm_loss"] = result.telemetry.back().fm;
        metrics["final_grad_norm"] = result.telemetry.back().grad_norm;
    }
    write_file(out_dir + "/train_summary.json", metrics.dump(2) + "\n");
    manifest.add_output("train_summary.json");
    manifest.finish();

    if (result.nan_abort) {
        std::cerr << "train: aborted on non-finite loss at step " << result.steps_run
                  << "; last good checkpoint retained\n";
        return 2;
    }
    std::cout << "train: " << result.steps_run << " steps, final checkpoint " << out_dir
              << "/final.tpcf\n";
    return 0;
}

int cmd_sample(const std::string& ckpt_path, const SolverArgs& solver, std::size_t n,
               const std::string& out_dir, std::uint64_t seed, bool dump_trajectories) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    Manifest manifest("sample", out_dir, "", seed,
                      json{{"checkpoint", ckpt_path}, {"n", n}, {"solver", solver.to_json()},
                           {"dump_trajectories", dump_trajectories}});

    const auto wall_start = std::chrono::steady_clock::now();
    const GenerateResult gen = generate_samples(ckpt.arch, ckpt.params, n, seed, solver.settings(),
                                                dump_trajectories);
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

    write_samples_csv(out_dir + "/samples.csv", gen.points, static_cast<std::size_t>(ckpt.arch.dim));
    manifest.add_output("samples.csv");
    if (dump_trajectories) {
        write_trajectories_csv(out_dir + "/trajectories.csv", gen.trajectories,
                               static_cast<std::size_t>(ckpt.arch.dim));
        manifest.add_output("trajectories.csv");
    }

    const std::size_t n_ok = gen.ok_rows.size();
    json summary;
    summary["n_requested"] = n;
    summary["n_generated"] = n_ok;
    summary["failures"] = gen.failures;
    summary["nfe_total"] = gen.nfe_total;
    summary["nfe_mean"] = n_ok > 0 ? static_cast<double>(gen.nfe_total) / static_cast<double>(n_ok)
                                   : 0.0;
    summary["wall_time_s"] = wall_s;
    write_file(out_dir + "/sample_summary.json", summary.dump(2) + "\n");
    manifest.add_output("sample_summary.json");
    manifest.finish();

    std::cout << "sample: " << n_ok << "/" << n << " points, nfe_total " << gen.nfe_total
              << ", nfe_mean " << summary["nfe_mean"] << "\n";
    if (n > 0 && static_cast<double>(gen.failures) > 0.01 * static_cast<double>(n)) {
        std::cerr << "sample: " << gen.failures << " integration failures exceed 1%\n";
        return 3;
    }
    return 0;
}

int cmd_eval(const std::string& samples_path, const std::string& reference_path,
             const std::string& ckpt_path, const std::string& out_dir, std::size_t nll_max) {
    const CsvTable samples = read_csv(samples_path);
    const CsvTable reference = read_csv(reference_path);
    if (samples.cols() != reference.cols()) {
        throw ConfigError("eval: dimension mismatch (" + std::to_string(samples.cols()) + " vs " +
                          std::to_string(reference.cols()) + ")");
    }
    Manifest manifest("eval", out_dir, "", 0,
                      json{{"samples", samples_path},
                           {"reference", reference_path},
                           {"checkpoint", ckpt_path}});

    json metrics;
    const double ed = energy_distance(samples.values, reference.values, samples.cols());
    metrics["energy_distance"] = ed;
    metrics["n_samples"] = samples.rows();
    metrics["n_reference"] = reference.rows();
    std::cout << "energy_distance: " << ed << "\n";

    if (!ckpt_path.empty()) {
        const Checkpoint ckpt = load_checkpoint(ckpt_path);
        if (static_cast<std::size_t>(ckpt.arch.dim) != reference.cols()) {
            throw ConfigError("eval: checkpoint dimension does not match reference");
        }
        std::vector<std::vector<double>> pts;
        const std::size_t rows = std::min(nll_max, reference.rows());
        pts.reserve(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<double> p(reference.cols());
            for (std::size_t c = 0; c < reference.cols(); ++c) p[c] = reference.at(r, c);
            pts.push_back(std::move(p));
        }
        const NllResult nll = exact_nll(ckpt.arch, ckpt.params, pts);
        metrics["nll_nats_per_dim"] = nll.nats_per_dim;
        metrics["nll_points"] = rows;
        metrics["nll_nfe_total"] = nll.nfe_total;
        std::cout << "nll_nats_per_dim: " << nll.nats_per_dim << " (" << rows << " points)\n";
    }

    write_file(out_dir + "/metrics.json", metrics.dump(2) + "\n");
    manifest.add_output("metrics.json");
    manifest.finish();
    return 0;
}

json report_to_json(const VarianceReport& r) {
    return {{"var_g", r.var_g},
            {"var_h", r.var_h},
            {"cov", r.cov},
            {"rho", r.rho},
            {"alpha_star", r.alpha_star},
            {"var_reduced", r.var_reduced},
            {"var_reduced_direct", r.var_reduced_direct},
            {"identity_gap", r.identity_gap},
            {"se_var_reduced", r.se_var_reduced},
            {"n_samples", r.n_samples}};
}

int cmd_variance(const std::string& ckpt_path, const std::string& config_path,
                 const std::string& out_dir, std::size_t n_pairs, std::size_t n_draws) {
    const std::string snapshot = read_file(config_path);
    const TrainConfig config = load_train_config(config_path);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    Manifest manifest("variance", out_dir, snapshot, config.seed,
                      json{{"checkpoint", ckpt_path}, {"config", config_path}, {"n", n_pairs}});

    TrainConfig cfg = config;
    cfg.arch = ckpt.arch;
    cfg.pairing = ckpt.pairing;
    const DataSource source = make_data_source(cfg);

    json report;
    std::ostringstream text;
    text << "variance laboratory report\n==========================\n";

    // 1. control-variate statistics under the trained pairing and probes
    const std::uint64_t seed = cfg.seed;
    struct ProbeDef {
        const char* name;
        TimeMap map;
    };
    std::vector<ProbeDef> probes;
    if (ckpt.pairing.learned()) {
        probes.push_back({"learned_phi", TimeMap::learned(ckpt.pairing, ckpt.params)});
    }
    probes.push_back({"antithetic", TimeMap::antithetic()});
    probes.push_back({"local_shift_0.01", TimeMap::shift(0.01)});

    json cv_reports = json::object();
    text << "\n[control variates]  (n = " << n_pairs << " paired draws)\n";
    for (const auto& probe : probes) {
        const PairedGradSamples samples =
            collect_paired_grads(ckpt.arch, cfg, ckpt.params, source, probe.map, n_pairs, seed);
        const VarianceReport cv = control_variate_stats(samples);
        const CorrBoundCheck bound = corr_lower_bound_check(samples);
        json entry = report_to_json(cv);
        entry["corr_bound"] = {{"lhs", bound.lhs},
                               {"rhs", bound.rhs},
                               {"gap", bound.gap},
                               {"se_gap", bound.se_gap}};
        cv_reports[probe.name] = entry;
        char line[256];
        std::snprintf(line, sizeof(line),
                      "  %-18s rho=%+.4f  alpha*=%+.4f  VarG=%.4g  Var(G-a*H)=%.4g\n", probe.name,
                      cv.rho, cv.alpha_star, cv.var_g, cv.var_reduced);
        text << line;
    }
    report["control_variates"] = cv_reports;

    // 2. contraction inequality on the closed-form instance
    const TikhonovInstance instance = make_rff_instance(seed);
    const std::vector<double> lambdas = {0.01, 0.1, 1.0, 10.0};
    const std::vector<TikhonovRow> rows = tikhonov_check(instance, lambdas);
    json tik = json::array();
    text << "\n[tikhonov contraction]\n";
    bool all_satisfied = true;
    for (const auto& row : rows) {
        tik.push_back({{"lambda", row.lambda},
                       {"tpc_norm", row.tpc_norm},
                       {"bound", row.bound},
                       {"slack", row.slack},
                       {"satisfied", row.satisfied},
                       {"ridged", row.ridged}});
        all_satisfied = all_satisfied && row.satisfied;
        char line[256];
        std::snprintf(line, sizeof(line), "  lambda=%-8.3g |v|_tpc^2=%-12.6g bound=%-12.6g %s\n",
                      row.lambda, row.tpc_norm, row.bound, row.satisfied ? "ok" : "VIOLATED");
        text << line;
    }
    report["tikhonov"] = {{"rows", tik}, {"all_satisfied", all_satisfied}};

    // 3. gated-estimator variance at matched per-step compute
    const GatedVarianceReport gated =
        gated_estimator_variance(cfg, source, ckpt.params, n_draws, seed);
    report["gated_estimator"] = {{"var_gated", gated.var_gated},
                                 {"var_baseline", gated.var_baseline},
                                 {"ratio", gated.ratio},
                                 {"batch_gated", gated.batch_gated},
                                 {"batch_baseline", gated.batch_baseline},
                                 {"evals_per_step_gated", gated.evals_per_step_gated},
                                 {"evals_per_step_baseline", gated.evals_per_step_baseline},
                                 {"n_draws", gated.n_draws}};
    char line[256];
    std::snprintf(line, sizeof(line),
                  "\n[gated estimator]  var(g) %.6g (batch %zu) vs baseline %.6g (batch %zu), "
                  "ratio %.4f\n",
                  gated.var_gated, gated.batch_gated, gated.var_baseline, gated.batch_baseline,
                  gated.ratio);
    text << line;

    write_file(out_dir + "/variance_report.json", report.dump(2) + "\n");
    write_file(out_dir + "/variance_report.txt", text.str());
    manifest.add_output("variance_report.json");
    manifest.add_output("variance_report.txt");
    manifest.finish();
    std::cout << text.str();
    return 0;
}

int cmd_reflow(const std::string& ckpt_path, std::size_t n_pairs, const SolverArgs& solver,
               const std::string& out_dir, std::uint64_t seed) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    Manifest manifest("reflow", out_dir, "", seed,
                      json{{"checkpoint", ckpt_path}, {"n", n_pairs}, {"solver", solver.to_json()}});

    const ReflowResult result = reflow(ckpt, n_pairs, solver.settings(), seed);
    write_coupling_csv(out_dir + "/coupling.csv", result.coupling);
    manifest.add_output("coupling.csv");

    json summary;
    summary["n_requested"] = n_pairs;
    summary["n_pairs"] = result.coupling.size();
    summary["skipped"] = result.skipped;
    summary["nfe_total"] = result.nfe_total;
    write_file(out_dir + "/reflow_summary.json", summary.dump(2) + "\n");
    manifest.add_output("reflow_summary.json");
    manifest.finish();

    std::cout << "reflow: " << result.coupling.size() << " pairs written, " << result.skipped
              << " skipped\n";
    if (n_pairs > 0 && static_cast<double>(result.skipped) > 0.01 * static_cast<double>(n_pairs)) {
        std::cerr << "reflow: skipped trajectories exceed 1%\n";
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal-pair-consistency flow matching toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", ckpt_path, samples_path, reference_path;
    std::uint64_t seed = 0;
    std::size_t n = 10000;
    std::size_t n_draws = 256;
    std::size_t nll_max = 2000;
    bool dump_trajectories = false;
    SolverArgs solver;

    auto add_solver_flags = [&](CLI::App* cmd) {
        cmd->add_option("--solver", solver.solver, "euler|rk45");
        cmd->add_option("--steps", solver.steps, "Euler step count N");
        cmd->add_option("--atol", solver.atol, "RK45 absolute tolerance");
        cmd->add_option("--rtol", solver.rtol, "RK45 relative tolerance");
    };

    CLI::App* train_cmd = app.add_subcommand("train", "run the training loop");
    train_cmd->add_option("--config", config_path, "JSON config file")->required();
    train_cmd->add_option("--out", out_dir, "output directory");
    train_cmd->add_option("--seed", seed, "override the config seed");

    CLI::App* sample_cmd = app.add_subcommand("sample", "integrate the flow from base draws");
    sample_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    sample_cmd->add_option("--out", out_dir, "output directory");
    sample_cmd->add_option("--n", n, "number of samples");
    sample_cmd->add_option("--seed", seed, "base-draw seed");
    sample_cmd->add_flag("--dump-trajectories", dump_trajectories, "write the full trajectories");
    add_solver_flags(sample_cmd);

    CLI::App* eval_cmd = app.add_subcommand("eval", "two-sample metrics against a reference");
    eval_cmd->add_option("--samples", samples_path, "generated samples CSV")->required();
    eval_cmd->add_option("--reference", reference_path, "reference CSV")->required();
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint for exact NLL (optional)");
    eval_cmd->add_option("--out", out_dir, "output directory");
    eval_cmd->add_option("--nll-max", nll_max, "cap on NLL evaluation points");

    CLI::App* variance_cmd = app.add_subcommand("variance", "estimator-level variance laboratory");
    variance_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    variance_cmd->add_option("--config", config_path, "JSON config file")->required();
    variance_cmd->add_option("--out", out_dir, "output directory");
    variance_cmd->add_option("--n", n, "paired gradient draws");
    variance_cmd->add_option("--draws", n_draws, "gradient draws for the gated comparison");

    CLI::App* reflow_cmd = app.add_subcommand("reflow", "build a rectified-flow coupling table");
    reflow_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    reflow_cmd->add_option("--out", out_dir, "output directory");
    reflow_cmd->add_option("--n", n, "number of coupling pairs");
    reflow_cmd->add_option("--seed", seed, "base-draw seed");
    add_solver_flags(reflow_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            return cmd_train(config_path, out_dir,
                             train_cmd->count("--seed") > 0 ? std::optional<std::uint64_t>(seed)
                                                            : std::nullopt);
        }
        if (sample_cmd->parsed()) {
            return cmd_sample(ckpt_path, solver, n, out_dir, seed, dump_trajectories);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(samples_path, reference_path, ckpt_path, out_dir, nll_max);
        }
        if (variance_cmd->parsed()) {
            return cmd_variance(ckpt_path, config_path, out_dir, n, n_draws);
        }
        if (reflow_cmd->parsed()) {
            return cmd_reflow(ckpt_path, n, solver, out_dir, seed);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return 2;
    } catch (const IntegrationError& e) {
        std::cerr << "integration failure: " << e.what() << "\n";
        return 3;
    } catch (const DegenerateError& e) {
        std::cerr << "degenerate statistics: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
