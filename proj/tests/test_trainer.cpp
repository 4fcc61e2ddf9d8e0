#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "tpcflow/adam.hpp"
#include "tpcflow/errors.hpp"
#include "tpcflow/rng.hpp"
#include "tpcflow/trainer.hpp"

using namespace tpcflow;

namespace {

TrainConfig small_config() {
    TrainConfig config;
    config.arch = ModelArch{2, 16, 3, 2};
    config.dataset = "two_moons";
    config.dataset_n = 512;
    config.batch_size = 16;
    config.steps = 40;
    config.checkpoint_every = 20;
    config.variance_window = 10;
    config.seed = 7;
    return config;
}

}  // namespace

TEST_CASE("Adam matches a hand-computed three-step trace exactly") {
    ParamVector p;
    p.add_segment("w", 1);
    p.data("w")[0] = 0.5;
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    Adam opt(p, lr, b1, b2, eps);

    // reference recurrence, written out independently
    double ref = 0.5, m = 0.0, v = 0.0;
    const double grads[3] = {1.0, -2.0, 0.5};
    for (int k = 0; k < 3; ++k) {
        const double g = grads[k];
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        const double m_hat = m / (1.0 - std::pow(b1, k + 1));
        const double v_hat = v / (1.0 - std::pow(b2, k + 1));
        ref -= lr * m_hat / (std::sqrt(v_hat) + eps);

        ParamVector grad = p.zeros_like();
        grad.data("w")[0] = g;
        opt.step(p, grad);
        CHECK(std::abs(p.data("w")[0] - ref) <= 1e-12);
    }
}

TEST_CASE("Adam per-segment learning-rate override") {
    ParamVector p;
    p.add_segment("a", 1);
    p.add_segment("b", 1);
    Adam opt(p, 0.1);
    opt.set_segment_lr("b", 0.01);
    ParamVector grad = p.zeros_like();
    grad.data("a")[0] = 1.0;
    grad.data("b")[0] = 1.0;
    opt.step(p, grad);
    // first-step Adam update is -lr * g / (|g| + eps) = ~ -lr * sign(g)
    CHECK(p.data("a")[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(p.data("b")[0] == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("zero steps returns the initialization as the final checkpoint") {
    TrainConfig config = small_config();
    config.steps = 0;
    const DataSource source = make_data_source(config);
    const TrainResult result = train(config, source);
    ParamVector expected;
    add_velocity_segments(config.arch, expected);
    add_pairing_segments(config.pairing, expected);
    init_velocity_segments(config.arch, expected, config.seed);
    CHECK(result.checkpoint.params.values() == expected.values());
    CHECK(result.checkpoint.step == 0);
    CHECK(result.telemetry.empty());
}

TEST_CASE("training is bit-identically deterministic in the seed") {
    const TrainConfig config = small_config();
    const DataSource source = make_data_source(config);
    const TrainResult a = train(config, source);
    const TrainResult b = train(config, source);
    CHECK(a.checkpoint.params.values() == b.checkpoint.params.values());
    REQUIRE(a.telemetry.size() == b.telemetry.size());
    for (std::size_t i = 0; i < a.telemetry.size(); ++i) {
        CHECK(a.telemetry[i].fm == b.telemetry[i].fm);
        CHECK(a.telemetry[i].gate == b.telemetry[i].gate);
        CHECK(a.telemetry[i].grad_norm == b.telemetry[i].grad_norm);
    }

    TrainConfig other = config;
    other.seed = config.seed + 1;
    const TrainResult c = train(other, make_data_source(other));
    CHECK(a.checkpoint.params.values() != c.checkpoint.params.values());
}

TEST_CASE("telemetry row count equals steps run and the variance log is emitted") {
    const TrainConfig config = small_config();
    const DataSource source = make_data_source(config);
    const TrainResult result = train(config, source);
    CHECK(result.steps_run == config.steps);
    CHECK(result.telemetry.size() == static_cast<std::size_t>(config.steps));
    // rolling window entries start once the window fills
    CHECK(result.variance_log.size() ==
          static_cast<std::size_t>(config.steps - config.variance_window + 1));
}

TEST_CASE("checkpoint save/load round-trips bit-identically") {
    TrainConfig config = small_config();
    config.steps = 10;
    const DataSource source = make_data_source(config);
    const TrainResult result = train(config, source);

    const auto dir = std::filesystem::temp_directory_path() / "tpcflow_ckpt_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "model.tpcf").string();
    save_checkpoint(path, result.checkpoint);
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.params.values() == result.checkpoint.params.values());
    CHECK(loaded.params.same_layout(result.checkpoint.params));
    CHECK(loaded.arch.hidden == config.arch.hidden);
    CHECK(loaded.pairing.mode == config.pairing.mode);
    CHECK(loaded.step == result.checkpoint.step);
    CHECK(loaded.seed == config.seed);
    std::filesystem::remove_all(dir);
}

TEST_CASE("grad_variance_window: constant stream has zero variance") {
    const std::vector<double> constant(50, 3.25);
    const VarianceLogEntry entry = grad_variance_window(constant, 49, 20);
    CHECK(entry.grad_norm_var == 0.0);
    CHECK(entry.grad_norm_mean == doctest::Approx(3.25));
    CHECK_THROWS_AS(grad_variance_window(constant, 0, 51), ConfigError);
}

TEST_CASE("grad_variance_window: recovers a planted variance within sampling error") {
    Rng rng(12);
    const int window = 400;
    const double sigma = 0.7;
    std::vector<double> stream(static_cast<std::size_t>(window));
    for (auto& v : stream) v = 5.0 + sigma * rng.normal();
    const VarianceLogEntry entry = grad_variance_window(stream, window - 1, window);
    // sampling distribution of the variance: sd ~ sigma^2 sqrt(2/(W-1))
    const double tol = 3.0 * sigma * sigma * std::sqrt(2.0 / (window - 1));
    CHECK(std::abs(entry.grad_norm_var - sigma * sigma) <= tol);
}

TEST_CASE("non-finite data aborts with the last good parameters retained") {
    TrainConfig config = small_config();
    config.steps = 30;
    config.dataset = "csv";
    config.dataset_csv = "unused";
    // direct source with a poisoned row: huge values overflow the forward pass
    std::vector<double> rows;
    Rng rng(3);
    for (int i = 0; i < 63; ++i) {
        rows.push_back(rng.normal());
        rows.push_back(rng.normal());
    }
    rows.push_back(1e308);
    rows.push_back(1e308);
    const DataSource source = DataSource::from_points(2, rows);

    const TrainResult result = train(config, source);
    CHECK(result.nan_abort);
    CHECK(result.steps_run < config.steps);
    for (double v : result.checkpoint.params.values()) CHECK(std::isfinite(v));
    // the gate draw of the failed step is still recorded
    CHECK(result.telemetry.size() == static_cast<std::size_t>(result.steps_run) + 1);
}

TEST_CASE("short two-moons run decreases the flow-matching loss") {
    TrainConfig config = small_config();
    config.steps = 800;
    config.batch_size = 32;
    config.lambda_tpc = 0.0;
    config.p_tpc = 0.0;
    config.pairing.mode = PairingMode::Fixed;
    const DataSource source = make_data_source(config);
    const TrainResult result = train(config, source);

    auto window_mean = [&](std::size_t lo, std::size_t hi) {
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += result.telemetry[i].fm;
        return acc / static_cast<double>(hi - lo);
    };
    const double early = window_mean(0, 50);
    const double late = window_mean(result.telemetry.size() - 50, result.telemetry.size());
    CHECK(late < 0.8 * early);
}

TEST_CASE("reflow: identity and constant fields produce closed-form couplings") {
    const ModelArch arch{2, 8, 2, 1};
    Checkpoint ckpt;
    ckpt.arch = arch;
    ckpt.pairing = PairingSpec{PairingMode::Fixed, 8, 32};
    add_velocity_segments(arch, ckpt.params);

    SolverSettings euler;
    euler.adaptive = false;
    euler.euler_steps = 8;

    // zero drift: z1 = z0
    const ReflowResult zero = reflow(ckpt, 32, euler, 5);
    CHECK(zero.skipped == 0);
    CHECK(zero.coupling.size() == 32);
    CHECK(zero.coupling.x0_rows == zero.coupling.x1_rows);

    // constant drift c: z1 = z0 + c exactly (Euler is exact for constants)
    ckpt.params.data("v.b1")[0] = 0.75;
    ckpt.params.data("v.b1")[1] = -1.25;
    const ReflowResult shifted = reflow(ckpt, 32, euler, 5);
    for (std::size_t r = 0; r < shifted.coupling.size(); ++r) {
        CHECK(shifted.coupling.x1_rows[2 * r] ==
              doctest::Approx(shifted.coupling.x0_rows[2 * r] + 0.75).epsilon(1e-12));
        CHECK(shifted.coupling.x1_rows[2 * r + 1] ==
              doctest::Approx(shifted.coupling.x0_rows[2 * r + 1] - 1.25).epsilon(1e-12));
    }
}

TEST_CASE("train writes the declared artifacts when given an output directory") {
    TrainConfig config = small_config();
    config.steps = 25;
    config.checkpoint_every = 10;
    const auto dir = std::filesystem::temp_directory_path() / "tpcflow_train_out";
    std::filesystem::remove_all(dir);
    const DataSource source = make_data_source(config);
    train(config, source, dir.string());
    CHECK(std::filesystem::exists(dir / "telemetry.csv"));
    CHECK(std::filesystem::exists(dir / "variance_log.csv"));
    CHECK(std::filesystem::exists(dir / "ckpt_00000010.tpcf"));
    CHECK(std::filesystem::exists(dir / "ckpt_00000020.tpcf"));
    CHECK(std::filesystem::exists(dir / "final.tpcf"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("mismatched data/arch dimensions are rejected") {
    TrainConfig config = small_config();
    const DataSource source = DataSource::from_points(3, {1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(train(config, source), ConfigError);
}
