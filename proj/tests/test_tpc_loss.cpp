#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tpcflow/program.hpp"
#include "tpcflow/rng.hpp"
#include "tpcflow/tpc_loss.hpp"

using namespace tpcflow;

namespace {

LossBatch random_batch(int dim, std::size_t n, std::uint64_t seed, bool degenerate_targets = false) {
    LossBatch batch;
    batch.dim = dim;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        EndpointPair ep;
        ep.id = i;
        ep.x0.resize(static_cast<std::size_t>(dim));
        ep.x1.resize(static_cast<std::size_t>(dim));
        for (auto& v : ep.x0) v = rng.normal();
        if (degenerate_targets) {
            ep.x1 = ep.x0;  // u = x1 - x0 = 0 on the linear path
        } else {
            for (auto& v : ep.x1) v = rng.normal();
        }
        batch.endpoints.push_back(ep);
        batch.t.push_back(rng.uniform01());
    }
    return batch;
}

TrainConfig base_config(const ModelArch& arch) {
    TrainConfig config;
    config.arch = arch;
    config.path = PathKind::linear();
    config.pairing = PairingSpec{PairingMode::Fixed, 8, 32};
    config.lambda_tpc = 0.0;
    config.lambda_mono = 0.0;
    config.p_tpc = 0.0;
    return config;
}

ParamVector full_params(const TrainConfig& config, std::uint64_t seed) {
    ParamVector params;
    add_velocity_segments(config.arch, params);
    add_pairing_segments(config.pairing, params);
    init_velocity_segments(config.arch, params, seed);
    return params;
}

}  // namespace

TEST_CASE("fm_loss: zero on a perfectly regressed degenerate batch") {
    // u = 0 rows and the zero field match exactly.
    const ModelArch arch{2, 8, 2, 1};
    TrainConfig config = base_config(arch);
    ParamVector params;
    add_velocity_segments(arch, params);  // zero weights -> v = 0
    const LossBatch batch = random_batch(2, 16, 3, /*degenerate_targets=*/true);
    CHECK(fm_loss(arch, config, params, batch, nullptr) == 0.0);
}

TEST_CASE("fm_loss: zero-weight model reproduces the closed-form mean |x1-x0|^2") {
    const ModelArch arch{2, 8, 2, 1};
    TrainConfig config = base_config(arch);
    ParamVector params;
    add_velocity_segments(arch, params);
    const LossBatch batch = random_batch(2, 32, 5);
    double expected = 0.0;
    for (const auto& ep : batch.endpoints) {
        for (std::size_t c = 0; c < 2; ++c) {
            const double u = ep.x1[c] - ep.x0[c];
            expected += u * u;
        }
    }
    expected /= static_cast<double>(batch.size());
    CHECK(fm_loss(arch, config, params, batch, nullptr) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("fm_loss is invariant to batch permutation") {
    const ModelArch arch{2, 12, 3, 2};
    TrainConfig config = base_config(arch);
    const ParamVector params = full_params(config, 17);
    LossBatch batch = random_batch(2, 9, 23);
    const double before = fm_loss(arch, config, params, batch, nullptr);
    std::reverse(batch.endpoints.begin(), batch.endpoints.end());
    std::reverse(batch.t.begin(), batch.t.end());
    const double after = fm_loss(arch, config, params, batch, nullptr);
    CHECK(before == doctest::Approx(after).epsilon(1e-15));
}

TEST_CASE("tpc_pair_loss: zero when t' = t and for constant fields") {
    const ModelArch arch{2, 8, 2, 1};

    // identity pairing via a learned map is not expressible; use t = 0.5 where
    // the antithetic partner coincides with t.
    TrainConfig config = base_config(arch);
    const ParamVector params = full_params(config, 7);
    LossBatch batch = random_batch(2, 8, 11);
    for (auto& t : batch.t) t = 0.5;
    CHECK(tpc_pair_loss(arch, config, params, batch, nullptr) == 0.0);

    // constant field: zero weights, bias on the output layer
    ParamVector constant;
    add_velocity_segments(arch, constant);
    constant.data("v.b1")[0] = 1.7;
    constant.data("v.b1")[1] = -0.4;
    const LossBatch batch2 = random_batch(2, 8, 13);
    CHECK(tpc_pair_loss(arch, config, constant, batch2, nullptr) == 0.0);
}

TEST_CASE("tpc_pair_loss: symmetric under swapping each row's (t, t')") {
    const ModelArch arch{2, 10, 3, 1};
    TrainConfig config = base_config(arch);
    const ParamVector params = full_params(config, 29);
    LossBatch batch = random_batch(2, 12, 31);
    const double forward_pairing = tpc_pair_loss(arch, config, params, batch, nullptr);
    for (auto& t : batch.t) t = 1.0 - t;  // antithetic partner swaps the roles
    const double swapped = tpc_pair_loss(arch, config, params, batch, nullptr);
    CHECK(forward_pairing == doctest::Approx(swapped).epsilon(1e-12));
}

TEST_CASE("total_loss: lambda_tpc = 0 equals fm_loss exactly") {
    const ModelArch arch{2, 10, 3, 1};
    TrainConfig config = base_config(arch);
    const ParamVector params = full_params(config, 41);
    const LossBatch batch = random_batch(2, 8, 43);
    const LossTerms open = total_loss(arch, config, params, batch, true, nullptr);
    const LossTerms closed = total_loss(arch, config, params, batch, false, nullptr);
    const double fm = fm_loss(arch, config, params, batch, nullptr);
    CHECK(open.total == fm);
    CHECK(closed.total == fm);
}

TEST_CASE("total_loss: closed gate adds only the monotonicity term") {
    const ModelArch arch{2, 10, 3, 1};
    TrainConfig config = base_config(arch);
    config.pairing = PairingSpec{PairingMode::Learned, 8, 32};
    config.lambda_tpc = 0.5;
    config.lambda_mono = 0.01;
    const ParamVector params = full_params(config, 47);
    const LossBatch batch = random_batch(2, 8, 53);
    const LossTerms closed = total_loss(arch, config, params, batch, false, nullptr);
    const double fm = fm_loss(arch, config, params, batch, nullptr);
    CHECK(closed.total == doctest::Approx(fm + config.lambda_mono * closed.surrogate));
    CHECK(closed.tpc == 0.0);
    CHECK(std::isnan(closed.fm_paired));
}

TEST_CASE("total_loss stays nonnegative across random configurations") {
    Rng rng(59);
    const ModelArch arch{2, 10, 3, 1};
    for (int rep = 0; rep < 30; ++rep) {
        TrainConfig config = base_config(arch);
        config.pairing = rng.bernoulli(0.5) ? PairingSpec{PairingMode::Learned, 4, 16}
                                            : PairingSpec{PairingMode::Fixed, 4, 16};
        config.lambda_tpc = rng.uniform(0.0, 1.0);
        config.lambda_mono = rng.uniform(0.0, 0.05);
        config.paired_fm_residual = rng.bernoulli(0.3);
        const ParamVector params = full_params(config, rng.next_u64());
        const LossBatch batch = random_batch(2, 6, rng.next_u64());
        const LossTerms terms = total_loss(arch, config, params, batch, rng.bernoulli(0.5), nullptr);
        CHECK(terms.total >= 0.0);
    }
}

TEST_CASE("gating identity: gate average reproduces fm + p*lambda*tpc + lambda_mono*surrogate") {
    const ModelArch arch{2, 16, 3, 2};
    for (const double p_tpc : {0.25, 0.75, 1.0}) {
        TrainConfig config = base_config(arch);
        config.pairing = PairingSpec{PairingMode::Learned, 8, 32};
        config.lambda_tpc = 0.25;
        config.lambda_mono = 0.001;
        config.p_tpc = p_tpc;
        const ParamVector params = full_params(config, 61);
        const LossBatch batch = random_batch(2, 8, 67);

        const LossTerms open = total_loss(arch, config, params, batch, true, nullptr);
        const double expected =
            open.fm + p_tpc * config.lambda_tpc * open.tpc + config.lambda_mono * open.surrogate;

        const std::size_t draws = 10000;
        Rng gate_rng(71);
        double acc = 0.0;
        for (std::size_t i = 0; i < draws; ++i) {
            const bool gate = gate_rng.bernoulli(p_tpc);
            acc += total_loss(arch, config, params, batch, gate, nullptr).total;
        }
        const double mean = acc / static_cast<double>(draws);
        const double se = config.lambda_tpc * open.tpc *
                          std::sqrt(p_tpc * (1.0 - p_tpc) / static_cast<double>(draws));
        CHECK(std::abs(mean - expected) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("paired flow-matching residual variant changes only the gated term") {
    const ModelArch arch{2, 10, 3, 1};
    TrainConfig config = base_config(arch);
    config.lambda_tpc = 0.3;
    config.paired_fm_residual = true;
    const ParamVector params = full_params(config, 73);
    const LossBatch batch = random_batch(2, 8, 79);

    const LossTerms open = total_loss(arch, config, params, batch, true, nullptr);
    CHECK(open.total ==
          doctest::Approx(open.fm + open.fm_paired + config.lambda_tpc * open.tpc).epsilon(1e-14));
    const LossTerms closed = total_loss(arch, config, params, batch, false, nullptr);
    CHECK(closed.total == doctest::Approx(closed.fm).epsilon(1e-14));
}

TEST_CASE("total_loss gradient passes finite differences across paths and variants") {
    // VP path with the paired residual exercises the full chain rule through
    // t' including the target's own time derivative.
    Rng rng(83);
    const ModelArch arch{2, 8, 3, 1};
    for (const bool paired_residual : {false, true}) {
        for (int kind = 0; kind < 3; ++kind) {
            TrainConfig config = base_config(arch);
            config.pairing = PairingSpec{PairingMode::Learned, 4, 16};
            config.lambda_tpc = 0.4;
            config.lambda_mono = 0.005;
            config.paired_fm_residual = paired_residual;
            config.path = kind == 0 ? PathKind::linear()
                                    : (kind == 1 ? PathKind::ot(0.1) : PathKind::vp());
            ParamVector params = full_params(config, rng.next_u64());
            for (auto& v : params.values()) v += 0.01 * rng.normal();
            const LossBatch batch = random_batch(2, 4, rng.next_u64());
            const auto prog = total_loss_program(arch, config, batch, true);
            CHECK(finite_diff_check(prog, params, 1e-5) <= 1e-4);
        }
    }
}

TEST_CASE("noise augmentation draws enter the loss and freeze deterministically") {
    const ModelArch arch{2, 8, 2, 1};
    TrainConfig config = base_config(arch);
    config.sigma_noise = 0.05;
    config.batch_size = 8;
    const ParamVector params = full_params(config, 89);
    const DataSource source = DataSource::from_points(2, {1.0, 0.5, -0.5, 2.0});

    Rng d1(1), n1(2), d2(1), n2(2);
    const LossBatch a = assemble_batch(source, config, d1, n1);
    const LossBatch b = assemble_batch(source, config, d2, n2);
    CHECK(a.eps_primary == b.eps_primary);  // deterministic replay
    CHECK(a.eps_primary.size() == 16);
    CHECK(a.eps_paired != a.eps_primary);   // independent partner noise

    Rng d3(1), n3(2);
    const LossBatch shared = assemble_batch(source, config, d3, n3, /*share_noise=*/true);
    CHECK(shared.eps_paired == shared.eps_primary);

    const double with_noise = fm_loss(arch, config, params, a, nullptr);
    LossBatch no_noise = a;
    no_noise.eps_primary.clear();
    no_noise.eps_paired.clear();
    const double without = fm_loss(arch, config, params, no_noise, nullptr);
    CHECK(with_noise != without);
}

TEST_CASE("paper ablation cells are representable in TrainConfig defaults") {
    // best learned cell
    const TrainConfig defaults;
    CHECK(defaults.lambda_tpc == 0.10);
    CHECK(defaults.p_tpc == 0.75);
    CHECK(defaults.lambda_mono == 0.001);
    CHECK(defaults.pairing.mode == PairingMode::Learned);
    // best fixed cell
    TrainConfig fixed_best;
    fixed_best.pairing.mode = PairingMode::Fixed;
    fixed_best.p_tpc = 1.0;
    fixed_best.lambda_tpc = 0.25;
    fixed_best.validate();
}
