#include "tpcflow/datasets2d.hpp"

#include <cmath>

#include "tpcflow/errors.hpp"
#include "tpcflow/rng.hpp"

namespace tpcflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

std::vector<double> generate(const Dataset2D& ds) {
    if (ds.n < 1) throw ConfigError("generate: n must be >= 1");
    if (ds.noise < 0.0) throw ConfigError("generate: noise must be >= 0");
    Rng rng = Rng(ds.seed).child("dataset");
    std::vector<double> rows(ds.n * 2);

    if (ds.name == "two_moons") {
        for (std::size_t i = 0; i < ds.n; ++i) {
            const double a = rng.uniform01() * kPi;
            double x, y;
            if (rng.bernoulli(0.5)) {
                x = std::cos(a);
                y = std::sin(a);
            } else {
                x = 1.0 - std::cos(a);
                y = 0.5 - std::sin(a);
            }
            rows[2 * i] = x + ds.noise * rng.normal();
            rows[2 * i + 1] = y + ds.noise * rng.normal();
        }
    } else if (ds.name == "checkerboard") {
        for (std::size_t i = 0; i < ds.n; ++i) {
            // pick a unit cell (cx, cy) in [-2,2)^2 with even cx + cy
            const auto cx = static_cast<long>(rng.uniform_index(4)) - 2;
            const long parity = static_cast<long>(rng.uniform_index(2));
            long cy = -2 + 2 * parity;
            if ((cx + cy) % 2 != 0) cy += 1;
            rows[2 * i] = static_cast<double>(cx) + rng.uniform01() + ds.noise * rng.normal();
            rows[2 * i + 1] = static_cast<double>(cy) + rng.uniform01() + ds.noise * rng.normal();
        }
    } else if (ds.name == "eight_gaussians") {
        for (std::size_t i = 0; i < ds.n; ++i) {
            const auto mode = rng.uniform_index(8);
            const double angle = 2.0 * kPi * static_cast<double>(mode) / 8.0;
            rows[2 * i] = 2.0 * std::cos(angle) + ds.noise * rng.normal();
            rows[2 * i + 1] = 2.0 * std::sin(angle) + ds.noise * rng.normal();
        }
    } else if (ds.name == "std_normal") {
        for (auto& v : rows) v = rng.normal();
    } else {
        throw ConfigError("generate: unknown dataset '" + ds.name + "'");
    }
    return rows;
}

}  // namespace tpcflow
