#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tpcflow {

/// Desk-scale 2D benchmark densities standing in for image datasets.
struct Dataset2D {
    std::string name = "two_moons";  // two_moons|checkerboard|eight_gaussians|std_normal
    std::size_t n = 10000;
    double noise = 0.05;
    std::uint64_t seed = 0;
};

/// Deterministic in (name, n, noise, seed). Returns n rows of 2 columns.
/// TwoMoons: unit-radius arcs, vertical offset 0.5, Gaussian jitter = noise.
/// Checkerboard: unit cells of alternating parity tiling [-2,2]^2.
/// EightGaussians: modes on a radius-2 circle, per-mode std = noise.
/// StdNormal: N(0, I).
/// Throws ConfigError on an unknown name.
std::vector<double> generate(const Dataset2D& ds);

}  // namespace tpcflow
