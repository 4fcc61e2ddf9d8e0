#pragma once

#include <cstdint>
#include <cmath>
#include <string>
#include <string_view>

namespace tpcflow {

/// Deterministic 64-bit PRNG (xoshiro256**) with hand-rolled uniform and
/// normal draws. std::*_distribution is implementation-defined, so replaying
/// a seed through this class gives bit-identical streams on every platform.
///
/// All randomness in a run flows from one manifest seed through named child
/// streams (see Rng::child), so any consumer can be replayed in isolation.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) { reseed(seed); }

    void reseed(std::uint64_t seed);

    /// Raw 64 random bits.
    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Standard normal via Box-Muller (pairs cached).
    double normal();

    /// Bernoulli draw.
    bool bernoulli(double p) { return uniform01() < p; }

    /// Derive an independent deterministic child stream. Distinct names give
    /// decorrelated streams; the same (seed, name, index) always gives the
    /// same stream.
    Rng child(std::string_view name, std::uint64_t index = 0) const;

  private:
    std::uint64_t state_[4];
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
    std::uint64_t seed_ = 0;  // retained for child derivation
};

/// FNV-1a hash of a string, used to derive child stream seeds.
std::uint64_t hash_name(std::string_view name);

}  // namespace tpcflow
