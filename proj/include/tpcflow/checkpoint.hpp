#pragma once

#include <cstdint>
#include <string>

#include "tpcflow/pairing.hpp"
#include "tpcflow/param_vector.hpp"
#include "tpcflow/velocity_model.hpp"

namespace tpcflow {

/// On-disk model state. File layout (documented in the README):
///   bytes 0..3   magic "TPCF"
///   bytes 4..7   format version (u32, little-endian)
///   bytes 8..11  header length L (u32, little-endian)
///   bytes 12..   UTF-8 JSON header of length L: arch, pairing spec, seed,
///                step, and the segment table (name/offset/length)
///   then         the flat parameter payload as little-endian real64
/// Pairing parameters ride in the same ParamVector as extra segments, so one
/// file restores the full training state layout bit-exactly.
struct Checkpoint {
    ModelArch arch;
    PairingSpec pairing;
    std::uint64_t seed = 0;
    long step = 0;
    ParamVector params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tpcflow
