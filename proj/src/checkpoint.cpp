#include "tpcflow/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "tpcflow/errors.hpp"

namespace tpcflow {

namespace {

constexpr char kMagic[4] = {'T', 'P', 'C', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64_le(std::ofstream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64_le(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json header;
    header["arch"] = {{"dim", ckpt.arch.dim},
                      {"hidden", ckpt.arch.hidden},
                      {"depth", ckpt.arch.depth},
                      {"freqs", ckpt.arch.freqs}};
    header["pairing"] = {{"mode", to_string(ckpt.pairing.mode)},
                         {"hidden", ckpt.pairing.hidden},
                         {"mono_grid", ckpt.pairing.mono_grid}};
    header["seed"] = ckpt.seed;
    header["step"] = ckpt.step;
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : ckpt.params.segments()) {
        segs.push_back({{"name", s.name}, {"offset", s.offset}, {"length", s.length}});
    }
    header["segments"] = segs;
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(header_str.size()));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (double v : ckpt.params.values()) put_f64_le(out, v);
    if (!out) throw DataError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("not a checkpoint file: " + path);
    }
    const std::uint32_t version = get_u32(in);
    if (version != kVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t header_len = get_u32(in);
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), header_len);
    if (!in) throw DataError("truncated checkpoint header: " + path);

    Checkpoint ckpt;
    try {
        const nlohmann::json header = nlohmann::json::parse(header_str);
        const auto& a = header.at("arch");
        ckpt.arch.dim = a.at("dim");
        ckpt.arch.hidden = a.at("hidden");
        ckpt.arch.depth = a.at("depth");
        ckpt.arch.freqs = a.at("freqs");
        const auto& p = header.at("pairing");
        ckpt.pairing.mode = pairing_mode_from_string(p.at("mode"));
        ckpt.pairing.hidden = p.at("hidden");
        ckpt.pairing.mono_grid = p.at("mono_grid");
        ckpt.seed = header.at("seed");
        ckpt.step = header.at("step");
        for (const auto& s : header.at("segments")) {
            ckpt.params.add_segment(s.at("name"), s.at("length"));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad checkpoint header in " + path + ": " + e.what());
    }
    for (auto& v : ckpt.params.values()) {
        v = get_f64_le(in);
        if (!in) throw DataError("truncated checkpoint payload: " + path);
    }
    return ckpt;
}

}  // namespace tpcflow
