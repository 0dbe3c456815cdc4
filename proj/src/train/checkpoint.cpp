#include "train/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "errors.hpp"

namespace geopinn {

namespace {

constexpr char kMagic[4] = {'G', 'P', 'N', 'N'};

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_i64(std::ostream& out, std::int64_t v) {
    unsigned char b[8];
    const auto u = static_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) b[i] = (u >> (8 * i)) & 0xff;
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
    put_i64(out, std::int64_t(v.size()));
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = (bits >> (8 * i)) & 0xff;
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

std::int64_t get_i64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return std::int64_t(v);
}

std::vector<double> get_doubles(std::istream& in) {
    const std::int64_t n = get_i64(in);
    if (n < 0 || n > (1ll << 32)) throw IoError("corrupt checkpoint: bad array length");
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& d : v) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
        std::memcpy(&d, &bits, 8);
    }
    return v;
}

} // namespace

void checkpoint_save(const Checkpoint& ck, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(kMagic, 4);
    put_u32(out, Checkpoint::kVersion);
    put_i64(out, std::int64_t(ck.config_json.size()));
    out.write(ck.config_json.data(), std::streamsize(ck.config_json.size()));
    put_i64(out, ck.epoch);
    put_doubles(out, ck.params);
    put_doubles(out, ck.adam_m);
    put_doubles(out, ck.adam_v);
    put_i64(out, ck.adam_steps);
    if (!out) throw IoError("write failure on '" + path.string() + "'");
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("'" + path.string() + "' is not a checkpoint (bad magic)");
    const std::uint32_t version = get_u32(in);
    if (version != Checkpoint::kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    const std::int64_t cfg_len = get_i64(in);
    if (cfg_len < 0 || cfg_len > (1ll << 24)) throw IoError("corrupt checkpoint: config length");
    ck.config_json.resize(std::size_t(cfg_len));
    in.read(ck.config_json.data(), cfg_len);
    ck.epoch = get_i64(in);
    ck.params = get_doubles(in);
    ck.adam_m = get_doubles(in);
    ck.adam_v = get_doubles(in);
    ck.adam_steps = get_i64(in);
    if (!in) throw IoError("truncated checkpoint '" + path.string() + "'");
    return ck;
}

} // namespace geopinn
