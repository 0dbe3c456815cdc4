#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace geopinn {

// Single-file binary checkpoint: magic "GPNN", format version, the full
// effective config as JSON text, then raw little-endian 64-bit parameter and
// Adam moment arrays. Round-trips are bitwise.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::string config_json;
    long long epoch = 0;
    std::vector<double> params;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    long long adam_steps = 0;
};

void checkpoint_save(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

} // namespace geopinn
