#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "prob/einstein.hpp"
#include "prob/nirenberg.hpp"
#include "prob/problem.hpp"
#include "prob/willmore.hpp"

namespace geopinn {

// Full declarative description of one run. Parsed from a JSON config file;
// unknown keys are hard errors, defaults are filled in and the effective
// config is echoed next to the run outputs so every artifact is reproducible
// from its config alone.
struct ExperimentConfig {
    std::string problem;  // einstein | nirenberg | willmore
    std::uint64_t seed = 0;
    std::string out_dir;
    int workers = 1;  // 0: use hardware concurrency

    EinsteinConfig einstein;
    NirenbergConfig nirenberg;
    WillmoreConfig willmore;
    NetworkConfig network;
    TrainingConfig training;
};

ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
std::string config_to_json(const ExperimentConfig& cfg);

std::unique_ptr<Problem> make_problem(const ExperimentConfig& cfg);

} // namespace geopinn
