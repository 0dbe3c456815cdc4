#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "prob/problem.hpp"
#include "train/checkpoint.hpp"

namespace geopinn {

struct RunOptions {
    std::filesystem::path out_dir;
    int workers = 1;
    bool quiet = false;
};

// Per-epoch rows of (epoch, loss terms, wall time); diagnostics rows on the
// evaluation cadence; final held-out evaluation.
struct RunResult {
    std::vector<std::string> trace_columns;
    std::vector<std::vector<double>> trace;
    std::vector<std::string> eval_columns;
    std::vector<std::vector<double>> evals;
    TermValues final_eval;
};

RunResult train_run(Problem& problem, const ExperimentConfig& cfg, const RunOptions& opt,
                    const Checkpoint* resume = nullptr);

} // namespace geopinn
