#include "train/loop.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

#include "io/csv.hpp"
#include "train/adam.hpp"
#include "train/parallel.hpp"
#include "train/rng.hpp"

namespace geopinn {

namespace {
constexpr int kMaxConsecutiveNonFinite = 10;
}

RunResult train_run(Problem& problem, const ExperimentConfig& cfg, const RunOptions& opt,
                    const Checkpoint* resume) {
    namespace fs = std::filesystem;
    fs::create_directories(opt.out_dir);

    const int workers = resolve_workers(opt.workers);
    auto& store = problem.store();
    Adam adam(store.size(),
              AdamConfig{cfg.training.learning_rate, cfg.training.beta1, cfg.training.beta2,
                         cfg.training.eps});
    long long start_epoch = 0;
    if (resume) {
        if (resume->params.size() != store.size())
            throw ConfigError(ConfigError::Kind::Range,
                              "checkpoint parameter count does not match this config");
        store.values() = resume->params;
        adam.restore(resume->adam_m, resume->adam_v, resume->adam_steps);
        start_epoch = resume->epoch;
    }

    RunResult result;
    result.trace_columns.push_back("epoch");
    for (const auto& c : problem.train_columns()) result.trace_columns.push_back(c);
    result.trace_columns.push_back("wall_time_s");
    result.eval_columns.push_back("epoch");
    for (const auto& c : problem.eval_columns()) result.eval_columns.push_back(c);

    CsvWriter trace_csv(opt.out_dir / "trace.csv", result.trace_columns);
    CsvWriter diag_csv(opt.out_dir / "diagnostics.csv", result.eval_columns);

    const std::uint64_t eval_seed = derive_seed(cfg.seed, "eval");
    GradientAccumulator acc(store.size());
    int consecutive_bad = 0;

    auto save_checkpoint = [&](long long next_epoch, const fs::path& path) {
        Checkpoint ck;
        ck.config_json = config_to_json(cfg);
        ck.epoch = next_epoch;
        ck.params = store.values();
        ck.adam_m = adam.first_moment();
        ck.adam_v = adam.second_moment();
        ck.adam_steps = adam.step_count();
        checkpoint_save(ck, path);
    };

    const auto t0 = std::chrono::steady_clock::now();
    for (long long epoch = start_epoch; epoch < cfg.training.epochs; ++epoch) {
        TermValues terms;
        for (int b = 0; b < cfg.training.batches_per_epoch; ++b) {
            acc.reset();
            const std::uint64_t seed =
                derive_seed(cfg.seed, "epoch", std::uint64_t(epoch), std::uint64_t(b));
            terms = problem.train_batch(epoch, seed, workers, acc);
            adam.step(store.values(), acc.grads());
        }

        const double total = terms.get("total");
        if (!std::isfinite(total)) {
            if (++consecutive_bad >= kMaxConsecutiveNonFinite)
                throw TrainingDivergence("loss non-finite for " +
                                         std::to_string(consecutive_bad) +
                                         " consecutive epochs");
        } else {
            consecutive_bad = 0;
        }

        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::vector<double> row;
        row.push_back(double(epoch));
        for (const auto& c : problem.train_columns()) row.push_back(terms.get(c));
        row.push_back(wall);
        trace_csv.row(row);
        result.trace.push_back(row);

        const bool last = (epoch + 1 == cfg.training.epochs);
        if ((epoch + 1) % cfg.training.eval_every == 0 || last) {
            const auto ev = problem.evaluate(eval_seed, cfg.training.eval_batch, workers);
            std::vector<double> erow;
            erow.push_back(double(epoch));
            for (const auto& c : problem.eval_columns()) erow.push_back(ev.get(c));
            diag_csv.row(erow);
            result.evals.push_back(erow);
            if (last) result.final_eval = ev;
            if (!opt.quiet) {
                std::cout << "epoch " << epoch << "  train_total " << total << "  eval";
                for (const auto& [k, v] : ev.items) std::cout << ' ' << k << '=' << v;
                std::cout << std::endl;
            }
        }
        if (cfg.training.checkpoint_every > 0 && (epoch + 1) % cfg.training.checkpoint_every == 0)
            save_checkpoint(epoch + 1, opt.out_dir / "checkpoint.bin");
    }
    save_checkpoint(cfg.training.epochs, opt.out_dir / "checkpoint.bin");
    return result;
}

} // namespace geopinn
