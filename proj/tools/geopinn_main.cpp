// geopinn: mesh-free optimization of geometric functionals with small
// neural function approximators. Subcommands: train, evaluate, export,
// diagnose; see README.md for the config format.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "config.hpp"
#include "errors.hpp"
#include "io/csv.hpp"
#include "train/checkpoint.hpp"
#include "train/loop.hpp"
#include "train/parallel.hpp"
#include "train/rng.hpp"

namespace fs = std::filesystem;
using namespace geopinn;

namespace {

struct LoadedRun {
    ExperimentConfig config;
    std::unique_ptr<Problem> problem;
    Checkpoint checkpoint;
};

LoadedRun load_run(const std::string& ckpt_path) {
    LoadedRun run;
    run.checkpoint = checkpoint_load(ckpt_path);
    run.config = parse_config_text(run.checkpoint.config_json, ckpt_path + "(embedded config)");
    run.problem = make_problem(run.config);
    if (run.checkpoint.params.size() != run.problem->store().size())
        throw IoError("checkpoint parameter count does not match its embedded config");
    run.problem->store().values() = run.checkpoint.params;
    return run;
}

int cmd_train(const std::string& config_path, const std::string& resume_path,
              const std::string& out_override, int workers_override, bool quiet) {
    ExperimentConfig cfg = parse_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (workers_override >= 0) cfg.workers = workers_override;

    RunOptions opt;
    opt.out_dir = cfg.out_dir;
    opt.workers = cfg.workers;
    opt.quiet = quiet;
    fs::create_directories(opt.out_dir);

    // echo the effective config (defaults included) next to the artifacts
    {
        std::ofstream echo(opt.out_dir / "config.echo.json");
        echo << config_to_json(cfg);
        if (!echo) throw IoError("cannot write config echo");
    }

    auto problem = make_problem(cfg);
    Checkpoint resume;
    const Checkpoint* resume_ptr = nullptr;
    if (!resume_path.empty()) {
        resume = checkpoint_load(resume_path);
        const auto embedded =
            parse_config_text(resume.config_json, resume_path + "(embedded config)");
        if (config_to_json(embedded) != config_to_json(cfg))
            throw ConfigError(ConfigError::Kind::Range,
                              "checkpoint was produced by a different config; refusing to resume");
        resume_ptr = &resume;
    }

    const auto result = train_run(*problem, cfg, opt, resume_ptr);
    std::cout << "final";
    for (const auto& [k, v] : result.final_eval.items) std::cout << ' ' << k << '=' << v;
    std::cout << "\ncheckpoint: " << (opt.out_dir / "checkpoint.bin").string() << std::endl;
    return kExitOk;
}

int cmd_evaluate(const std::string& ckpt, int batch, std::uint64_t seed, int workers_override) {
    auto run = load_run(ckpt);
    const int workers =
        resolve_workers(workers_override >= 0 ? workers_override : run.config.workers);
    const int b = batch > 0 ? batch : run.config.training.eval_batch;
    const auto ev = run.problem->evaluate(seed, b, workers);
    for (std::size_t i = 0; i < ev.items.size(); ++i)
        std::cout << (i ? "," : "") << ev.items[i].first;
    std::cout << "\n";
    std::vector<double> row;
    for (const auto& [k, v] : ev.items) row.push_back(v);
    write_csv_row(std::cout, row);
    return kExitOk;
}

int cmd_export(const std::string& ckpt, const std::string& what, int resolution, int batch,
               std::uint64_t seed, const std::string& out_override) {
    auto run = load_run(ckpt);
    const fs::path out_dir = out_override.empty() ? fs::path(run.config.out_dir) : fs::path(out_override);
    fs::create_directories(out_dir);
    run.problem->export_artifact(what, out_dir, resolution, batch, seed);
    std::cout << "exported " << what << " to " << out_dir.string() << std::endl;
    return kExitOk;
}

int cmd_diagnose(const std::string& ckpt, int batch, std::uint64_t seed,
                 const std::string& out_override, int workers_override) {
    auto run = load_run(ckpt);
    const fs::path out_dir = out_override.empty() ? fs::path(run.config.out_dir) : fs::path(out_override);
    fs::create_directories(out_dir);
    const int workers =
        resolve_workers(workers_override >= 0 ? workers_override : run.config.workers);
    const int b = batch > 0 ? batch : run.config.training.eval_batch;
    run.problem->diagnose(std::cout, out_dir, seed, b, workers);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"geometric PINN trainer"};
    app.require_subcommand(1);
    app.fallthrough();  // app-level flags may appear after the subcommand

    int workers = -1;
    app.add_option("--workers", workers, "worker thread count (0 = hardware)");

    std::string config_path, resume_path, out_dir;
    bool quiet = false;
    auto* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("config", config_path, "JSON config file")->required();
    train->add_option("--resume", resume_path, "resume from a checkpoint");
    train->add_option("--out", out_dir, "output directory override");
    train->add_flag("--quiet", quiet, "suppress progress lines");

    std::string ckpt;
    int batch = 0;
    std::uint64_t seed = 12345;
    auto* evaluate = app.add_subcommand("evaluate", "held-out losses and diagnostics");
    evaluate->add_option("checkpoint", ckpt, "checkpoint file")->required();
    evaluate->add_option("--batch", batch, "evaluation batch size");
    evaluate->add_option("--seed", seed, "evaluation seed");

    std::string what = "mesh";
    int resolution = 64;
    auto* exp = app.add_subcommand("export", "write meshes / fields / coefficients");
    exp->add_option("checkpoint", ckpt, "checkpoint file")->required();
    exp->add_option("--what", what, "mesh | field | coefficients")->required();
    exp->add_option("--resolution", resolution, "mesh grid resolution");
    exp->add_option("--batch", batch, "export sample count");
    exp->add_option("--seed", seed, "export seed");
    exp->add_option("--out", out_dir, "output directory override");

    auto* diag = app.add_subcommand("diagnose", "problem-specific diagnostic report");
    diag->add_option("checkpoint", ckpt, "checkpoint file")->required();
    diag->add_option("--batch", batch, "diagnostic batch size");
    diag->add_option("--seed", seed, "diagnostic seed");
    diag->add_option("--out", out_dir, "output directory override");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config_path, resume_path, out_dir, workers, quiet);
        if (evaluate->parsed()) return cmd_evaluate(ckpt, batch, seed, workers);
        if (exp->parsed()) {
            if (batch == 0) batch = 4096;
            return cmd_export(ckpt, what, resolution, batch, seed, out_dir);
        }
        if (diag->parsed()) return cmd_diagnose(ckpt, batch, seed, out_dir, workers);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return e.exit_code();
    } catch (const TrainingDivergence& e) {
        std::cerr << "training diverged: " << e.what() << std::endl;
        return kExitDivergence;
    } catch (const NumericDomainError& e) {
        std::cerr << "numeric error: " << e.what() << std::endl;
        return kExitDivergence;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << std::endl;
        return kExitIoError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 1;
}
