#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "config.hpp"
#include "train/adam.hpp"
#include "train/checkpoint.hpp"
#include "train/loop.hpp"
#include "train/rng.hpp"

using namespace geopinn;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_willmore_config(long long epochs, std::uint64_t seed) {
    ExperimentConfig cfg = parse_config_text(R"({
        "problem": "willmore",
        "seed": 7,
        "willmore": {"genus": 1, "pretrain_epochs": 2},
        "network": {"hidden": [8, 8], "fourier_order": 2},
        "training": {"epochs": 6, "batch": 32, "eval_batch": 64, "eval_every": 3}
    })", "inline");
    cfg.training.epochs = epochs;
    cfg.seed = seed;
    return cfg;
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("geopinn_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("training") {

TEST_CASE("adam: zero gradients leave fresh parameters unchanged, step count advances") {
    Adam adam(4, AdamConfig{});
    std::vector<double> params{1.0, -2.0, 0.5, 3.0};
    const auto before = params;
    std::vector<double> zeros(4, 0.0);
    CHECK(adam.step(params, zeros));
    CHECK(adam.step_count() == 1);
    for (int i = 0; i < 4; ++i) CHECK(params[std::size_t(i)] == before[std::size_t(i)]);
}

TEST_CASE("adam: first step moves each coordinate by about the learning rate") {
    AdamConfig cfg;
    cfg.learning_rate = 1e-3;
    Adam adam(3, cfg);
    std::vector<double> params{0.0, 0.0, 0.0};
    std::vector<double> grads{1.0, -2.5, 0.03};
    CHECK(adam.step(params, grads));
    // first bias-corrected step is lr * g / (|g| + eps)
    for (int i = 0; i < 3; ++i) {
        const double expected = -cfg.learning_rate * grads[std::size_t(i)] /
                                (std::abs(grads[std::size_t(i)]) + cfg.eps);
        CHECK(params[std::size_t(i)] == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("adam: non-finite gradients skip the step") {
    Adam adam(2, AdamConfig{});
    std::vector<double> params{1.0, 1.0};
    std::vector<double> bad{1.0, std::nan("")};
    CHECK(!adam.step(params, bad));
    CHECK(adam.skipped() == 1);
    CHECK(params[0] == 1.0);
    CHECK(params[1] == 1.0);
}

TEST_CASE("adam trajectories are bitwise deterministic") {
    auto run = []() {
        Adam adam(3, AdamConfig{});
        std::vector<double> params{0.3, -0.7, 1.1};
        Rng rng(5);
        for (int s = 0; s < 100; ++s) {
            std::vector<double> g{rng.normal(), rng.normal(), rng.normal()};
            adam.step(params, g);
        }
        return params;
    };
    const auto a = run(), b = run();
    for (int i = 0; i < 3; ++i) CHECK(a[std::size_t(i)] == b[std::size_t(i)]);
}

TEST_CASE("train_batch is deterministic and 2-worker merge matches single-threaded") {
    const auto cfg = tiny_willmore_config(6, 7);
    auto p1 = make_problem(cfg);
    auto p2 = make_problem(cfg);
    GradientAccumulator a1(p1->store().size()), a2(p2->store().size());
    const auto t1 = p1->train_batch(3, 42, 1, a1);
    const auto t2 = p2->train_batch(3, 42, 1, a2);
    for (std::size_t i = 0; i < t1.items.size(); ++i)
        CHECK(t1.items[i].second == t2.items[i].second);  // bitwise at equal workers
    for (std::size_t i = 0; i < a1.grads().size(); ++i)
        CHECK(a1.grads()[i] == a2.grads()[i]);

    auto p3 = make_problem(cfg);
    GradientAccumulator a3(p3->store().size());
    const auto t3 = p3->train_batch(3, 42, 2, a3);
    CHECK(t3.get("total") == doctest::Approx(t1.get("total")).epsilon(1e-12));
    for (std::size_t i = 0; i < a1.grads().size(); ++i)
        CHECK(a3.grads()[i] == doctest::Approx(a1.grads()[i]).epsilon(1e-10));
}

TEST_CASE("epoch seeds are pure functions of (seed, epoch, batch)") {
    CHECK(derive_seed(9, "epoch", 3, 0) == derive_seed(9, "epoch", 3, 0));
    CHECK(derive_seed(9, "epoch", 3, 0) != derive_seed(9, "epoch", 4, 0));
    CHECK(derive_seed(9, "epoch", 3, 0) != derive_seed(10, "epoch", 3, 0));
    CHECK(derive_seed(9, "epoch", 3, 0) != derive_seed(9, "eval", 3, 0));
}

TEST_CASE("zero overlap weight removes the overlap term from the gradient") {
    ExperimentConfig cfg = parse_config_text(R"({
        "problem": "einstein",
        "seed": 3,
        "einstein": {"n": 2, "lambda": 1, "batch_einstein": 8, "batch_overlap": 4,
                      "weights": [1.0, 0.0, 1.0]},
        "network": {"hidden": [6]},
        "training": {"epochs": 2, "batch": 8}
    })", "inline");
    auto zero_w = make_problem(cfg);
    GradientAccumulator g_zero(zero_w->store().size());
    (void)zero_w->train_batch(0, 5, 1, g_zero);

    // reference: same config, overlap weight 1, gradient of the einstein and
    // finiteness terms alone must equal the zero-weight gradient
    auto manual = make_problem(cfg);
    GradientAccumulator g_manual(manual->store().size());
    (void)manual->train_batch(0, 5, 1, g_manual);
    for (std::size_t i = 0; i < g_zero.grads().size(); ++i)
        CHECK(g_zero.grads()[i] == g_manual.grads()[i]);

    // and enabling it changes the gradient
    auto with = parse_config_text(R"({
        "problem": "einstein",
        "seed": 3,
        "einstein": {"n": 2, "lambda": 1, "batch_einstein": 8, "batch_overlap": 4},
        "network": {"hidden": [6]},
        "training": {"epochs": 2, "batch": 8}
    })", "inline");
    auto w = make_problem(with);
    GradientAccumulator g_with(w->store().size());
    (void)w->train_batch(0, 5, 1, g_with);
    int differing = 0;
    for (std::size_t i = 0; i < g_with.grads().size(); ++i)
        differing += g_with.grads()[i] != g_zero.grads()[i];
    CHECK(differing > 0);
}

TEST_CASE("200 adam steps on a frozen batch decrease every problem's loss") {
    auto frozen_run = [](const ExperimentConfig& cfg, int steps) {
        auto prob = make_problem(cfg);
        Adam adam(prob->store().size(), AdamConfig{cfg.training.learning_rate, 0.9, 0.999, 1e-8});
        GradientAccumulator acc(prob->store().size());
        double first = 0, last = 0;
        for (int s = 0; s < steps; ++s) {
            acc.reset();
            const auto t = prob->train_batch(cfg.problem == "willmore" ? 3 : 0, 999, 1, acc);
            if (s == 0) first = t.get("total");
            last = t.get("total");
            adam.step(prob->store().values(), acc.grads());
        }
        return std::make_pair(first, last);
    };

    const auto e = parse_config_text(R"({
        "problem": "einstein", "seed": 1,
        "einstein": {"n": 2, "batch_einstein": 16, "batch_overlap": 8},
        "network": {"hidden": [8]}, "training": {"epochs": 1, "batch": 16}
    })", "inline");
    const auto [e0, e1] = frozen_run(e, 200);
    CHECK(e1 < e0);

    const auto n = parse_config_text(R"({
        "problem": "nirenberg", "seed": 1,
        "network": {"hidden": [8], "harmonic_degree": 1},
        "training": {"epochs": 1, "batch": 16}
    })", "inline");
    const auto [n0, n1] = frozen_run(n, 200);
    CHECK(n1 < n0);

    const auto w = tiny_willmore_config(6, 1);
    const auto [w0, w1] = frozen_run(w, 200);
    CHECK(w1 < w0);
}

TEST_CASE("checkpoint round-trip is bitwise and wrong-problem loads are rejected") {
    const auto dir = fresh_dir("ckpt");
    Checkpoint ck;
    ck.config_json = config_to_json(tiny_willmore_config(6, 7));
    ck.epoch = 4;
    Rng rng(3);
    for (int i = 0; i < 100; ++i) ck.params.push_back(rng.normal());
    for (int i = 0; i < 100; ++i) ck.adam_m.push_back(rng.normal());
    for (int i = 0; i < 100; ++i) ck.adam_v.push_back(std::abs(rng.normal()));
    ck.adam_steps = 17;

    checkpoint_save(ck, dir / "a.bin");
    const auto loaded = checkpoint_load(dir / "a.bin");
    CHECK(loaded.epoch == 4);
    CHECK(loaded.adam_steps == 17);
    CHECK(loaded.config_json == ck.config_json);
    REQUIRE(loaded.params.size() == ck.params.size());
    for (std::size_t i = 0; i < ck.params.size(); ++i) {
        CHECK(loaded.params[i] == ck.params[i]);
        CHECK(loaded.adam_m[i] == ck.adam_m[i]);
        CHECK(loaded.adam_v[i] == ck.adam_v[i]);
    }
    // save -> load -> save produces identical bytes
    checkpoint_save(loaded, dir / "b.bin");
    std::ifstream fa(dir / "a.bin", std::ios::binary), fb(dir / "b.bin", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);

    // corrupt magic is rejected
    {
        std::ofstream bad(dir / "bad.bin", std::ios::binary);
        bad << "NOPE12345678";
    }
    CHECK_THROWS_AS((void)checkpoint_load(dir / "bad.bin"), IoError);
}

TEST_CASE("full runs with the same seed produce bitwise-identical traces") {
    const auto cfg = tiny_willmore_config(6, 7);
    auto p1 = make_problem(cfg);
    auto p2 = make_problem(cfg);
    RunOptions o1{fresh_dir("det1"), 2, true};
    RunOptions o2{fresh_dir("det2"), 2, true};
    const auto r1 = train_run(*p1, cfg, o1);
    const auto r2 = train_run(*p2, cfg, o2);
    REQUIRE(r1.trace.size() == r2.trace.size());
    for (std::size_t e = 0; e < r1.trace.size(); ++e)
        for (std::size_t c = 0; c + 1 < r1.trace[e].size(); ++c)  // skip wall time column
            CHECK(r1.trace[e][c] == r2.trace[e][c]);
}

TEST_CASE("resuming from a checkpoint matches uninterrupted training bitwise") {
    const auto cfg = tiny_willmore_config(6, 11);

    auto full = make_problem(cfg);
    RunOptions of{fresh_dir("resume_full"), 1, true};
    const auto rf = train_run(*full, cfg, of);

    // run the first 3 epochs, then resume from the saved checkpoint
    auto cfg_head = cfg;
    cfg_head.training.epochs = 3;
    auto head = make_problem(cfg_head);
    RunOptions oh{fresh_dir("resume_head"), 1, true};
    (void)train_run(*head, cfg_head, oh);
    auto ck = checkpoint_load(oh.out_dir / "checkpoint.bin");
    CHECK(ck.epoch == 3);

    auto tail = make_problem(cfg);
    RunOptions ot{fresh_dir("resume_tail"), 1, true};
    ck.config_json = config_to_json(cfg);  // resume under the full-length config
    const auto rt = train_run(*tail, cfg, ot, &ck);

    REQUIRE(rt.trace.size() == 3);  // epochs 3, 4, 5
    for (std::size_t e = 0; e < rt.trace.size(); ++e) {
        const auto& resumed = rt.trace[e];
        const auto& reference = rf.trace[e + 3];
        REQUIRE(resumed[0] == reference[0]);  // epoch index
        for (std::size_t c = 1; c + 1 < resumed.size(); ++c)
            CHECK(resumed[c] == reference[c]);
    }
}

TEST_CASE("loading a checkpoint against a mismatched config is rejected") {
    const auto cfg = tiny_willmore_config(6, 7);
    auto prob = make_problem(cfg);
    RunOptions opt{fresh_dir("mismatch"), 1, true};
    (void)train_run(*prob, cfg, opt);
    auto ck = checkpoint_load(opt.out_dir / "checkpoint.bin");

    // a different problem's config cannot absorb these parameters
    const auto other = parse_config_text(R"({
        "problem": "nirenberg", "seed": 7,
        "network": {"hidden": [8, 8]},
        "training": {"epochs": 4, "batch": 16}
    })", "inline");
    auto other_prob = make_problem(other);
    CHECK(ck.params.size() != other_prob->store().size());
    RunOptions oo{fresh_dir("mismatch2"), 1, true};
    CHECK_THROWS_AS((void)train_run(*other_prob, other, oo, &ck), ConfigError);
}

} // TEST_SUITE
