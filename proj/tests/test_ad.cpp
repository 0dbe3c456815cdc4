#include <doctest.h>

#include <cmath>

#include "ad/jet.hpp"
#include "ad/tape.hpp"
#include "net/mlp.hpp"
#include "net/param_store.hpp"
#include "oracles.hpp"
#include "train/rng.hpp"

using namespace geopinn;
namespace orc = geopinn::oracle;

TEST_SUITE("ad") {

TEST_CASE("jet seeds carry coordinates and unit gradients") {
    const auto jets = jet_seed<double, 2>({0.3, 0.7});
    CHECK(jets[0].value == 0.3);
    CHECK(jets[0].grad[0] == 1.0);
    CHECK(jets[0].grad[1] == 0.0);
    CHECK(jets[1].value == 0.7);
    CHECK(jets[1].grad[1] == 1.0);
    for (int k = 0; k < 3; ++k) {
        CHECK(jets[0].hess[std::size_t(k)] == 0.0);
        CHECK(jets[1].hess[std::size_t(k)] == 0.0);
    }
    const auto one = jet_seed<double, 1>({1.0});
    CHECK(one[0].value == 1.0);
    CHECK(one[0].grad[0] == 1.0);
    CHECK(one[0].hess[0] == 0.0);
}

TEST_CASE("composites reproduce plain evaluation in the value slot") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto tree = orc::random_expr(rng, 6, 3);
        const std::array<double, 3> x{rng.uniform(-1, 1), rng.uniform(-1, 1),
                                      rng.uniform(-1, 1)};
        const auto jets = jet_seed<double, 3>(x);
        const auto jet_val = orc::eval_expr(tree, jets);
        const double plain = orc::eval_expr(tree, x);
        CHECK(jet_val.value == doctest::Approx(plain).epsilon(1e-14));
    }
}

TEST_CASE("x*x at 3 gives (9, 6, 2)") {
    const auto x = jet_seed<double, 1>({3.0})[0];
    const auto y = x * x;
    CHECK(y.value == doctest::Approx(9.0));
    CHECK(y.grad[0] == doctest::Approx(6.0));
    CHECK(y.hess[0] == doctest::Approx(2.0));
}

TEST_CASE("tanh at 0 gives (0, 1, 0)") {
    const auto x = jet_seed<double, 1>({0.0})[0];
    const auto y = tanh(x);
    CHECK(y.value == 0.0);
    CHECK(y.grad[0] == 1.0);
    CHECK(y.hess[0] == 0.0);
}

TEST_CASE("sin(x*y) derivatives match finite differences") {
    const std::array<double, 2> x{0.4, 1.1};
    const auto jets = jet_seed<double, 2>(x);
    const auto f = sin(jets[0] * jets[1]);
    auto plain = [](const std::array<double, 2>& p) { return std::sin(p[0] * p[1]); };
    const auto g = orc::fd_gradient<2>(plain, x);
    const auto h = orc::fd_hessian<2>(plain, x);
    for (int i = 0; i < 2; ++i)
        CHECK(orc::close_rel(f.grad[std::size_t(i)], g[std::size_t(i)], 1e-6));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(orc::close_rel(f.h(i, j), h[std::size_t(i)][std::size_t(j)], 1e-4));
}

TEST_CASE("every jet op agrees with finite differences on random expression trees") {
    Rng rng(42);
    int checked = 0;
    for (int trial = 0; trial < 120; ++trial) {
        const auto tree = orc::random_expr(rng, 8, 3);
        const std::array<double, 3> x{rng.uniform(-1, 1), rng.uniform(-1, 1),
                                      rng.uniform(-1, 1)};
        const auto jets = jet_seed<double, 3>(x);
        const auto f = orc::eval_expr(tree, jets);
        auto plain = [&](const std::array<double, 3>& p) { return orc::eval_expr(tree, p); };
        const auto g = orc::fd_gradient<3>(plain, x);
        const auto h = orc::fd_hessian<3>(plain, x);
        for (int i = 0; i < 3; ++i)
            CHECK(orc::close_rel(f.grad[std::size_t(i)], g[std::size_t(i)], 1e-6));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j <= i; ++j)
                CHECK(orc::close_rel(f.h(i, j), h[std::size_t(i)][std::size_t(j)], 1e-4));
        ++checked;
    }
    CHECK(checked == 120);
}

TEST_CASE("hessian symmetry is bitwise after arbitrary composition") {
    Rng rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        const auto tree = orc::random_expr(rng, 8, 3);
        const std::array<double, 3> x{rng.uniform(-1, 1), rng.uniform(-1, 1),
                                      rng.uniform(-1, 1)};
        const auto f = orc::eval_expr(tree, jet_seed<double, 3>(x));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(f.h(i, j) == f.h(j, i));  // same packed element, bitwise by construction
    }
}

TEST_CASE("domain violations raise numeric-domain errors carrying the op") {
    const auto x = jet_seed<double, 1>({-2.0})[0];
    CHECK_THROWS_AS((void)log(x), NumericDomainError);
    CHECK_THROWS_AS((void)sqrt(x), NumericDomainError);
    const auto zero = jet_seed<double, 1>({0.0})[0];
    CHECK_THROWS_AS((void)(x / zero), NumericDomainError);
    try {
        (void)log(x);
    } catch (const NumericDomainError& e) {
        CHECK(e.op() == std::string("log"));
        CHECK(e.value() == -2.0);
    }
}

TEST_CASE("abs_smooth derivatives match finite differences away from zero") {
    for (double v : {-1.3, -0.2, 0.4, 2.0}) {
        const auto x = jet_seed<double, 1>({v})[0];
        const auto f = abs_smooth(x);
        auto plain = [](const std::array<double, 1>& p) { return abs_smooth(p[0]); };
        const auto g = orc::fd_gradient<1>(plain, {v});
        const auto h = orc::fd_hessian<1>(plain, {v});
        CHECK(orc::close_rel(f.grad[0], g[0], 1e-6));
        CHECK(orc::close_rel(f.hess[0], h[0][0], 1e-4));
    }
}

TEST_CASE("param_scalar: theta^2 backward gives 2*theta") {
    MLPConfig cfg;
    cfg.input_width = 1;
    cfg.hidden = {1};
    cfg.output_width = 1;
    ParameterStore store = init_params(cfg, 5);
    store.values()[0] = 1.5;
    Tape tape;
    GradientAccumulator acc(store.size());
    const Var theta = param_scalar(store, 0, tape);
    tape.backward(theta * theta, acc);
    CHECK(acc.grads()[0] == doctest::Approx(3.0));
    for (std::size_t i = 1; i < store.size(); ++i) CHECK(acc.grads()[i] == 0.0);
}

TEST_CASE("param_scalar bounds are checked") {
    MLPConfig cfg;
    cfg.input_width = 1;
    cfg.hidden = {1};
    cfg.output_width = 1;
    ParameterStore store = init_params(cfg, 5);
    Tape tape;
    CHECK_THROWS_AS((void)param_scalar(store, store.size(), tape), ConfigError);
}

TEST_CASE("backward of sum of squares") {
    ParameterStore store(0);
    MLPConfig cfg;
    cfg.input_width = 3;
    cfg.hidden = {1};
    cfg.output_width = 1;
    store.add_mlp(cfg);
    store.values()[0] = 1.0;
    store.values()[1] = 2.0;
    store.values()[2] = 3.0;
    Tape tape;
    GradientAccumulator acc(store.size());
    Var loss = Var(0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        const Var t = param_scalar(store, i, tape);
        loss += t * t;
    }
    tape.backward(loss, acc);
    CHECK(acc.grads()[0] == doctest::Approx(2.0));
    CHECK(acc.grads()[1] == doctest::Approx(4.0));
    CHECK(acc.grads()[2] == doctest::Approx(6.0));
}

TEST_CASE("backward of a constant loss is all zeros") {
    MLPConfig cfg;
    cfg.input_width = 2;
    cfg.hidden = {4};
    cfg.output_width = 1;
    ParameterStore store = init_params(cfg, 1);
    Tape tape;
    GradientAccumulator acc(store.size());
    tape.backward(Var(3.25), acc);
    for (double g : acc.grads()) CHECK(g == 0.0);
}

TEST_CASE("backward is linear in the loss") {
    MLPConfig cfg;
    cfg.input_width = 2;
    cfg.hidden = {6};
    cfg.output_width = 1;
    ParameterStore store = init_params(cfg, 3);

    auto forward_scalar = [&](Tape& tape) {
        TapeReader reader{store, tape};
        MLPWork<Var> work;
        std::vector<Var> feats{Var(0.3), Var(-0.8)}, out;
        mlp_forward(reader, store.net(0), feats, out, work);
        return out[0];
    };

    Tape tape;
    GradientAccumulator combined(store.size());
    {
        const Var l1 = forward_scalar(tape);
        const Var l2 = sq(forward_scalar(tape));
        tape.backward(Var(2.0) * l1 + Var(-3.0) * l2, combined);
    }
    GradientAccumulator separate(store.size());
    {
        const Var l1 = forward_scalar(tape);
        tape.backward(l1, separate, 2.0);
        const Var l2 = sq(forward_scalar(tape));
        tape.backward(l2, separate, -3.0);
    }
    for (std::size_t i = 0; i < store.size(); ++i)
        CHECK(combined.grads()[i] == doctest::Approx(separate.grads()[i]).epsilon(1e-12));
}

TEST_CASE("mlp parameter gradients match finite differences") {
    MLPConfig cfg;
    cfg.input_width = 2;
    cfg.hidden = {8, 8};
    cfg.output_width = 1;
    ParameterStore store = init_params(cfg, 17);
    const std::array<double, 2> x{0.37, -0.61};

    auto loss_plain = [&]() {
        MLPWork<Jet<double, 2>> work;
        const auto seeds = jet_seed<double, 2>(x);
        std::vector<Jet<double, 2>> feats(seeds.begin(), seeds.end()), out;
        mlp_forward(ValueReader{store}, store.net(0), feats, out, work);
        return out[0].value;
    };

    Tape tape;
    GradientAccumulator acc(store.size());
    {
        MLPWork<Jet<Var, 2>> work;
        const std::array<Var, 2> coords{Var(x[0]), Var(x[1])};
        const auto seeds = jet_seed<Var, 2>(coords);
        std::vector<Jet<Var, 2>> feats(seeds.begin(), seeds.end()), out;
        mlp_forward(TapeReader{store, tape}, store.net(0), feats, out, work);
        tape.backward(out[0].value, acc);
    }

    const double h = 1e-5;
    Rng pick(3);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t k = std::size_t(pick.next() % store.size());
        const double saved = store.values()[k];
        store.values()[k] = saved + h;
        const double fp = loss_plain();
        store.values()[k] = saved - h;
        const double fm = loss_plain();
        store.values()[k] = saved;
        CHECK(orc::close_rel(acc.grads()[k], (fp - fm) / (2.0 * h), 1e-5));
    }
}

TEST_CASE("gradient accumulation divided by N equals gradient of the mean") {
    MLPConfig cfg;
    cfg.input_width = 1;
    cfg.hidden = {5};
    cfg.output_width = 1;
    ParameterStore store = init_params(cfg, 23);
    const int n = 7;

    Tape tape;
    GradientAccumulator acc(store.size());
    for (int s = 0; s < n; ++s) {
        MLPWork<Var> work;
        std::vector<Var> feats{Var(0.1 * s)}, out;
        mlp_forward(TapeReader{store, tape}, store.net(0), feats, out, work);
        tape.backward(sq(out[0]), acc);
    }
    CHECK(acc.sample_count() == n);
    acc.scale(1.0 / n);

    GradientAccumulator direct(store.size());
    {
        Var mean = Var(0.0);
        for (int s = 0; s < n; ++s) {
            MLPWork<Var> work;
            std::vector<Var> feats{Var(0.1 * s)}, out;
            mlp_forward(TapeReader{store, tape}, store.net(0), feats, out, work);
            mean += sq(out[0]);
        }
        tape.backward(mean * Var(1.0 / n), direct);
    }
    for (std::size_t i = 0; i < store.size(); ++i)
        CHECK(acc.grads()[i] == doctest::Approx(direct.grads()[i]).epsilon(1e-12));
}

TEST_CASE("identical seeds give bitwise-identical gradients") {
    MLPConfig cfg;
    cfg.input_width = 2;
    cfg.hidden = {16};
    cfg.output_width = 2;
    auto run = [&]() {
        ParameterStore store = init_params(cfg, 99);
        Tape tape;
        GradientAccumulator acc(store.size());
        for (int s = 0; s < 5; ++s) {
            MLPWork<Jet<Var, 2>> work;
            const std::array<Var, 2> coords{Var(0.2 * s), Var(-0.1 * s)};
            const auto seeds = jet_seed<Var, 2>(coords);
            std::vector<Jet<Var, 2>> feats(seeds.begin(), seeds.end()), out;
            mlp_forward(TapeReader{store, tape}, store.net(0), feats, out, work);
            tape.backward(sq(out[0].value) + sq(out[1].grad[0]), acc);
        }
        return acc.grads();
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

} // TEST_SUITE
