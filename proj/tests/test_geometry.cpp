#include <doctest.h>

#include <cmath>

#include "geom/metric.hpp"
#include "geom/sphere_ops.hpp"
#include "geom/surface.hpp"
#include "net/spherical_harmonics.hpp"
#include "oracles.hpp"
#include "prob/sphere_chart.hpp"
#include "train/rng.hpp"
#include "train/samplers.hpp"

using namespace geopinn;
namespace orc = geopinn::oracle;

namespace {

// unit sphere chart phi = (cos u sin v, sin u sin v, cos v)
template <class T>
std::array<T, 3> sphere_chart(const T& u, const T& v) {
    return {cos(u) * sin(v), sin(u) * sin(v), cos(v)};
}

ImmersionSample<double> sample_surface(double u, double v,
                                       std::array<Jet<double, 2>, 3> (*fn)(const Jet<double, 2>&,
                                                                           const Jet<double, 2>&)) {
    const auto seeds = jet_seed<double, 2>({u, v});
    return ImmersionSample<double>::from_jets(fn(seeds[0], seeds[1]));
}

std::array<Jet<double, 2>, 3> sphere_jets(const Jet<double, 2>& u, const Jet<double, 2>& v) {
    return sphere_chart(u, v);
}
std::array<Jet<double, 2>, 3> plane_jets(const Jet<double, 2>& u, const Jet<double, 2>& v) {
    return {u, v, Jet<double, 2>(0.0)};
}
std::array<Jet<double, 2>, 3> cylinder_jets(const Jet<double, 2>& u, const Jet<double, 2>& v) {
    const double a = 0.8;
    return {a * cos(u), a * sin(u), v};
}

} // namespace

TEST_SUITE("geometry") {

TEST_CASE("christoffel of a constant metric vanishes") {
    MetricSample<double, 3> m;
    m.g = Mat<double, 3>::identity();
    m.g(0, 1) = m.g(1, 0) = 0.3;
    m.g(2, 2) = 2.0;
    for (auto& d : m.dg) d = Mat<double, 3>{};
    for (auto& d : m.ddg) d = Mat<double, 3>{};
    m.g_inv = mat_inverse(m.g);
    const auto gamma = christoffel(m);
    for (const auto& gk : gamma)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(gk(i, j) == 0.0);
}

TEST_CASE("polar sphere christoffel symbols match the symbolic table") {
    const double theta = kPi / 4.0;
    const auto m = orc::polar_sphere_sample(theta);
    const auto gamma = christoffel(m);
    CHECK(gamma[0](1, 1) == doctest::Approx(-std::sin(theta) * std::cos(theta)).epsilon(1e-10));
    CHECK(gamma[0](1, 1) == doctest::Approx(-0.5).epsilon(1e-10));
    CHECK(gamma[1](0, 1) == doctest::Approx(1.0 / std::tan(theta)).epsilon(1e-10));
    CHECK(gamma[1](1, 0) == doctest::Approx(gamma[1](0, 1)).epsilon(1e-14));
    CHECK(gamma[0](0, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(gamma[1](1, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    // more angles against the closed forms
    for (double t : {0.3, 1.0, 2.2, 2.9}) {
        const auto mt = orc::polar_sphere_sample(t);
        const auto g = christoffel(mt);
        CHECK(g[0](1, 1) == doctest::Approx(-std::sin(t) * std::cos(t)).epsilon(1e-10));
        CHECK(g[1](0, 1) == doctest::Approx(std::cos(t) / std::sin(t)).epsilon(1e-10));
    }
}

TEST_CASE("christoffel is invariant under constant metric scaling") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = sample_ball<3>(rng, 0.8);
        const auto m = orc::round_metric_symbolic<3>(x, 1.0);
        auto scaled = m;
        const double c = 3.7;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                scaled.g(i, j) *= c;
                for (int k = 0; k < 3; ++k) scaled.dg[std::size_t(k)](i, j) *= c;
                for (auto& dd : scaled.ddg) (void)dd;
            }
        for (auto& dd : scaled.ddg)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) dd(i, j) *= c;
        scaled.g_inv = mat_inverse(scaled.g);
        const auto a = christoffel(m);
        const auto b = christoffel(scaled);
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    CHECK(a[std::size_t(k)](i, j) ==
                          doctest::Approx(b[std::size_t(k)](i, j)).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("ricci of a flat metric vanishes") {
    MetricSample<double, 2> m;
    m.g = Mat<double, 2>::identity();
    for (auto& d : m.dg) d = Mat<double, 2>{};
    for (auto& d : m.ddg) d = Mat<double, 2>{};
    m.g_inv = mat_inverse(m.g);
    const auto r = ricci(m);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(r.ricci(i, j) == doctest::Approx(0.0).scale(1.0));
    CHECK(r.asymmetry <= 1e-12);
}

TEST_CASE("ricci of the polar sphere equals the metric") {
    for (double t : {0.4, kPi / 4, 1.3, 2.0}) {
        const auto m = orc::polar_sphere_sample(t);
        const auto r = ricci(m);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                CHECK(r.ricci(i, j) == doctest::Approx(m.g(i, j)).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("jet route and symbolic route agree on the ball-chart round metric") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const auto x = sample_ball<2>(rng, 0.9);
        const auto sym = orc::round_metric_symbolic<2>(x, 1.0);
        const auto jets = round_metric_jets<2>(x, 1.0);
        const auto viajets = MetricSample<double, 2>::from_jets(jets);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                CHECK(viajets.g(i, j) == doctest::Approx(sym.g(i, j)).epsilon(1e-10).scale(1.0));
                for (int k = 0; k < 2; ++k)
                    CHECK(viajets.dg[std::size_t(k)](i, j) ==
                          doctest::Approx(sym.dg[std::size_t(k)](i, j)).epsilon(1e-9).scale(1.0));
                for (int k = 0; k < 2; ++k)
                    for (int l = 0; l <= k; ++l)
                        CHECK(viajets.ddg_at(k, l)(i, j) ==
                              doctest::Approx(sym.ddg_at(k, l)(i, j)).epsilon(1e-9).scale(1.0));
            }
    }
}

TEST_CASE("round S2 ball-chart metric satisfies Ric = g at a thousand points") {
    Rng rng(23);
    double max_err = 0.0, max_asym = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto x = sample_ball<2>(rng, 0.9);
        const auto m = MetricSample<double, 2>::from_jets(round_metric_jets<2>(x, 1.0));
        const auto r = ricci(m);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                max_err = std::max(max_err, std::abs(r.ricci(i, j) - m.g(i, j)));
        max_asym = std::max(max_asym, r.asymmetry);
    }
    CHECK(max_err < 1e-8);
    CHECK(max_asym < 1e-8);
}

TEST_CASE("round S3 of radius sqrt(2) satisfies Ric = g") {
    Rng rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        const auto x = sample_ball<3>(rng, 0.9);
        const auto m = MetricSample<double, 3>::from_jets(round_metric_jets<3>(x, 2.0));
        const auto r = ricci(m);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(std::abs(r.ricci(i, j) - m.g(i, j)) < 1e-8);
    }
}

TEST_CASE("higher-dimensional reference metrics satisfy Ric = lambda g") {
    Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x4 = sample_ball<4>(rng, 0.85);
        const auto m4 = MetricSample<double, 4>::from_jets(
            round_metric_jets<4>(x4, einstein_reference_radius_sq<4>()));
        const auto r4 = ricci(m4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) CHECK(std::abs(r4.ricci(i, j) - m4.g(i, j)) < 1e-7);

        const auto x5 = sample_ball<5>(rng, 0.85);
        const auto m5 = MetricSample<double, 5>::from_jets(
            round_metric_jets<5>(x5, einstein_reference_radius_sq<5>()));
        const auto r5 = ricci(m5);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) CHECK(std::abs(r5.ricci(i, j) - m5.g(i, j)) < 1e-7);
    }
}

TEST_CASE("first fundamental form of the standard surfaces") {
    const auto sph = sample_surface(1.1, 0.7, sphere_jets);
    const auto I = first_fundamental(sph);
    CHECK(I.E == doctest::Approx(sq(std::sin(0.7))).epsilon(1e-12));
    CHECK(I.F == doctest::Approx(0.0).scale(1.0));
    CHECK(I.G == doctest::Approx(1.0).epsilon(1e-12));

    const auto pl = sample_surface(0.2, -1.4, plane_jets);
    const auto Ip = first_fundamental(pl);
    CHECK(Ip.E == 1.0);
    CHECK(Ip.F == 0.0);
    CHECK(Ip.G == 1.0);
}

TEST_CASE("first form positivity properties") {
    Rng rng(41);
    for (int t = 0; t < 200; ++t) {
        const double u = rng.uniform(0, 2 * kPi), v = rng.uniform(0.05, kPi - 0.05);
        const auto s = sample_surface(u, v, sphere_jets);
        const auto I = first_fundamental(s);
        CHECK(I.E >= 0.0);
        CHECK(I.G >= 0.0);
        CHECK(area_element_sq(I) >= -1e-15);
    }
}

TEST_CASE("unit normal: plane, sphere orientation, orthogonality") {
    const auto pl = sample_surface(0.3, 0.4, plane_jets);
    const auto n = unit_normal(pl);
    CHECK(n[0] == doctest::Approx(0.0).scale(1.0));
    CHECK(n[1] == doctest::Approx(0.0).scale(1.0));
    CHECK(n[2] == doctest::Approx(1.0));

    // chart orientation gives the inward normal: at (0, pi/2), n = -(1,0,0)
    const auto sp = sample_surface(0.0, kPi / 2, sphere_jets);
    const auto ns = unit_normal(sp);
    CHECK(ns[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(ns[1]) < 1e-12);
    CHECK(std::abs(ns[2]) < 1e-12);

    Rng rng(43);
    for (int t = 0; t < 100; ++t) {
        const double u = rng.uniform(0, 2 * kPi), v = rng.uniform(0.1, kPi - 0.1);
        const auto s = sample_surface(u, v, sphere_jets);
        const auto nn = unit_normal(s);
        CHECK(std::abs(dot3(nn, nn) - 1.0) < 1e-12);
        CHECK(std::abs(dot3(nn, s.phi_u)) < 1e-10);
        CHECK(std::abs(dot3(nn, s.phi_v)) < 1e-10);
    }
}

TEST_CASE("degenerate cross product raises the immersion error") {
    ImmersionSample<double> s{};
    s.phi_u = {1.0, 0.0, 0.0};
    s.phi_v = {2.0, 0.0, 0.0};  // parallel
    CHECK_THROWS_AS((void)unit_normal(s), DegenerateImmersionError);
}

TEST_CASE("second fundamental form: plane, sphere, cylinder") {
    const auto pl = sample_surface(0.5, 0.5, plane_jets);
    const auto IIp = second_fundamental(pl, unit_normal(pl));
    CHECK(IIp.L == doctest::Approx(0.0).scale(1.0));
    CHECK(IIp.M == doctest::Approx(0.0).scale(1.0));
    CHECK(IIp.N == doctest::Approx(0.0).scale(1.0));

    const double v = 0.9;
    const auto sp = sample_surface(2.0, v, sphere_jets);
    const auto IIs = second_fundamental(sp, unit_normal(sp));
    // inward normal: (L, M, N) = (sin^2 v, 0, 1)
    CHECK(IIs.L == doctest::Approx(sq(std::sin(v))).epsilon(1e-10));
    CHECK(IIs.M == doctest::Approx(0.0).scale(1.0));
    CHECK(IIs.N == doctest::Approx(1.0).epsilon(1e-10));

    const auto cy = sample_surface(1.2, 0.3, cylinder_jets);
    const auto IIc = second_fundamental(cy, unit_normal(cy));
    CHECK(std::abs(std::abs(IIc.L) - 0.8) < 1e-10);
    CHECK(IIc.M == doctest::Approx(0.0).scale(1.0));
    CHECK(IIc.N == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("mean curvature of sphere, cylinder, plane") {
    Rng rng(47);
    for (int t = 0; t < 50; ++t) {
        const double u = rng.uniform(0, 2 * kPi), v = rng.uniform(0.1, kPi - 0.1);
        const auto s = sample_surface(u, v, sphere_jets);
        const auto I = first_fundamental(s);
        const auto II = second_fundamental(s, unit_normal(s));
        CHECK(std::abs(std::abs(mean_curvature(I, II)) - 1.0) < 1e-10);
        CHECK(std::abs(gauss_curvature(I, II) - 1.0) < 1e-10);
    }
    const auto cy = sample_surface(0.7, -2.0, cylinder_jets);
    const auto Ic = first_fundamental(cy);
    const auto IIc = second_fundamental(cy, unit_normal(cy));
    CHECK(std::abs(std::abs(mean_curvature(Ic, IIc)) - 1.0 / (2.0 * 0.8)) < 1e-10);
    CHECK(std::abs(gauss_curvature(Ic, IIc)) < 1e-12);

    const auto pl = sample_surface(0.0, 0.0, plane_jets);
    const auto Ip = first_fundamental(pl);
    const auto IIp = second_fundamental(pl, unit_normal(pl));
    CHECK(mean_curvature(Ip, IIp) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("area element: sphere sin v, plane 1, scaling homogeneity") {
    const double v = 1.234;
    const auto s = sample_surface(0.4, v, sphere_jets);
    CHECK(area_element(first_fundamental(s)) == doctest::Approx(std::sin(v)).epsilon(1e-12));
    const auto pl = sample_surface(1.0, 2.0, plane_jets);
    CHECK(area_element(first_fundamental(pl)) == doctest::Approx(1.0));

    // phi -> c phi multiplies dA by c^2
    const double c = 1.7;
    auto scaled = s;
    for (auto* vec : {&scaled.phi, &scaled.phi_u, &scaled.phi_v, &scaled.phi_uu, &scaled.phi_uv,
                      &scaled.phi_vv})
        for (auto& x : *vec) x *= c;
    CHECK(area_element(first_fundamental(scaled)) ==
          doctest::Approx(c * c * std::sin(v)).epsilon(1e-12));
}

TEST_CASE("H^2 >= K and normal-flip covariance") {
    Rng rng(53);
    for (int t = 0; t < 100; ++t) {
        // a wavy graph surface, generic enough
        const double u = rng.uniform(-1, 1), v = rng.uniform(-1, 1);
        const auto seeds = jet_seed<double, 2>({u, v});
        const std::array<Jet<double, 2>, 3> jets{
            seeds[0], seeds[1], sin(seeds[0] * Jet<double, 2>(2.0)) * cos(seeds[1])};
        const auto s = ImmersionSample<double>::from_jets(jets);
        const auto I = first_fundamental(s);
        auto n = unit_normal(s);
        const auto II = second_fundamental(s, n);
        const double h = mean_curvature(I, II);
        const double k = gauss_curvature(I, II);
        CHECK(h * h >= k - 1e-12);

        Vec3<double> flipped{-n[0], -n[1], -n[2]};
        const auto IIf = second_fundamental(s, flipped);
        CHECK(IIf.L == doctest::Approx(-II.L).scale(1.0));
        CHECK(mean_curvature(I, IIf) == doctest::Approx(-h).scale(1.0));
        CHECK(gauss_curvature(I, IIf) == doctest::Approx(k).scale(1.0));
    }
}

TEST_CASE("sphere laplacian: linear functions are degree-1 eigenfunctions") {
    Rng rng(59);
    for (int t = 0; t < 50; ++t) {
        const auto p = sample_unit_sphere(rng);
        const auto seeds = jet_seed<double, 3>(p);
        const auto u = seeds[2];  // u = x3
        CHECK(laplace_beltrami_sphere(u, p) == doctest::Approx(-2.0 * p[2]).epsilon(1e-12));
        const Jet<double, 3> c(4.2);
        CHECK(laplace_beltrami_sphere(c, p) == doctest::Approx(0.0).scale(1.0));
    }
}

TEST_CASE("sphere laplacian: Y20 harmonic extension has eigenvalue -6") {
    Rng rng(61);
    for (int t = 0; t < 50; ++t) {
        const auto p = sample_unit_sphere(rng);
        const auto seeds = jet_seed<double, 3>(p);
        const auto y = real_sh(2, 0, seeds[0], seeds[1], seeds[2]);
        const double lap = laplace_beltrami_sphere(y, p);
        CHECK(std::abs(lap - (-6.0) * y.value) < 1e-8);
    }
}

TEST_CASE("off-sphere points are rejected") {
    const auto seeds = jet_seed<double, 3>({0.5, 0.5, 0.5});
    CHECK_THROWS_AS((void)laplace_beltrami_sphere(seeds[0], {0.5, 0.5, 0.5}), ConfigError);
}

} // TEST_SUITE
