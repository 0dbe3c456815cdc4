#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ad/jet.hpp"
#include "ad/tape.hpp"
#include "errors.hpp"
#include "geom/surface.hpp"
#include "io/csv.hpp"
#include "io/obj.hpp"
#include "net/feature_map.hpp"
#include "net/mlp.hpp"
#include "net/param_store.hpp"
#include "prob/problem.hpp"
#include "train/parallel.hpp"
#include "train/rng.hpp"
#include "train/samplers.hpp"

namespace geopinn {

// ---------------------------------------------------------------------------
// Fundamental domains

struct Chart {
    double u_lo = 0.0, u_hi = 2.0 * kPi;
    double v_lo = 0.0, v_hi = 2.0 * kPi;
    bool punctured = false;
    std::array<double, 2> puncture_center{kPi, kPi};
    double puncture_radius = 0.0;

    double box_measure() const { return (u_hi - u_lo) * (v_hi - v_lo); }
    double measure() const {
        return box_measure() -
               (punctured ? kPi * puncture_radius * puncture_radius : 0.0);
    }
    bool inside_puncture(double u, double v) const {
        if (!punctured) return false;
        const double dx = u - puncture_center[0], dy = v - puncture_center[1];
        return dx * dx + dy * dy < puncture_radius * puncture_radius;
    }
};

struct GenusDomain {
    int genus = 0;
    std::vector<Chart> charts;

    static GenusDomain create(int genus, double puncture_radius = 0.6) {
        GenusDomain d;
        d.genus = genus;
        switch (genus) {
        case 0: {
            Chart c;
            c.v_hi = kPi;  // polar angle
            d.charts.push_back(c);
            break;
        }
        case 1: {
            d.charts.push_back(Chart{});
            break;
        }
        case 2: {
            Chart c;
            c.punctured = true;
            c.puncture_radius = puncture_radius;
            if (puncture_radius <= 0.0 || kPi + puncture_radius >= 2.0 * kPi)
                throw ConfigError(ConfigError::Kind::Range,
                                  "puncture disc must sit strictly inside the chart");
            d.charts.push_back(c);
            d.charts.push_back(c);
            break;
        }
        default:
            throw ConfigError(ConfigError::Kind::Range, "genus must be 0, 1 or 2");
        }
        return d;
    }
};

struct DomainPoint {
    int chart = 0;
    double u = 0.0, v = 0.0;
};

// Uniform over each chart's box minus puncture (rejection); charts get
// deterministic sample counts proportional to their measure.
inline std::vector<DomainPoint> sample_domain(const GenusDomain& domain, int batch,
                                              std::uint64_t seed) {
    if (batch < 1) throw ConfigError(ConfigError::Kind::Range, "batch must be >= 1");
    double total = 0.0;
    for (const auto& c : domain.charts) total += c.measure();
    std::vector<DomainPoint> pts;
    pts.reserve(std::size_t(batch));
    Rng rng(seed);
    int assigned = 0;
    for (std::size_t ci = 0; ci < domain.charts.size(); ++ci) {
        const auto& c = domain.charts[ci];
        const int count = (ci + 1 == domain.charts.size())
                              ? batch - assigned
                              : int(std::floor(double(batch) * c.measure() / total));
        assigned += count;
        for (int s = 0; s < count; ++s) {
            for (;;) {
                const double u = rng.uniform(c.u_lo, c.u_hi);
                const double v = rng.uniform(c.v_lo, c.v_hi);
                if (!c.inside_puncture(u, v)) {
                    pts.push_back({int(ci), u, v});
                    break;
                }
            }
        }
    }
    return pts;
}

// ---------------------------------------------------------------------------
// Analytic reference surfaces (pretraining targets and test oracles)

template <class T>
std::array<T, 3> ellipsoid_map(const T& u, const T& v, double ax, double ay, double az) {
    const T su = sin(u), cu = cos(u), sv = sin(v), cv = cos(v);
    return {T(ax) * sv * cu, T(ay) * sv * su, T(az) * cv};
}

// Torus of revolution around the z axis, ring radius big_r, tube radius
// small_r, recentred at center_x, with phase shifts so puncture spots can be
// aimed; (u, v) are 2*pi-periodic.
template <class T>
std::array<T, 3> torus_map(const T& u, const T& v, double big_r, double small_r,
                           double center_x = 0.0, double u_phase = 0.0, double v_phase = 0.0) {
    const T uu = u + T(u_phase);
    const T vv = v + T(v_phase);
    const T ring = T(big_r) + T(small_r) * cos(vv);
    return {T(center_x) + ring * cos(uu), ring * sin(uu), T(small_r) * sin(vv)};
}

struct PretrainTarget {
    int genus = 0;
    // genus-2 chart targets: two displaced tori whose (pi,pi) chart points
    // map to the facing closest-approach points
    double ellipsoid_ax = 1.0, ellipsoid_ay = 1.0, ellipsoid_az = 1.5;
    double torus_R = 2.0, torus_r = 0.5;
    double g2_R = 0.9, g2_r = 0.3;
    double displacement = 2.5;

    template <class T>
    std::array<T, 3> map(int chart, const T& u, const T& v) const {
        switch (genus) {
        case 0:
            return ellipsoid_map(u, v, ellipsoid_ax, ellipsoid_ay, ellipsoid_az);
        case 1:
            return torus_map(u, v, torus_R, torus_r);
        case 2:
            if (chart == 0)
                return torus_map(u, v, g2_R, g2_r, -0.5 * displacement, kPi, kPi);
            return torus_map(u, v, g2_R, g2_r, 0.5 * displacement, 0.0, kPi);
        default:
            throw ConfigError(ConfigError::Kind::Range, "genus must be 0, 1 or 2");
        }
    }
};

// ---------------------------------------------------------------------------
// Monte Carlo Willmore estimator

struct WillmoreEstimate {
    double energy = 0.0;
    double std_error = 0.0;
    long long degenerate = 0;
    long long total_samples = 0;
};

// Stratified MC of a curvature density over the charts:
//   sum_c |Omega_c| * mean_c(density), with the stratum standard error.
// SurfaceFn: (chart, u, v) -> array<Jet<double,2>,3>;
// Density: (ImmersionSample, I, II) -> double, evaluated per sample.
template <class SurfaceFn, class Density>
WillmoreEstimate surface_integral_mc(const SurfaceFn& phi, const GenusDomain& domain, int batch,
                                     std::uint64_t seed, int workers, const Density& density) {
    const auto pts = sample_domain(domain, batch, seed);
    std::vector<double> integrand(pts.size(), 0.0);
    std::vector<char> degenerate(pts.size(), 0);
    run_workers(workers, pts.size(), [&](int /*w*/, std::size_t lo, std::size_t hi) {
        for (std::size_t s = lo; s < hi; ++s) {
            const auto jets = phi(pts[s].chart, pts[s].u, pts[s].v);
            const auto sample = ImmersionSample<double>::from_jets(jets);
            const auto I = first_fundamental(sample);
            if (immersion_degenerate(I)) {
                degenerate[s] = 1;
                continue;
            }
            const auto n = unit_normal(sample);
            const auto II = second_fundamental(sample, n);
            integrand[s] = density(sample, I, II);
        }
    });

    WillmoreEstimate est;
    est.total_samples = (long long)(pts.size());
    for (std::size_t ci = 0; ci < domain.charts.size(); ++ci) {
        double sum = 0.0, count = 0.0;
        for (std::size_t s = 0; s < pts.size(); ++s) {
            if (pts[s].chart != int(ci)) continue;
            if (degenerate[s]) {
                est.degenerate++;
                continue;
            }
            sum += integrand[s];
            count += 1.0;
        }
        if (count == 0.0) continue;
        const double mean = sum / count;
        double var = 0.0;
        for (std::size_t s = 0; s < pts.size(); ++s) {
            if (pts[s].chart != int(ci) || degenerate[s]) continue;
            var += sq(integrand[s] - mean);
        }
        var = count > 1.0 ? var / (count - 1.0) : 0.0;
        const double measure = domain.charts[ci].measure();
        est.energy += measure * mean;
        est.std_error += measure * measure * var / count;
    }
    est.std_error = std::sqrt(est.std_error);
    return est;
}

// |Omega| * (1/B) * sum H_i^2 sqrt(E_i G_i - F_i^2), summed over charts.
template <class SurfaceFn>
WillmoreEstimate willmore_energy_mc(const SurfaceFn& phi, const GenusDomain& domain, int batch,
                                    std::uint64_t seed, int workers = 1) {
    return surface_integral_mc(phi, domain, batch, seed, workers,
                               [](const ImmersionSample<double>& s, const FirstForm<double>& I,
                                  const SecondForm<double>& II) {
                                   (void)s;
                                   const double h = mean_curvature(I, II);
                                   return h * h * area_element(I);
                               });
}

// (1/2pi) * integral of K dA; Gauss-Bonnet says this is the Euler
// characteristic for closed surfaces.
template <class SurfaceFn>
WillmoreEstimate euler_char_mc(const SurfaceFn& phi, const GenusDomain& domain, int batch,
                               std::uint64_t seed, int workers = 1) {
    auto est = surface_integral_mc(phi, domain, batch, seed, workers,
                                   [](const ImmersionSample<double>& s,
                                      const FirstForm<double>& I, const SecondForm<double>& II) {
                                       (void)s;
                                       return gauss_curvature(I, II) * area_element(I);
                                   });
    est.energy /= 2.0 * kPi;
    est.std_error /= 2.0 * kPi;
    return est;
}

// ---------------------------------------------------------------------------
// Loss pieces shared between training and evaluation

inline constexpr double kRegularityMargin = 1e-3;  // floor on sqrt(EG - F^2)
inline constexpr double kRadiusCap = 10.0;         // soft bound on |phi|
inline constexpr double kSmoothEps = 1e-12;
inline constexpr double kBarrierSharpness = 50.0;

// Sharpened softplus barrier (1/k) log(1 + e^{k x}): still twice
// differentiable, but effectively zero once the argument is a tenth below
// zero, so the penalty exerts no spurious expansion pressure on healthy
// charts where the area element is O(1).
template <class S>
S softplus_barrier(const S& x) {
    return S(1.0 / kBarrierSharpness) * softplus(S(kBarrierSharpness) * x);
}

// barrier(margin - dA) + softplus(|phi| - cap), both smoothed.
template <class S>
S regularity_penalty(const ImmersionSample<S>& sample, const FirstForm<S>& I) {
    const S area_sq = area_element_sq(I);
    const S area_smooth = sqrt(area_sq + S(kSmoothEps * kSmoothEps));
    const S radius = sqrt(dot3(sample.phi, sample.phi) + S(kSmoothEps * kSmoothEps));
    return softplus_barrier(S(kRegularityMargin) - area_smooth) +
           softplus(radius - S(kRadiusCap));
}

// Annulus correspondence for the genus-2 gluing: in polar coordinates
// (rho, alpha) around each chart's puncture center, chart-1's annulus point
// maps to chart-2's (rho', alpha') = (k/rho, -alpha) with k = r_in * r_out,
// an orientation-reversing involution exchanging the annulus boundaries.
struct GluingCorrespondence {
    std::array<double, 2> center{kPi, kPi};
    double r_in = 0.6;
    double r_out = 1.2;

    double inversion_constant() const { return r_in * r_out; }

    template <class T>
    std::array<T, 2> apply(const T& u, const T& v) const {
        const T dx = u - T(center[0]);
        const T dy = v - T(center[1]);
        const T rho_sq = dx * dx + dy * dy;
        const T scale = T(inversion_constant()) / rho_sq;  // k/rho^2 : maps rho -> k/rho
        // angle reflection alpha -> -alpha means (dx, dy) -> (dx, -dy) scaled
        return {T(center[0]) + scale * dx, T(center[1]) - scale * dy};
    }
};

inline std::vector<std::array<double, 2>> sample_gluing_annulus(const GluingCorrespondence& c,
                                                                int batch, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::array<double, 2>> pts(static_cast<std::size_t>(batch));
    for (auto& p : pts) {
        const double rho =
            std::sqrt(rng.uniform(c.r_in * c.r_in, c.r_out * c.r_out));  // uniform in area
        const double alpha = rng.uniform(0.0, 2.0 * kPi);
        p = {c.center[0] + rho * std::cos(alpha), c.center[1] + rho * std::sin(alpha)};
    }
    return pts;
}

// C0/C1/C2 mismatch between phi1 at p and phi2 transported through the
// correspondence (the chain rule is applied by evaluating phi2 on the jets
// of the correspondence image, so derivatives compare in chart-1 frame).
template <class S, class Fn1, class Fn2>
S gluing_mismatch(const Fn1& phi1_jets, const Fn2& phi2_jets, const std::array<double, 2>& p,
                  const GluingCorrespondence& corr, const std::array<double, 3>& order_weights) {
    const std::array<S, 2> coords{S(p[0]), S(p[1])};
    const auto seeds = jet_seed<S, 2>(coords);
    const auto a = phi1_jets(seeds);
    const auto image = corr.apply(seeds[0], seeds[1]);
    const auto b = phi2_jets(image);
    S c0 = S(0.0), c1 = S(0.0), c2 = S(0.0);
    for (int c = 0; c < 3; ++c) {
        const auto& ja = a[std::size_t(c)];
        const auto& jb = b[std::size_t(c)];
        c0 += sq(ja.value - jb.value);
        for (int i = 0; i < 2; ++i) c1 += sq(ja.grad[std::size_t(i)] - jb.grad[std::size_t(i)]);
        for (int k = 0; k < 3; ++k) c2 += sq(ja.hess[std::size_t(k)] - jb.hess[std::size_t(k)]);
    }
    return S(order_weights[0]) * c0 + S(order_weights[1]) * c1 + S(order_weights[2]) * c2;
}

// ---------------------------------------------------------------------------
// Neural Willmore flow

struct WillmoreConfig {
    int genus = 0;
    long long pretrain_epochs = 500;
    double puncture_radius = 0.6;
    double annulus_outer = 1.2;
    double gluing_max_weight = 20.0;
    std::array<double, 3> gluing_order_weights{1.0, 0.1, 0.01};
    int gluing_batch = 256;
    double regularity_weight = 1.0;
    double displacement = 2.5;

    void validate() const {
        if (genus < 0 || genus > 2)
            throw ConfigError(ConfigError::Kind::Range, "genus must be 0, 1 or 2");
        if (pretrain_epochs < 0)
            throw ConfigError(ConfigError::Kind::Range, "pretrain_epochs must be >= 0");
        if (!(puncture_radius > 0.0 && annulus_outer > puncture_radius))
            throw ConfigError(ConfigError::Kind::Range,
                              "need 0 < puncture_radius < annulus_outer");
        if (gluing_batch < 1)
            throw ConfigError(ConfigError::Kind::Range, "gluing_batch must be >= 1");
        if (!(gluing_max_weight >= 0.0) || !(regularity_weight >= 0.0))
            throw ConfigError(ConfigError::Kind::Range, "weights must be >= 0");
    }
};

class WillmoreProblem final : public Problem {
public:
    WillmoreProblem(const WillmoreConfig& cfg, const NetworkConfig& net, std::uint64_t seed)
        : cfg_(cfg), seed_(seed), store_(derive_seed(seed, "params")) {
        cfg_.validate();
        domain_ = GenusDomain::create(cfg_.genus, cfg_.puncture_radius);
        target_.genus = cfg_.genus;
        target_.displacement = cfg_.displacement;
        corr_.r_in = cfg_.puncture_radius;
        corr_.r_out = cfg_.annulus_outer;

        if (cfg_.genus == 0) {
            features_.kind = FeatureKind::SphereHarmonics;
            features_.input_dim = 2;
            features_.order = net.harmonic_degree;
        } else {
            features_.kind = FeatureKind::FourierTorus;
            features_.input_dim = 2;
            features_.order = net.fourier_order;
        }
        if (net.features == "identity") features_.kind = FeatureKind::Identity;
        features_.validate();

        MLPConfig mlp;
        mlp.input_width = features_.output_dim();
        mlp.hidden = net.hidden.empty() ? std::vector<int>{128, 128, 128} : net.hidden;
        mlp.output_width = 3;
        for (std::size_t c = 0; c < domain_.charts.size(); ++c)
            chart_net_.push_back(store_.add_mlp(mlp));
    }

    std::string kind() const override { return "willmore"; }
    ParameterStore& store() override { return store_; }
    const ParameterStore& store() const override { return store_; }
    const WillmoreConfig& config() const { return cfg_; }
    const GenusDomain& domain() const { return domain_; }
    const PretrainTarget& target() const { return target_; }

    void set_batch(int b) { batch_ = b; }
    void set_total_epochs(long long e) { total_epochs_ = e; }

    std::vector<std::string> train_columns() const override {
        return {"willmore", "regularity", "gluing", "degeneracy_rate", "pretrain", "total"};
    }
    std::vector<std::string> eval_columns() const override {
        return {"willmore",   "willmore_stderr", "regularity", "gluing",
                "degeneracy_rate", "euler_char",  "euler_char_stderr"};
    }

    // Gluing weight ramps linearly from 0 to its maximum over the first
    // third of the post-pretraining epochs.
    double gluing_weight(long long epoch) const {
        if (cfg_.genus != 2 || epoch < cfg_.pretrain_epochs) return 0.0;
        const long long flow = std::max<long long>(1, total_epochs_ - cfg_.pretrain_epochs);
        const long long ramp = std::max<long long>(1, flow / 3);
        const double t = double(epoch - cfg_.pretrain_epochs) / double(ramp);
        return cfg_.gluing_max_weight * std::min(1.0, t);
    }

    TermValues train_batch(long long epoch, std::uint64_t seed, int workers,
                           GradientAccumulator& acc) override {
        if (epoch < cfg_.pretrain_epochs) return pretrain_batch(seed, workers, acc);
        return flow_batch(epoch, seed, workers, acc);
    }

    TermValues evaluate(std::uint64_t seed, int batch, int workers) override {
        auto jets_fn = [&](int chart, double u, double v) {
            MLPWork<Jet<double, 2>> work;
            ValueReader reader{store_};
            return phi_jets_at(reader, chart, u, v, work);
        };
        const auto energy =
            willmore_energy_mc(jets_fn, domain_, batch, derive_seed(seed, "eval-w"), workers);
        const auto euler =
            euler_char_mc(jets_fn, domain_, batch, derive_seed(seed, "eval-chi"), workers);

        // regularity on the same kind of sample set
        const auto pts = sample_domain(domain_, batch, derive_seed(seed, "eval-reg"));
        std::vector<double> reg(pts.size());
        run_workers(workers, pts.size(), [&](int /*w*/, std::size_t lo, std::size_t hi) {
            MLPWork<Jet<double, 2>> work;
            for (std::size_t s = lo; s < hi; ++s) {
                ValueReader reader{store_};
                const auto jets = phi_jets_at(reader, pts[s].chart, pts[s].u, pts[s].v, work);
                const auto sample = ImmersionSample<double>::from_jets(jets);
                reg[s] = regularity_penalty(sample, first_fundamental(sample));
            }
        });
        double reg_mean = 0.0;
        for (double r : reg) reg_mean += r;
        reg_mean /= double(pts.size());

        TermValues t;
        t.add("willmore", energy.energy);
        t.add("willmore_stderr", energy.std_error);
        t.add("regularity", reg_mean);
        t.add("gluing", cfg_.genus == 2
                            ? gluing_rms(derive_seed(seed, "eval-glue"), cfg_.gluing_batch, workers)
                            : 0.0);
        t.add("degeneracy_rate",
              energy.total_samples > 0 ? double(energy.degenerate) / double(energy.total_samples)
                                       : 0.0);
        t.add("euler_char", euler.energy);
        t.add("euler_char_stderr", euler.std_error);
        return t;
    }

    void diagnose(std::ostream& out, const std::filesystem::path& /*out_dir*/,
                  std::uint64_t seed, int batch, int workers) override {
        const auto ev = evaluate(seed, batch, workers);
        out << "willmore," << ev.get("willmore") << ",stderr," << ev.get("willmore_stderr")
            << "\n";
        out << "euler_char," << ev.get("euler_char") << ",stderr,"
            << ev.get("euler_char_stderr") << "\n";
        out << "degeneracy_rate," << ev.get("degeneracy_rate") << "\n";
        if (cfg_.genus == 2) out << "gluing_rms," << ev.get("gluing") << "\n";
    }

    void export_artifact(const std::string& what, const std::filesystem::path& out_dir,
                         int resolution, int /*batch*/, std::uint64_t /*seed*/) override {
        if (what != "mesh")
            throw ConfigError(ConfigError::Kind::Range, "willmore export supports --what mesh");
        for (std::size_t c = 0; c < domain_.charts.size(); ++c) {
            const auto mesh = chart_mesh(int(c), resolution);
            const std::string name = domain_.charts.size() == 1
                                         ? "surface.obj"
                                         : "surface_chart" + std::to_string(c + 1) + ".obj";
            write_obj(out_dir / name, mesh);
        }
    }

    TriMesh chart_mesh(int chart, int resolution) const {
        const Chart& c = domain_.charts.at(std::size_t(chart));
        GridSpec spec;
        spec.resolution = resolution;
        spec.u_lo = c.u_lo;
        spec.u_hi = c.u_hi;
        spec.v_lo = c.v_lo;
        spec.v_hi = c.v_hi;
        if (cfg_.genus == 0)
            spec.topology = GridTopology::SphereUV;
        else if (cfg_.genus == 1)
            spec.topology = GridTopology::Torus;
        else {
            spec.topology = GridTopology::PuncturedTorus;
            spec.puncture_center = c.puncture_center;
            spec.puncture_radius = c.puncture_radius;
        }
        return mesh_parametric(
            [&](double u, double v) { return phi_values_at(chart, u, v); }, spec);
    }

    std::array<double, 3> phi_values_at(int chart, double u, double v) const {
        MLPWork<double> work;
        ValueReader reader{store_};
        std::vector<double> coords{u, v}, feats, out;
        apply_features(features_, coords, feats);
        mlp_forward(reader, store_.net(chart_net_.at(std::size_t(chart))), feats, out, work);
        return {out[0], out[1], out[2]};
    }

    template <class Reader>
    std::array<Jet<typename Reader::Scalar, 2>, 3> phi_jets_at(
        const Reader& reader, int chart, double u, double v,
        MLPWork<Jet<typename Reader::Scalar, 2>>& work) const {
        using S = typename Reader::Scalar;
        const std::array<S, 2> coords{S(u), S(v)};
        return phi_jets_from(reader, chart, jet_seed<S, 2>(coords), work);
    }

    template <class Reader>
    std::array<Jet<typename Reader::Scalar, 2>, 3> phi_jets_from(
        const Reader& reader, int chart,
        const std::array<Jet<typename Reader::Scalar, 2>, 2>& coord_jets,
        MLPWork<Jet<typename Reader::Scalar, 2>>& work) const {
        using S = typename Reader::Scalar;
        std::vector<Jet<S, 2>> coords(coord_jets.begin(), coord_jets.end());
        std::vector<Jet<S, 2>> feats, out;
        apply_features(features_, coords, feats);
        mlp_forward(reader, store_.net(chart_net_.at(std::size_t(chart))), feats, out, work);
        return {out[0], out[1], out[2]};
    }

    // RMS position mismatch across the gluing correspondence; the
    // connectedness diagnostic for the two-chart surface.
    double gluing_rms(std::uint64_t seed, int batch, int workers) const {
        const auto pts = sample_gluing_annulus(corr_, batch, seed);
        std::vector<double> sq_mismatch(pts.size());
        run_workers(workers, pts.size(), [&](int /*w*/, std::size_t lo, std::size_t hi) {
            MLPWork<Jet<double, 2>> work;
            for (std::size_t s = lo; s < hi; ++s) {
                ValueReader reader{store_};
                const double c0 = gluing_mismatch<double>(
                    [&](const std::array<Jet<double, 2>, 2>& j) {
                        return phi_jets_from(reader, 0, j, work);
                    },
                    [&](const std::array<Jet<double, 2>, 2>& j) {
                        return phi_jets_from(reader, 1, j, work);
                    },
                    pts[s], corr_, {1.0, 0.0, 0.0});
                sq_mismatch[s] = c0;
            }
        });
        double mean = 0.0;
        for (double v : sq_mismatch) mean += v;
        return std::sqrt(mean / double(pts.size()));
    }

private:
    TermValues pretrain_batch(std::uint64_t seed, int workers, GradientAccumulator& acc) {
        const auto pts = sample_domain(domain_, batch_, derive_seed(seed, "pretrain-pts"));
        struct WorkerState {
            Tape tape;
            GradientAccumulator acc;
            double loss = 0.0;
            long long bad = 0;
        };
        std::vector<WorkerState> ws(std::size_t(workers > 0 ? workers : 1));
        for (auto& w : ws) w.acc = GradientAccumulator(store_.size());
        const double inv_b = 1.0 / double(pts.size());
        run_workers(workers, pts.size(), [&](int w, std::size_t lo, std::size_t hi) {
            auto& st = ws[std::size_t(w)];
            MLPWork<Var> work;
            for (std::size_t s = lo; s < hi; ++s) {
                const auto& p = pts[s];
                try {
                    TapeReader reader{store_, st.tape};
                    std::vector<Var> coords{Var(p.u), Var(p.v)}, feats, out;
                    apply_features(features_, coords, feats);
                    mlp_forward(reader, store_.net(chart_net_.at(std::size_t(p.chart))), feats,
                                out, work);
                    const auto tgt = target_.map(p.chart, p.u, p.v);
                    Var loss = sq(out[0] - Var(tgt[0]));
                    loss += sq(out[1] - Var(tgt[1]));
                    loss += sq(out[2] - Var(tgt[2]));
                    st.loss += loss.value();
                    st.tape.backward(loss, st.acc, inv_b);
                } catch (const NumericDomainError&) {
                    st.tape.rewind();
                    ++st.bad;
                }
            }
        });
        double loss = 0.0;
        long long bad = 0;
        for (auto& st : ws) {
            acc.merge(st.acc);
            loss += st.loss;
            bad += st.bad;
        }
        loss *= inv_b;
        if (bad > 0) {
            loss = std::numeric_limits<double>::quiet_NaN();
            acc.reset();
        }
        TermValues t;
        t.add("willmore", 0.0);
        t.add("regularity", 0.0);
        t.add("gluing", 0.0);
        t.add("degeneracy_rate", 0.0);
        t.add("pretrain", loss);
        t.add("total", loss);
        return t;
    }

    TermValues flow_batch(long long epoch, std::uint64_t seed, int workers,
                          GradientAccumulator& acc) {
        const auto pts = sample_domain(domain_, batch_, derive_seed(seed, "flow-pts"));
        std::vector<double> chart_count(domain_.charts.size(), 0.0);
        for (const auto& p : pts) chart_count[std::size_t(p.chart)] += 1.0;

        struct WorkerState {
            Tape tape;
            GradientAccumulator acc;
            double energy = 0.0, reg = 0.0, glue = 0.0;
            long long degenerate = 0;
            long long bad = 0;
        };
        std::vector<WorkerState> ws(std::size_t(workers > 0 ? workers : 1));
        for (auto& w : ws) w.acc = GradientAccumulator(store_.size());

        const double w_reg = cfg_.regularity_weight;
        const double inv_b = 1.0 / double(pts.size());

        run_workers(workers, pts.size(), [&](int w, std::size_t lo, std::size_t hi) {
            auto& st = ws[std::size_t(w)];
            MLPWork<Jet<Var, 2>> work;
            for (std::size_t s = lo; s < hi; ++s) {
                const auto& p = pts[s];
                const double chart_scale =
                    domain_.charts[std::size_t(p.chart)].measure() /
                    chart_count[std::size_t(p.chart)];
                try {
                    TapeReader reader{store_, st.tape};
                    const auto jets = phi_jets_at(reader, p.chart, p.u, p.v, work);
                    const auto sample = ImmersionSample<Var>::from_jets(jets);
                    const auto I = first_fundamental(sample);

                    const Var reg = regularity_penalty(sample, I);
                    st.reg += reg.value();
                    Var sample_loss = Var(w_reg * inv_b) * reg;

                    if (!immersion_degenerate(I)) {
                        const auto n = unit_normal(sample);
                        const auto II = second_fundamental(sample, n);
                        const Var h = mean_curvature(I, II);
                        const Var density = h * h * area_element(I);
                        st.energy += chart_scale * density.value();
                        sample_loss += Var(chart_scale) * density;
                    } else {
                        ++st.degenerate;
                    }
                    st.tape.backward(sample_loss, st.acc);
                } catch (const NumericDomainError&) {
                    st.tape.rewind();
                    ++st.bad;
                } catch (const DegenerateImmersionError&) {
                    st.tape.rewind();
                    ++st.degenerate;
                }
            }
        });

        const double w_glue = gluing_weight(epoch);
        double glue_value = 0.0;
        if (cfg_.genus == 2) {
            const auto gpts =
                sample_gluing_annulus(corr_, cfg_.gluing_batch, derive_seed(seed, "glue-pts"));
            const double inv_g = 1.0 / double(gpts.size());
            run_workers(workers, gpts.size(), [&](int w, std::size_t lo, std::size_t hi) {
                auto& st = ws[std::size_t(w)];
                MLPWork<Jet<Var, 2>> work;
                for (std::size_t s = lo; s < hi; ++s) {
                    TapeReader reader{store_, st.tape};
                    const Var mismatch = gluing_mismatch<Var>(
                        [&](const std::array<Jet<Var, 2>, 2>& j) {
                            return phi_jets_from(reader, 0, j, work);
                        },
                        [&](const std::array<Jet<Var, 2>, 2>& j) {
                            return phi_jets_from(reader, 1, j, work);
                        },
                        gpts[s], corr_, cfg_.gluing_order_weights);
                    st.glue += mismatch.value();
                    st.tape.backward(mismatch, st.acc, w_glue * inv_g);
                }
            });
            for (auto& st : ws) glue_value += st.glue;
            glue_value *= inv_g;
        }

        double energy = 0.0, reg = 0.0;
        long long degenerate = 0, bad = 0;
        for (auto& st : ws) {
            acc.merge(st.acc);
            energy += st.energy;
            reg += st.reg;
            degenerate += st.degenerate;
            bad += st.bad;
        }
        reg *= inv_b;
        if (bad > 0) {
            energy = std::numeric_limits<double>::quiet_NaN();
            acc.reset();
        }

        TermValues t;
        t.add("willmore", energy);
        t.add("regularity", reg);
        t.add("gluing", glue_value);
        t.add("degeneracy_rate", double(degenerate) / double(pts.size()));
        t.add("pretrain", 0.0);
        t.add("total", energy + w_reg * reg + w_glue * glue_value);
        return t;
    }

    WillmoreConfig cfg_;
    std::uint64_t seed_;
    ParameterStore store_;
    GenusDomain domain_;
    PretrainTarget target_;
    GluingCorrespondence corr_;
    FeatureMap features_;
    std::vector<int> chart_net_;
    int batch_ = 1024;
    long long total_epochs_ = 1000;
};

} // namespace geopinn
