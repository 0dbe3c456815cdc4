#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ad/jet.hpp"
#include "ad/tape.hpp"
#include "errors.hpp"
#include "geom/sphere_ops.hpp"
#include "io/csv.hpp"
#include "net/feature_map.hpp"
#include "net/mlp.hpp"
#include "net/param_store.hpp"
#include "prob/problem.hpp"
#include "train/parallel.hpp"
#include "train/rng.hpp"
#include "train/samplers.hpp"

namespace geopinn {

struct PrescriberTerm {
    int ell = 0;
    int m = 0;
    double coeff = 0.0;
};

// Prescribed curvature K on S^2: either a finite harmonic expansion plus a
// constant, or the manufactured family K = (1 + 2z) e^{-2z} whose exact
// conformal factor is u = z.
struct PrescriberSpec {
    std::string kind = "harmonic";  // harmonic | manufactured_x3
    double constant = 1.0;
    std::vector<PrescriberTerm> terms;

    void validate() const {
        if (kind != "harmonic" && kind != "manufactured_x3")
            throw ConfigError(ConfigError::Kind::Range,
                              "prescriber kind must be harmonic or manufactured_x3");
        for (const auto& t : terms) {
            if (t.ell < 1 || t.ell > kMaxHarmonicDegree || t.m < -t.ell || t.m > t.ell)
                throw ConfigError(ConfigError::Kind::Range,
                                  "prescriber term (ell,m) out of range");
        }
    }
};

template <class T>
T prescriber_eval(const PrescriberSpec& p, const T& x, const T& y, const T& z) {
    if (p.kind == "manufactured_x3")
        return (T(1.0) + T(2.0) * z) * exp(T(-2.0) * z);
    T acc = T(p.constant);
    for (const auto& t : p.terms) acc += T(t.coeff) * real_sh(t.ell, t.m, x, y, z);
    return acc;
}

inline double prescriber_value(const PrescriberSpec& p, const std::array<double, 3>& pt) {
    return prescriber_eval(p, pt[0], pt[1], pt[2]);
}

// Tangential (intrinsic) gradient of K at a sphere point, from the exact
// ambient jet of the prescriber.
inline std::array<double, 3> prescriber_sphere_gradient(const PrescriberSpec& p,
                                                        const std::array<double, 3>& pt) {
    const auto seeds = jet_seed<double, 3>(pt);
    const Jet<double, 3> k = prescriber_eval(p, seeds[0], seeds[1], seeds[2]);
    const auto grad = sphere_gradient(k, pt);
    return {grad[0], grad[1], grad[2]};
}

// PDE residual of the prescribed-curvature equation at one point:
//   r = 1 - Lap_{S^2} u - K e^{2u}.
template <class S>
S nirenberg_residual(const Jet<S, 3>& u, const std::array<double, 3>& point, double k_value) {
    const S lap = laplace_beltrami_sphere(u, point);
    return S(1.0) - lap - S(k_value) * exp(S(2.0) * u.value);
}

struct MonteCarloEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

// 4*pi * mean(f) over uniform sphere samples, with the MC standard error.
inline MonteCarloEstimate sphere_integral(const std::vector<double>& f) {
    const double n = double(f.size());
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : f) var += (v - mean) * (v - mean);
    var = f.size() > 1 ? var / (n - 1.0) : 0.0;
    const double fourpi = 4.0 * kPi;
    return {fourpi * mean, fourpi * std::sqrt(var / n)};
}

struct NirenbergConfig {
    PrescriberSpec prescriber;
    int fit_degree = 4;

    void validate() const {
        prescriber.validate();
        if (fit_degree < 1 || fit_degree > kMaxHarmonicDegree)
            throw ConfigError(ConfigError::Kind::Range, "fit_degree must be 1..4");
    }
};

struct HarmonicFit {
    double constant = 0.0;
    std::vector<PrescriberTerm> coefficients;  // c_{ell,m}, ell >= 1
    double rms_residual = 0.0;
};

class NirenbergProblem final : public Problem {
public:
    NirenbergProblem(const NirenbergConfig& cfg, const NetworkConfig& net, std::uint64_t seed)
        : cfg_(cfg), seed_(seed), store_(derive_seed(seed, "params")) {
        cfg_.validate();
        features_.kind = net.features == "identity" ? FeatureKind::Identity
                                                    : FeatureKind::SphereHarmonics;
        features_.input_dim = 3;
        features_.order = net.harmonic_degree;
        features_.validate();
        MLPConfig mlp;
        mlp.input_width = features_.output_dim();
        mlp.hidden = net.hidden.empty() ? std::vector<int>{64, 64, 64} : net.hidden;
        mlp.output_width = 1;
        net_ = store_.add_mlp(mlp);
    }

    std::string kind() const override { return "nirenberg"; }
    ParameterStore& store() override { return store_; }
    const ParameterStore& store() const override { return store_; }
    const NirenbergConfig& config() const { return cfg_; }

    std::vector<std::string> train_columns() const override { return {"pde_loss", "total"}; }
    std::vector<std::string> eval_columns() const override {
        return {"pde_loss", "gauss_bonnet", "kw_1", "kw_2", "kw_3", "moser"};
    }

    TermValues train_batch(long long /*epoch*/, std::uint64_t seed, int workers,
                           GradientAccumulator& acc) override {
        const auto pts = sample_sphere_batch(batch_, derive_seed(seed, "pde-pts"));
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
            MLPWork<Jet<Var, 3>> work;
            for (std::size_t s = lo; s < hi; ++s) {
                const auto& p = pts[s];
                try {
                    TapeReader reader{store_, st.tape};
                    const auto u = forward_jet<TapeReader>(reader, p, work);
                    const double kv = prescriber_value(cfg_.prescriber, p);
                    const Var r = nirenberg_residual(u, p, kv);
                    const Var loss = r * r;
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
            // non-finite network output: surface as a divergent epoch
            loss = std::numeric_limits<double>::quiet_NaN();
            acc.reset();
        }
        TermValues t;
        t.add("pde_loss", loss);
        t.add("total", loss);
        return t;
    }

    TermValues evaluate(std::uint64_t seed, int batch, int workers) override {
        const auto d = collect(seed, batch, workers);
        const auto gb = gauss_bonnet_estimate(d);
        const auto kw = kazdan_warner_estimates(d);
        double moser = std::numeric_limits<double>::quiet_NaN();
        try {
            moser = moser_functional(d);
        } catch (const NumericDomainError&) {
            // nonpositive mass inside the log: reported as nan, not fatal
        }
        TermValues t;
        t.add("pde_loss", d.pde_loss);
        t.add("gauss_bonnet", std::abs(gb.value - 4.0 * kPi));
        t.add("kw_1", kw[0].value);
        t.add("kw_2", kw[1].value);
        t.add("kw_3", kw[2].value);
        t.add("moser", moser);
        return t;
    }

    void diagnose(std::ostream& out, const std::filesystem::path& out_dir, std::uint64_t seed,
                  int batch, int workers) override {
        const auto d = collect(seed, batch, workers);
        const auto gb = gauss_bonnet_estimate(d);
        const auto kw = kazdan_warner_estimates(d);
        out << "pde_loss," << d.pde_loss << "\n";
        out << "gauss_bonnet_violation," << std::abs(gb.value - 4.0 * kPi) << ","
            << "stderr," << gb.std_error << "\n";
        for (int j = 0; j < 3; ++j)
            out << "kazdan_warner_" << (j + 1) << "," << kw[std::size_t(j)].value << ","
                << "stderr," << kw[std::size_t(j)].std_error << "\n";
        try {
            out << "moser," << moser_functional(d) << "\n";
        } catch (const NumericDomainError& e) {
            out << "moser,nan (" << e.what() << ")\n";
        }
        const auto fit = harmonic_fit(cfg_.fit_degree, batch, derive_seed(seed, "fit"));
        out << "harmonic_fit_rms," << fit.rms_residual << "\n";
        out << "harmonic_fit_constant," << fit.constant << "\n";
        write_coefficients(out_dir / "coefficients.csv", fit);
    }

    void export_artifact(const std::string& what, const std::filesystem::path& out_dir,
                         int /*resolution*/, int batch, std::uint64_t seed) override {
        if (what != "coefficients")
            throw ConfigError(ConfigError::Kind::Range,
                              "nirenberg export supports --what coefficients");
        const auto fit = harmonic_fit(cfg_.fit_degree, batch, derive_seed(seed, "fit"));
        write_coefficients(out_dir / "coefficients.csv", fit);
    }

    // Ambient jet of the learned conformal factor at a sphere point.
    Jet<double, 3> u_jet(const std::array<double, 3>& p) const {
        MLPWork<Jet<double, 3>> work;
        ValueReader reader{store_};
        return forward_jet<ValueReader>(reader, p, work);
    }

    double u_value(const std::array<double, 3>& p) const {
        MLPWork<double> work;
        std::vector<double> coords{p[0], p[1], p[2]};
        std::vector<double> feats, out;
        apply_features(features_, coords, feats);
        mlp_forward(ValueReader{store_}, store_.net(net_), feats, out, work);
        return out[0];
    }

    // Least-squares fit of the network output to the truncated expansion
    //   u ~ const + sum_{1<=ell<=L} sum_m (c_{ell,m} / (ell(ell+1))) Y_{ell,m}
    // over a fresh batch; normal equations with 1e-10 diagonal regularization.
    HarmonicFit harmonic_fit(int degree, int batch, std::uint64_t seed) const {
        const int dim = (degree + 1) * (degree + 1);  // 1 constant + harmonics
        if (batch < 4 * dim)
            throw FitError("harmonic fit needs batch >= 4 (L+1)^2; increase batch");
        const auto pts = sample_sphere_batch(batch, seed);

        std::vector<double> basis(static_cast<std::size_t>(dim));
        std::vector<double> ata(std::size_t(dim) * std::size_t(dim), 0.0);
        std::vector<double> aty(std::size_t(dim), 0.0);
        std::vector<double> ys(pts.size());
        std::vector<std::vector<double>> rows(pts.size());
        for (std::size_t s = 0; s < pts.size(); ++s) {
            const auto& p = pts[s];
            basis[0] = 1.0;
            int idx = 1;
            for (int ell = 1; ell <= degree; ++ell)
                for (int m = -ell; m <= ell; ++m)
                    basis[std::size_t(idx++)] =
                        real_sh(ell, m, p[0], p[1], p[2]) / double(ell * (ell + 1));
            ys[s] = u_value(p);
            rows[s] = basis;
            for (int i = 0; i < dim; ++i) {
                aty[std::size_t(i)] += basis[std::size_t(i)] * ys[s];
                for (int j = 0; j <= i; ++j)
                    ata[std::size_t(i) * std::size_t(dim) + std::size_t(j)] +=
                        basis[std::size_t(i)] * basis[std::size_t(j)];
            }
        }
        for (int i = 0; i < dim; ++i) {
            ata[std::size_t(i) * std::size_t(dim) + std::size_t(i)] += 1e-10;
            for (int j = i + 1; j < dim; ++j)
                ata[std::size_t(i) * std::size_t(dim) + std::size_t(j)] =
                    ata[std::size_t(j) * std::size_t(dim) + std::size_t(i)];
        }
        std::vector<double> coeff = cholesky_solve(ata, aty, dim);

        HarmonicFit fit;
        fit.constant = coeff[0];
        int idx = 1;
        for (int ell = 1; ell <= degree; ++ell)
            for (int m = -ell; m <= ell; ++m)
                fit.coefficients.push_back({ell, m, coeff[std::size_t(idx++)]});
        double rss = 0.0;
        for (std::size_t s = 0; s < pts.size(); ++s) {
            double pred = 0.0;
            for (int i = 0; i < dim; ++i) pred += rows[s][std::size_t(i)] * coeff[std::size_t(i)];
            rss += sq(pred - ys[s]);
        }
        fit.rms_residual = std::sqrt(rss / double(pts.size()));
        return fit;
    }

    // Per-point field data on a held-out batch; reductions over it are done
    // in sample order so results do not depend on the worker count.
    struct FieldData {
        std::vector<double> u, lap, k;
        std::vector<std::array<double, 3>> grad_u_tan;   // intrinsic grad of u
        std::vector<std::array<double, 3>> grad_k_tan;   // intrinsic grad of K
        double pde_loss = 0.0;
    };

    FieldData collect(std::uint64_t seed, int batch, int workers) const {
        const auto pts = sample_sphere_batch(batch, derive_seed(seed, "diag-pts"));
        FieldData d;
        d.u.resize(pts.size());
        d.lap.resize(pts.size());
        d.k.resize(pts.size());
        d.grad_u_tan.resize(pts.size());
        d.grad_k_tan.resize(pts.size());
        std::vector<double> residual_sq(pts.size());
        run_workers(workers, pts.size(), [&](int /*w*/, std::size_t lo, std::size_t hi) {
            MLPWork<Jet<double, 3>> work;
            for (std::size_t s = lo; s < hi; ++s) {
                const auto& p = pts[s];
                ValueReader reader{store_};
                const auto u = forward_jet<ValueReader>(reader, p, work);
                d.u[s] = u.value;
                d.lap[s] = laplace_beltrami_sphere(u, p);
                d.k[s] = prescriber_value(cfg_.prescriber, p);
                const auto gu = sphere_gradient(u, p);
                d.grad_u_tan[s] = {gu[0], gu[1], gu[2]};
                d.grad_k_tan[s] = prescriber_sphere_gradient(cfg_.prescriber, p);
                residual_sq[s] = sq(1.0 - d.lap[s] - d.k[s] * std::exp(2.0 * d.u[s]));
            }
        });
        double loss = 0.0;
        for (double r : residual_sq) loss += r;
        d.pde_loss = loss / double(pts.size());
        return d;
    }

    // integral of K e^{2u} dnu0; Gauss-Bonnet demands 4*pi.
    static MonteCarloEstimate gauss_bonnet_estimate(const FieldData& d) {
        std::vector<double> f(d.u.size());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = d.k[i] * std::exp(2.0 * d.u[i]);
        return sphere_integral(f);
    }

    // integral of <grad K, grad x_j> e^{2u} dnu0, j = 1..3; zero for genuine
    // solutions (the first-harmonic Kazdan-Warner identity).
    static std::array<MonteCarloEstimate, 3> kazdan_warner_estimates(const FieldData& d) {
        std::array<MonteCarloEstimate, 3> out;
        std::vector<double> f(d.u.size());
        for (int j = 0; j < 3; ++j) {
            for (std::size_t i = 0; i < f.size(); ++i)
                f[i] = d.grad_k_tan[i][std::size_t(j)] * std::exp(2.0 * d.u[i]);
            out[std::size_t(j)] = sphere_integral(f);
        }
        return out;
    }

    // J(u) = int (|grad u|^2 + 2u) dnu0 - log int K e^{2u} dnu0.
    static double moser_functional(const FieldData& d) {
        std::vector<double> f(d.u.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
            const auto& g = d.grad_u_tan[i];
            f[i] = g[0] * g[0] + g[1] * g[1] + g[2] * g[2] + 2.0 * d.u[i];
        }
        const double dirichlet = sphere_integral(f).value;
        const double mass = gauss_bonnet_estimate(d).value;
        if (!(mass > 0.0)) throw NumericDomainError("moser mass", mass);
        return dirichlet - std::log(mass);
    }

    template <class Reader>
    Jet<typename Reader::Scalar, 3> forward_jet(const Reader& reader,
                                                const std::array<double, 3>& p,
                                                MLPWork<Jet<typename Reader::Scalar, 3>>& work) const {
        using S = typename Reader::Scalar;
        std::array<S, 3> coords{S(p[0]), S(p[1]), S(p[2])};
        const auto seeds = jet_seed<S, 3>(coords);
        std::vector<Jet<S, 3>> coord_jets(seeds.begin(), seeds.end());
        std::vector<Jet<S, 3>> feats, out;
        apply_features(features_, coord_jets, feats);
        mlp_forward(reader, store_.net(net_), feats, out, work);
        return out[0];
    }

    void set_batch(int b) { batch_ = b; }

private:
    static std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b,
                                              int n) {
        // in-place LL^T; a is row-major symmetric
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j <= i; ++j) {
                double s = a[std::size_t(i) * std::size_t(n) + std::size_t(j)];
                for (int k = 0; k < j; ++k)
                    s -= a[std::size_t(i) * std::size_t(n) + std::size_t(k)] *
                         a[std::size_t(j) * std::size_t(n) + std::size_t(k)];
                if (i == j) {
                    if (!(s > 0.0))
                        throw FitError("rank-deficient harmonic fit; increase batch");
                    a[std::size_t(i) * std::size_t(n) + std::size_t(i)] = std::sqrt(s);
                } else {
                    a[std::size_t(i) * std::size_t(n) + std::size_t(j)] =
                        s / a[std::size_t(j) * std::size_t(n) + std::size_t(j)];
                }
            }
        }
        for (int i = 0; i < n; ++i) {  // forward substitution
            double s = b[std::size_t(i)];
            for (int k = 0; k < i; ++k)
                s -= a[std::size_t(i) * std::size_t(n) + std::size_t(k)] * b[std::size_t(k)];
            b[std::size_t(i)] = s / a[std::size_t(i) * std::size_t(n) + std::size_t(i)];
        }
        for (int i = n - 1; i >= 0; --i) {  // back substitution
            double s = b[std::size_t(i)];
            for (int k = i + 1; k < n; ++k)
                s -= a[std::size_t(k) * std::size_t(n) + std::size_t(i)] * b[std::size_t(k)];
            b[std::size_t(i)] = s / a[std::size_t(i) * std::size_t(n) + std::size_t(i)];
        }
        return b;
    }

    void write_coefficients(const std::filesystem::path& path, const HarmonicFit& fit) const {
        CsvWriter csv(path, {"l", "m", "c"});
        csv.row({0.0, 0.0, fit.constant});
        for (const auto& t : fit.coefficients)
            csv.row({double(t.ell), double(t.m), t.coeff});
    }

    NirenbergConfig cfg_;
    std::uint64_t seed_;
    ParameterStore store_;
    FeatureMap features_;
    int net_ = 0;
    int batch_ = 2048;
};

} // namespace geopinn
