#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "ad/jet.hpp"
#include "ad/tape.hpp"
#include "errors.hpp"
#include "geom/metric.hpp"
#include "io/csv.hpp"
#include "net/mlp.hpp"
#include "net/param_store.hpp"
#include "net/vielbein.hpp"
#include "prob/problem.hpp"
#include "prob/sphere_chart.hpp"
#include "train/parallel.hpp"
#include "train/rng.hpp"
#include "train/samplers.hpp"

namespace geopinn {

struct EinsteinConfig {
    int n = 2;
    int lambda = 1;  // +1, 0, -1
    std::array<double, 3> weights{1.0, 10.0, 1.0};  // (f1, f2, f3)
    double r_lo = 0.2;
    double r_hi = 0.9;
    double sample_radius = 0.95;
    int batch_einstein = 256;  // per patch
    int batch_overlap = 128;
    double supervised_mix = 0.0;  // 0: pure PINN, 1: pure supervised

    void validate() const {
        if (n < 2 || n > 5) throw ConfigError(ConfigError::Kind::Range, "einstein.n must be 2..5");
        if (lambda != 1 && lambda != 0 && lambda != -1)
            throw ConfigError(ConfigError::Kind::Range, "einstein.lambda must be -1, 0 or +1");
        if (!(0.0 < r_lo && r_lo < r_hi && r_hi < 1.0))
            throw ConfigError(ConfigError::Kind::Range, "need 0 < r_lo < r_hi < 1");
        for (double w : weights)
            if (!(w >= 0.0))
                throw ConfigError(ConfigError::Kind::Range, "loss weights must be >= 0");
        if (batch_einstein < 1 || batch_overlap < 1)
            throw ConfigError(ConfigError::Kind::Range, "batch sizes must be >= 1");
        if (!(supervised_mix >= 0.0 && supervised_mix <= 1.0))
            throw ConfigError(ConfigError::Kind::Range, "supervised_mix must be in [0,1]");
        if (!(sample_radius > 0.0 && sample_radius < 1.0))
            throw ConfigError(ConfigError::Kind::Range, "sample_radius must be in (0, 1)");
    }
};

// Softplus penalty against unbounded entries and vanishing determinant;
// zero (to ~1e-4 per term) for well-conditioned metrics.
inline constexpr double kFinitenessCap = 10.0;

template <class S, int N>
S finiteness_penalty(const Mat<S, N>& g, const S& log_det) {
    S acc = softplus(abs_smooth(g(0, 0)) - S(kFinitenessCap));
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            if (i != 0 || j != 0)
                acc += softplus(abs_smooth(g(i, j)) - S(kFinitenessCap));
    acc += softplus(-log_det - S(kFinitenessCap));
    return acc;
}

// Scale-normalized Frobenius residual ||Ric - lambda g||_F / ||g||_F. The
// normalization matters: with the absolute norm the optimizer can shrink g
// toward zero, which scales Ric - lambda g (and the patch-compatibility
// mismatch) down with it and erases the lambda = 0, -1 obstruction entirely;
// uniform rescalings of an Einstein metric stay Einstein, so the residual
// has to be dimensionless to carry geometric meaning. For n = 2 this is
// exactly |K - lambda| with K the Gauss curvature. Exactly zero input gives
// exactly zero without touching sqrt'(0).
template <class S, int N>
S einstein_residual_norm(const Mat<S, N>& ric, const Mat<S, N>& g, double lambda) {
    Mat<S, N> diff;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) diff(i, j) = ric(i, j) - S(lambda) * g(i, j);
    const S fro2 = frobenius_sq(diff);
    if (value_of(fro2) <= 0.0) return S(0.0);
    const S scale2 = frobenius_sq(g);
    if (!(value_of(scale2) > 1e-24)) throw DegenerateMetricError("vanishing metric");
    return sqrt(fro2 / scale2);
}

// ||g1(x) - J^T g2(tau(x)) J||_F over the mean norm of the two sides, with
// J constant in the parameters; scale-normalized for the same reason.
template <class S, int N>
S overlap_residual_norm(const Mat<S, N>& g1, const Mat<S, N>& g2, const Mat<double, N>& jac) {
    Mat<S, N> transported;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            S t = S(0.0);
            for (int a = 0; a < N; ++a)
                for (int b = 0; b < N; ++b)
                    t += S(jac(a, i) * jac(b, j)) * g2(a, b);
            transported(i, j) = t;
        }
    Mat<S, N> diff;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) diff(i, j) = g1(i, j) - transported(i, j);
    const S fro2 = frobenius_sq(diff);
    if (value_of(fro2) <= 0.0) return S(0.0);
    const S scale2 = S(0.5) * (frobenius_sq(g1) + frobenius_sq(transported));
    if (!(value_of(scale2) > 1e-24)) throw DegenerateMetricError("vanishing metrics in overlap");
    return sqrt(fro2 / scale2);
}

template <int N>
class EinsteinProblem final : public Problem {
public:
    static constexpr int kPacked = N * (N + 1) / 2;
    using JetD = Jet<double, N>;
    using JetV = Jet<Var, N>;

    EinsteinProblem(const EinsteinConfig& cfg, const NetworkConfig& net, std::uint64_t seed)
        : cfg_(cfg), seed_(seed), store_(derive_seed(seed, "params")) {
        cfg_.validate();
        MLPConfig mlp;
        mlp.input_width = N + 1;  // ball coordinates plus |x|^2
        mlp.hidden = net.hidden.empty() ? std::vector<int>{64, 64, 64} : net.hidden;
        mlp.output_width = kPacked;
        // both patches start from the same weights (they decouple through
        // training); a symmetric start, so neither patch draws a bad seed
        patch_net_[0] = store_.add_mlp(mlp, 0);
        patch_net_[1] = store_.add_mlp(mlp, 0);
        radius_sq_ = einstein_reference_radius_sq<N>();
    }

    std::string kind() const override { return "einstein"; }
    ParameterStore& store() override { return store_; }
    const ParameterStore& store() const override { return store_; }
    const EinsteinConfig& config() const { return cfg_; }

    std::vector<std::string> train_columns() const override {
        return {"einstein_p1", "einstein_p2", "overlap", "finiteness", "supervised",
                "total", "excluded"};
    }
    std::vector<std::string> eval_columns() const override {
        return {"einstein_p1", "einstein_p2", "overlap", "finiteness", "supervised",
                "total", "ricci_asymmetry"};
    }

    TermValues train_batch(long long /*epoch*/, std::uint64_t seed, int workers,
                           GradientAccumulator& acc) override {
        const auto pts = draw_einstein_points(seed, cfg_.batch_einstein, /*radial=*/true);
        const auto ov = draw_overlap_points(seed, cfg_.batch_overlap);

        struct WorkerState {
            Tape tape;
            GradientAccumulator acc;
            double e[2] = {0.0, 0.0};
            double fin = 0.0, sup = 0.0, ov = 0.0;
            long long excluded = 0;
        };
        std::vector<WorkerState> ws(std::size_t(workers > 0 ? workers : 1));
        for (auto& w : ws) w.acc = GradientAccumulator(store_.size());

        const double mix = cfg_.supervised_mix;
        const double f1 = cfg_.weights[0], f2 = cfg_.weights[1], f3 = cfg_.weights[2];
        const double be = double(cfg_.batch_einstein);
        const double bo = double(cfg_.batch_overlap);

        // Einstein + finiteness + supervised share one forward pass per
        // sample; pts interleaves both patches.
        run_workers(workers, pts.size(), [&](int w, std::size_t lo, std::size_t hi) {
            auto& st = ws[std::size_t(w)];
            MLPWork<JetV> work;
            for (std::size_t s = lo; s < hi; ++s) {
                const auto& [patch, x] = pts[s];
                try {
                    TapeReader reader{store_, st.tape};
                    auto [packed, raw_diag_sum] = metric_jets(reader, patch, x, work);
                    Mat<Var, N> gval;
                    for (int i = 0; i < N; ++i)
                        for (int j = 0; j < N; ++j)
                            gval(i, j) = packed[std::size_t(JetV::hidx(i, j))].value;
                    const Var log_det = Var(2.0) * raw_diag_sum;

                    Var sample_loss = Var(0.0);
                    const Var fin = finiteness_penalty<Var, N>(gval, log_det);
                    st.fin += fin.value();
                    sample_loss += Var((1.0 - mix) * f3 / (2.0 * be)) * fin;

                    const auto ms = MetricSample<Var, N>::from_jets(packed);
                    const auto ric = ricci(ms);
                    const Var resid =
                        einstein_residual_norm<Var, N>(ric.ricci, gval, double(cfg_.lambda));
                    if (!std::isfinite(resid.value()))
                        throw NumericDomainError("einstein residual", resid.value());
                    st.e[patch] += resid.value();
                    sample_loss += Var((1.0 - mix) * f1 / be) * resid;

                    if (mix > 0.0) {
                        const auto ref = round_metric_reference<double, N>(x, radius_sq_);
                        Var sup = Var(0.0);
                        for (int i = 0; i < N; ++i)
                            for (int j = 0; j < N; ++j) sup += sq(gval(i, j) - Var(ref(i, j)));
                        st.sup += sup.value();
                        sample_loss += Var(mix / (2.0 * be)) * sup;
                    }
                    st.tape.backward(sample_loss, st.acc);
                } catch (const NumericDomainError&) {
                    route_degenerate(st);
                } catch (const DegenerateMetricError&) {
                    route_degenerate(st);
                }
            }
        });

        if ((1.0 - mix) * f2 > 0.0) {
            run_workers(workers, ov.size(), [&](int w, std::size_t lo, std::size_t hi) {
                auto& st = ws[std::size_t(w)];
                MLPWork<Var> work;
                for (std::size_t s = lo; s < hi; ++s) {
                    try {
                        TapeReader reader{store_, st.tape};
                        const Var resid = overlap_sample(reader, ov[s], int(s % 2), work);
                        if (!std::isfinite(resid.value()))
                            throw NumericDomainError("overlap residual", resid.value());
                        st.ov += resid.value();
                        st.tape.backward(resid, st.acc, (1.0 - mix) * f2 / bo);
                    } catch (const NumericDomainError&) {
                        route_degenerate(st);
                    } catch (const DegenerateMetricError&) {
                        route_degenerate(st);
                    }
                }
            });
        }

        double e1 = 0, e2 = 0, fin = 0, sup = 0, ovs = 0;
        long long excluded = 0;
        for (auto& st : ws) {
            acc.merge(st.acc);
            e1 += st.e[0];
            e2 += st.e[1];
            fin += st.fin;
            sup += st.sup;
            ovs += st.ov;
            excluded += st.excluded;
        }
        e1 /= be;
        e2 /= be;
        fin /= 2.0 * be;
        sup /= 2.0 * be;
        ovs /= bo;

        TermValues t;
        t.add("einstein_p1", e1);
        t.add("einstein_p2", e2);
        t.add("overlap", ovs);
        t.add("finiteness", fin);
        t.add("supervised", sup);
        t.add("total", (1.0 - mix) * (f1 * (e1 + e2) + f2 * ovs + f3 * fin) + mix * sup);
        t.add("excluded", double(excluded));
        return t;
    }

    TermValues evaluate(std::uint64_t seed, int batch, int workers) override {
        const auto pts = draw_einstein_points(derive_seed(seed, "eval-e"), batch);
        const auto ov = draw_overlap_points(derive_seed(seed, "eval-o"), std::max(1, batch / 2));

        struct WorkerState {
            double e[2] = {0.0, 0.0};
            double fin = 0.0, sup = 0.0, ov = 0.0, asym = 0.0;
        };
        std::vector<WorkerState> ws(std::size_t(workers > 0 ? workers : 1));

        run_workers(workers, pts.size(), [&](int w, std::size_t lo, std::size_t hi) {
            auto& st = ws[std::size_t(w)];
            MLPWork<JetD> work;
            for (std::size_t s = lo; s < hi; ++s) {
                const auto& [patch, x] = pts[s];
                try {
                    ValueReader reader{store_};
                    auto [packed, raw_diag_sum] = metric_jets(reader, patch, x, work);
                    Mat<double, N> gval;
                    for (int i = 0; i < N; ++i)
                        for (int j = 0; j < N; ++j)
                            gval(i, j) = packed[std::size_t(JetD::hidx(i, j))].value;
                    st.fin += finiteness_penalty<double, N>(gval, 2.0 * raw_diag_sum);
                    const auto ms = MetricSample<double, N>::from_jets(packed);
                    const auto ric = ricci(ms);
                    st.asym = std::max(st.asym, ric.asymmetry);
                    st.e[patch] +=
                        einstein_residual_norm<double, N>(ric.ricci, gval, double(cfg_.lambda));
                    const auto ref = round_metric_reference<double, N>(x, radius_sq_);
                    double sup = 0.0;
                    for (int i = 0; i < N; ++i)
                        for (int j = 0; j < N; ++j) sup += sq(gval(i, j) - ref(i, j));
                    st.sup += sup;
                } catch (const NumericDomainError&) {
                    st.fin += 100.0;
                } catch (const DegenerateMetricError&) {
                    st.fin += 100.0;
                }
            }
        });
        run_workers(workers, ov.size(), [&](int w, std::size_t lo, std::size_t hi) {
            auto& st = ws[std::size_t(w)];
            MLPWork<double> work;
            for (std::size_t s = lo; s < hi; ++s) {
                try {
                    ValueReader reader{store_};
                    st.ov += overlap_sample(reader, ov[s], int(s % 2), work);
                } catch (const NumericDomainError&) {
                    st.ov += 100.0;
                } catch (const DegenerateMetricError&) {
                    st.ov += 100.0;
                }
            }
        });

        double e1 = 0, e2 = 0, fin = 0, sup = 0, ovs = 0, asym = 0;
        for (auto& st : ws) {
            e1 += st.e[0];
            e2 += st.e[1];
            fin += st.fin;
            sup += st.sup;
            ovs += st.ov;
            asym = std::max(asym, st.asym);
        }
        const double be = double(batch);
        e1 /= be;
        e2 /= be;
        fin /= 2.0 * be;
        sup /= 2.0 * be;
        ovs /= double(ov.size());

        const double f1 = cfg_.weights[0], f2 = cfg_.weights[1];
        TermValues t;
        t.add("einstein_p1", e1);
        t.add("einstein_p2", e2);
        t.add("overlap", ovs);
        t.add("finiteness", fin);
        t.add("supervised", sup);
        // Test metric: the weighted geometric residuals, independent of the
        // training mix, so supervised and PINN runs are compared on the same
        // scale. The finiteness guard is a training regularizer and is
        // reported but not part of the test total.
        t.add("total", f1 * (e1 + e2) + f2 * ovs);
        t.add("ricci_asymmetry", asym);
        return t;
    }

    void diagnose(std::ostream& out, const std::filesystem::path& /*out_dir*/,
                  std::uint64_t seed, int batch, int workers) override {
        const auto ev = evaluate(seed, batch, workers);
        const double einstein_mean = 0.5 * (ev.get("einstein_p1") + ev.get("einstein_p2"));
        const double overlap = ev.get("overlap");
        out << "einstein_residual_mean," << einstein_mean << "\n";
        out << "overlap_residual_mean," << overlap << "\n";
        out << "overlap_to_einstein_ratio,"
            << (einstein_mean > 0 ? overlap / einstein_mean : 0.0) << "\n";
        out << "ricci_asymmetry_max," << ev.get("ricci_asymmetry") << "\n";
        out << "test_total," << ev.get("total") << "\n";
    }

    void export_artifact(const std::string& what, const std::filesystem::path& out_dir,
                         int /*resolution*/, int batch, std::uint64_t seed) override {
        if (what != "field")
            throw ConfigError(ConfigError::Kind::Range,
                              "einstein export supports --what field");
        std::vector<std::string> cols{"patch"};
        for (int i = 1; i <= N; ++i) cols.push_back("x" + std::to_string(i));
        for (int i = 1; i <= N; ++i)
            for (int j = i; j <= N; ++j)
                cols.push_back("g" + std::to_string(i) + std::to_string(j));
        for (int i = 1; i <= N; ++i)
            for (int j = i; j <= N; ++j)
                cols.push_back("R" + std::to_string(i) + std::to_string(j));
        CsvWriter csv(out_dir / "metric_field.csv", cols);

        const auto pts = draw_einstein_points(derive_seed(seed, "export"), batch);
        MLPWork<JetD> work;
        for (const auto& [patch, x] : pts) {
            ValueReader reader{store_};
            auto [packed, raw_diag_sum] = metric_jets(reader, patch, x, work);
            (void)raw_diag_sum;
            const auto ms = MetricSample<double, N>::from_jets(packed);
            const auto ric = ricci(ms);
            std::vector<double> row;
            row.push_back(double(patch + 1));
            for (int i = 0; i < N; ++i) row.push_back(x[std::size_t(i)]);
            for (int i = 0; i < N; ++i)
                for (int j = i; j < N; ++j) row.push_back(ms.g(i, j));
            for (int i = 0; i < N; ++i)
                for (int j = i; j < N; ++j) row.push_back(ric.ricci(i, j));
            csv.row(row);
        }
    }

    // Forward pass to metric jets on one patch; also returns the sum of the
    // diagonal raw outputs (for the exact log det). Patch inputs are the
    // ball coordinates plus the rotation-invariant |x|^2, which conditions
    // the radially-structured metric profiles without constraining them.
    template <class Reader>
    std::pair<std::array<Jet<typename Reader::Scalar, N>, kPacked>, typename Reader::Scalar>
    metric_jets(const Reader& reader, int patch, const std::array<double, N>& x,
                MLPWork<Jet<typename Reader::Scalar, N>>& work) const {
        using S = typename Reader::Scalar;
        std::array<S, N> coords;
        for (int i = 0; i < N; ++i) coords[std::size_t(i)] = S(x[std::size_t(i)]);
        const auto seeds = jet_seed<S, N>(coords);
        std::vector<Jet<S, N>> features(seeds.begin(), seeds.end());
        Jet<S, N> norm_sq = seeds[0] * seeds[0];
        for (int i = 1; i < N; ++i) norm_sq += seeds[std::size_t(i)] * seeds[std::size_t(i)];
        features.push_back(norm_sq);
        std::vector<Jet<S, N>> raw;
        mlp_forward(reader, store_.net(patch_net_[std::size_t(patch)]), features, raw, work);
        S diag_sum = raw[0].value;
        for (int i = 1; i < N; ++i) diag_sum += raw[std::size_t(i)].value;
        return {vielbein_to_metric<Jet<S, N>, N>(raw), diag_sum};
    }

    // Value-only forward to the metric at a point (no jets).
    template <class Reader>
    Mat<typename Reader::Scalar, N> metric_values(const Reader& reader, int patch,
                                                  const std::array<double, N>& x,
                                                  MLPWork<typename Reader::Scalar>& work) const {
        using S = typename Reader::Scalar;
        std::vector<S> features;
        features.reserve(N + 1);
        double norm_sq = 0.0;
        for (int i = 0; i < N; ++i) {
            features.push_back(S(x[std::size_t(i)]));
            norm_sq += x[std::size_t(i)] * x[std::size_t(i)];
        }
        features.push_back(S(norm_sq));
        std::vector<S> raw;
        mlp_forward(reader, store_.net(patch_net_[std::size_t(patch)]), features, raw, work);
        const auto packed = vielbein_to_metric<S, N>(raw);
        Mat<S, N> g;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                g(i, j) = packed[std::size_t(Jet<double, N>::hidx(i, j))];
        return g;
    }

    // Compatibility residual at a point given in `home` patch coordinates.
    // tau is an involution, so the same transported form works from either
    // side; alternating the home patch symmetrizes which chart regions see
    // overlap supervision (x in patch 1's annulus lands near patch 2's pole
    // and vice versa).
    template <class Reader>
    typename Reader::Scalar overlap_sample(const Reader& reader, const std::array<double, N>& x,
                                           int home,
                                           MLPWork<typename Reader::Scalar>& work) const {
        using S = typename Reader::Scalar;
        const auto jac = transition_jacobian<N>(x);
        const auto xt = transition_point<N>(x);
        const Mat<S, N> g_home = metric_values(reader, home, x, work);
        const Mat<S, N> g_other = metric_values(reader, 1 - home, xt, work);
        return overlap_residual_norm<S, N>(g_home, g_other, jac);
    }

    // Training batches use radius-uniform collocation (covers the patch
    // pole); evaluation keeps the volume-uniform measure of the test metric.
    std::vector<std::pair<int, std::array<double, N>>> draw_einstein_points(
        std::uint64_t seed, int per_patch, bool radial = false) const {
        Rng rng(derive_seed(seed, "einstein-pts"));
        std::vector<std::pair<int, std::array<double, N>>> pts;
        pts.reserve(std::size_t(2 * per_patch));
        for (int patch = 0; patch < 2; ++patch)
            for (int i = 0; i < per_patch; ++i)
                pts.emplace_back(patch, radial ? sample_ball_radial<N>(rng, cfg_.sample_radius)
                                               : sample_ball<N>(rng, cfg_.sample_radius));
        return pts;
    }

    std::vector<std::array<double, N>> draw_overlap_points(std::uint64_t seed, int count) const {
        Rng rng(derive_seed(seed, "overlap-pts"));
        std::vector<std::array<double, N>> pts(static_cast<std::size_t>(count));
        for (auto& p : pts) p = sample_annulus<N>(rng, cfg_.r_lo, cfg_.r_hi);
        return pts;
    }

    double reference_radius_sq() const { return radius_sq_; }

private:
    template <class WS>
    static void route_degenerate(WS& st) {
        // Sample excluded from its residual term; a flat penalty keeps the
        // event visible in the finiteness column. No gradient flows.
        st.tape.rewind();
        st.fin += 100.0;
        ++st.excluded;
    }

    EinsteinConfig cfg_;
    std::uint64_t seed_;
    ParameterStore store_;
    std::array<int, 2> patch_net_{0, 1};
    double radius_sq_ = 1.0;
};

} // namespace geopinn
