#pragma once

#include <string>
#include <vector>

#include "ad/jet.hpp"
#include "errors.hpp"
#include "net/spherical_harmonics.hpp"

namespace geopinn {

enum class FeatureKind { Identity, FourierTorus, SphereHarmonics };

// The feature map is where domain topology is hard-coded: Fourier features
// make the torus periodicity exact, spherical-harmonic features close the
// sphere at the poles exactly, identity passes ball or ambient coordinates
// straight through. Derivatives flow through analytically via jets.
struct FeatureMap {
    FeatureKind kind = FeatureKind::Identity;
    int input_dim = 2;
    int order = 0;  // Fourier order N, or harmonic degree Lmax

    int output_dim() const {
        switch (kind) {
        case FeatureKind::Identity: return input_dim;
        case FeatureKind::FourierTorus: return 4 * order;
        case FeatureKind::SphereHarmonics: return (order + 1) * (order + 1);
        }
        return 0;
    }

    void validate() const {
        if (kind == FeatureKind::FourierTorus) {
            if (order < 1) throw ConfigError(ConfigError::Kind::Range, "fourier order must be >= 1");
            if (input_dim != 2)
                throw ConfigError(ConfigError::Kind::Range, "fourier features need 2 inputs");
        }
        if (kind == FeatureKind::SphereHarmonics) {
            if (order < 1 || order > kMaxHarmonicDegree)
                throw ConfigError(ConfigError::Kind::Range, "harmonic degree out of range");
            if (input_dim != 2 && input_dim != 3)
                throw ConfigError(ConfigError::Kind::Range,
                                  "harmonic features need (u,v) angles or an ambient 3-vector");
        }
    }
};

// (sin ku, cos ku, sin kv, cos kv) for k = 1..order, in that fixed order.
template <class T>
void fourier_features(const T& u, const T& v, int order, std::vector<T>& out) {
    if (order < 1) throw ConfigError(ConfigError::Kind::Range, "fourier order must be >= 1");
    out.clear();
    out.reserve(std::size_t(4 * order));
    for (int k = 1; k <= order; ++k) {
        const T ku = double(k) * u;
        const T kv = double(k) * v;
        out.push_back(sin(ku));
        out.push_back(cos(ku));
        out.push_back(sin(kv));
        out.push_back(cos(kv));
    }
}

// Chart angles to unit direction: u azimuth in [0,2pi], v polar in [0,pi].
template <class T>
std::array<T, 3> sphere_direction(const T& u, const T& v) {
    const T su = sin(u), cu = cos(u), sv = sin(v), cv = cos(v);
    return {cu * sv, su * sv, cv};
}

// Y_{ell,m}(direction(u,v)) for ell <= lmax, (ell, m) lexicographic.
template <class T>
void harmonic_features(const T& u, const T& v, int lmax, std::vector<T>& out) {
    const auto dir = sphere_direction(u, v);
    out.clear();
    out.reserve(std::size_t((lmax + 1) * (lmax + 1)));
    real_sh_all(lmax, dir[0], dir[1], dir[2], [&](T y) { out.push_back(std::move(y)); });
}

template <class T>
void apply_features(const FeatureMap& map, const std::vector<T>& coords, std::vector<T>& out) {
    switch (map.kind) {
    case FeatureKind::Identity:
        out = coords;
        return;
    case FeatureKind::FourierTorus:
        fourier_features(coords.at(0), coords.at(1), map.order, out);
        return;
    case FeatureKind::SphereHarmonics:
        if (map.input_dim == 2) {
            harmonic_features(coords.at(0), coords.at(1), map.order, out);
        } else {
            out.clear();
            real_sh_all(map.order, coords.at(0), coords.at(1), coords.at(2),
                        [&](T y) { out.push_back(std::move(y)); });
        }
        return;
    }
    throw ConfigError(ConfigError::Kind::Range, "unknown feature kind");
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
    if (s == "identity") return FeatureKind::Identity;
    if (s == "fourier") return FeatureKind::FourierTorus;
    if (s == "harmonics") return FeatureKind::SphereHarmonics;
    throw ConfigError(ConfigError::Kind::Range, "unknown feature kind '" + s + "'");
}

inline std::string to_string(FeatureKind k) {
    switch (k) {
    case FeatureKind::Identity: return "identity";
    case FeatureKind::FourierTorus: return "fourier";
    case FeatureKind::SphereHarmonics: return "harmonics";
    }
    return "?";
}

} // namespace geopinn
