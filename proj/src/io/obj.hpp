#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

#include "errors.hpp"

namespace geopinn {

struct TriMesh {
    std::vector<std::array<double, 3>> vertices;
    std::vector<std::array<int, 3>> faces;  // zero-based indices
};

enum class GridTopology {
    SphereUV,        // u periodic, v in [v_lo, v_hi] with both ends collapsed to poles
    Torus,           // u and v periodic
    PuncturedTorus,  // torus identifications, quads inside a disc dropped
};

struct GridSpec {
    GridTopology topology = GridTopology::SphereUV;
    int resolution = 32;  // cells per axis
    double u_lo = 0.0, u_hi = 2.0 * 3.14159265358979323846;
    double v_lo = 0.0, v_hi = 3.14159265358979323846;
    std::array<double, 2> puncture_center{0.0, 0.0};
    double puncture_radius = 0.0;
};

// Samples phi on a regular grid and builds a triangle mesh with seam
// vertices welded according to the topology, so closed surfaces come out
// watertight with the right Euler characteristic.
inline TriMesh mesh_parametric(const std::function<std::array<double, 3>(double, double)>& phi,
                               const GridSpec& spec) {
    const int res = spec.resolution;
    if (res < 8) throw ConfigError(ConfigError::Kind::Range, "mesh resolution must be >= 8");
    TriMesh mesh;
    const double du = (spec.u_hi - spec.u_lo) / res;
    const double dv = (spec.v_hi - spec.v_lo) / res;

    // vertex_id(i, j) with i in [0, res) after u-wrap; j meaning depends on
    // the topology.
    std::vector<int> ids;
    auto add_vertex = [&](double u, double v) {
        mesh.vertices.push_back(phi(u, v));
        return static_cast<int>(mesh.vertices.size()) - 1;
    };

    if (spec.topology == GridTopology::SphereUV) {
        const int pole_lo = add_vertex(spec.u_lo, spec.v_lo);
        const int pole_hi = add_vertex(spec.u_lo, spec.v_hi);
        ids.assign(std::size_t(res) * std::size_t(res - 1), -1);
        auto vid = [&](int i, int j) {  // j in [1, res-1]
            return ids[std::size_t(j - 1) * std::size_t(res) + std::size_t(i % res)];
        };
        for (int j = 1; j < res; ++j)
            for (int i = 0; i < res; ++i)
                ids[std::size_t(j - 1) * std::size_t(res) + std::size_t(i)] =
                    add_vertex(spec.u_lo + i * du, spec.v_lo + j * dv);
        for (int i = 0; i < res; ++i) {  // pole fans, winding consistent with the quads
            mesh.faces.push_back({pole_lo, vid(i + 1, 1), vid(i, 1)});
            mesh.faces.push_back({pole_hi, vid(i, res - 1), vid(i + 1, res - 1)});
        }
        for (int j = 1; j < res - 1; ++j)
            for (int i = 0; i < res; ++i) {
                const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1),
                          d = vid(i, j + 1);
                mesh.faces.push_back({a, b, c});
                mesh.faces.push_back({a, c, d});
            }
        return mesh;
    }

    // torus-like: both directions periodic
    ids.assign(std::size_t(res) * std::size_t(res), -1);
    auto vid = [&](int i, int j) {
        return ids[std::size_t(j % res) * std::size_t(res) + std::size_t(i % res)];
    };
    for (int j = 0; j < res; ++j)
        for (int i = 0; i < res; ++i)
            ids[std::size_t(j) * std::size_t(res) + std::size_t(i)] =
                add_vertex(spec.u_lo + i * du, spec.v_lo + j * dv);
    auto inside_puncture = [&](double u, double v) {
        if (spec.topology != GridTopology::PuncturedTorus) return false;
        const double dx = u - spec.puncture_center[0];
        const double dy = v - spec.puncture_center[1];
        return dx * dx + dy * dy < spec.puncture_radius * spec.puncture_radius;
    };
    for (int j = 0; j < res; ++j)
        for (int i = 0; i < res; ++i) {
            const double u0 = spec.u_lo + i * du, v0 = spec.v_lo + j * dv;
            if (inside_puncture(u0, v0) || inside_puncture(u0 + du, v0) ||
                inside_puncture(u0, v0 + dv) || inside_puncture(u0 + du, v0 + dv))
                continue;
            const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
            mesh.faces.push_back({a, b, c});
            mesh.faces.push_back({a, c, d});
        }
    if (spec.topology == GridTopology::PuncturedTorus) {
        // drop vertices that ended up unused so the OBJ stays tidy
        std::vector<int> remap(mesh.vertices.size(), -1);
        TriMesh packed;
        for (auto& f : mesh.faces) {
            for (int& v : f) {
                if (remap[std::size_t(v)] < 0) {
                    remap[std::size_t(v)] = static_cast<int>(packed.vertices.size());
                    packed.vertices.push_back(mesh.vertices[std::size_t(v)]);
                }
                v = remap[std::size_t(v)];
            }
            packed.faces.push_back(f);
        }
        return packed;
    }
    return mesh;
}

inline void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v[0], v[1], v[2]);
        out << buf;
    }
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out) throw IoError("write failure on '" + path.string() + "'");
}

} // namespace geopinn
