#pragma once

// Synthetic colored shapes with reference views rendered by this repo's own
// renderer, so the (cloud, image, camera) triple is self-consistent by
// construction: re-rendering the ground-truth cloud reproduces the stored
// image exactly.

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "pcdm/core/rng.hpp"
#include "pcdm/data/normalize.hpp"
#include "pcdm/image.hpp"
#include "pcdm/point_cloud.hpp"
#include "pcdm/renderer/renderer.hpp"

namespace pcdm {

using Palette = std::vector<Vec3>;

/// Colors picked so every channel is k/255 for integer k: the 8-bit PLY and
/// PNG codecs then round-trip them bit-exactly.
inline Vec3 rgb255(int r, int g, int b) {
    return {r / 255.0, g / 255.0, b / 255.0};
}

inline Palette default_palette() {
    return {rgb255(255, 0, 0),   rgb255(0, 168, 0),   rgb255(40, 90, 255),
            rgb255(255, 200, 0), rgb255(160, 32, 240), rgb255(0, 200, 200),
            rgb255(255, 130, 0), rgb255(128, 128, 128)};
}

enum class ShapeKind { Sphere, Cube, Cylinder, Chairlike };

inline std::string shape_kind_name(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Sphere: return "sphere";
        case ShapeKind::Cube: return "cube";
        case ShapeKind::Cylinder: return "cylinder";
        case ShapeKind::Chairlike: return "two-tone-chairlike";
    }
    throw ContractError("unknown shape kind");
}

inline ShapeKind shape_kind_from_name(const std::string& name) {
    if (name == "sphere") return ShapeKind::Sphere;
    if (name == "cube") return ShapeKind::Cube;
    if (name == "cylinder") return ShapeKind::Cylinder;
    if (name == "two-tone-chairlike" || name == "chairlike") return ShapeKind::Chairlike;
    throw ContractError("unknown shape kind \"" + name + "\"");
}

/// One training/eval item: normalized colored cloud, its reference render,
/// the camera that produced it, and the record to undo normalization.
struct Sample {
    PointCloud cloud;
    Image image;
    Camera camera;
    NormalizationRecord record;
};

namespace detail {

// Axis-aligned rectangle patch: origin corner plus two orthogonal edges.
struct SurfacePatch {
    Vec3 origin;
    Vec3 edge_u;
    Vec3 edge_v;
    Vec3 color;

    double area() const { return vec::norm(edge_u) * vec::norm(edge_v); }
    Vec3 sample(Rng& rng) const {
        const double s = rng.uniform();
        const double t = rng.uniform();
        return vec::add(origin, vec::add(vec::scale(edge_u, s), vec::scale(edge_v, t)));
    }
};

inline int pick_weighted(const std::vector<double>& weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        u -= weights[i];
        if (u <= 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

inline const Vec3& cycle(const Palette& palette, std::size_t i) {
    return palette[i % palette.size()];
}

inline void sample_sphere(int n, const Palette& palette, Rng& rng, Tensor& pos,
                          Tensor& col) {
    const int bands = static_cast<int>(palette.size());
    for (int i = 0; i < n; ++i) {
        // Uniform on the unit sphere: height y ~ U(-1,1), azimuth ~ U(0,2pi).
        const double y = rng.uniform(-1.0, 1.0);
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        pos.at(i, 0) = r * std::cos(phi);
        pos.at(i, 1) = y;
        pos.at(i, 2) = r * std::sin(phi);
        int band = static_cast<int>((y + 1.0) / 2.0 * bands);
        band = std::min(std::max(band, 0), bands - 1);
        const Vec3& c = palette[static_cast<std::size_t>(band)];
        for (int a = 0; a < 3; ++a) col.at(i, a) = c[static_cast<std::size_t>(a)];
    }
}

inline void sample_cube(int n, const Palette& palette, Rng& rng, Tensor& pos,
                        Tensor& col) {
    // Face order +x, -x, +y, -y, +z, -z; half-extent exactly 0.5.
    for (int i = 0; i < n; ++i) {
        const int face = rng.uniform_int(6);
        const int axis = face / 2;
        const double sign = (face % 2 == 0) ? 0.5 : -0.5;
        const double u = rng.uniform(-0.5, 0.5);
        const double v = rng.uniform(-0.5, 0.5);
        double p[3];
        p[axis] = sign;
        p[(axis + 1) % 3] = u;
        p[(axis + 2) % 3] = v;
        for (int a = 0; a < 3; ++a) pos.at(i, a) = p[a];
        const Vec3& c = cycle(palette, static_cast<std::size_t>(face));
        for (int a = 0; a < 3; ++a) col.at(i, a) = c[static_cast<std::size_t>(a)];
    }
}

inline void sample_cylinder(int n, const Palette& palette, Rng& rng, Tensor& pos,
                            Tensor& col) {
    // Radius 0.5, axis along y, height 1. Lateral, top cap, bottom cap
    // weighted by area; colors from the first three palette slots.
    const double radius = 0.5;
    const double lateral = 2.0 * std::numbers::pi * radius;        // height 1
    const double cap = std::numbers::pi * radius * radius;
    const std::vector<double> weights{lateral, cap, cap};
    for (int i = 0; i < n; ++i) {
        const int part = pick_weighted(weights, rng);
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        double r = radius, y;
        if (part == 0) {
            y = rng.uniform(-0.5, 0.5);
        } else {
            r = radius * std::sqrt(rng.uniform());
            y = part == 1 ? 0.5 : -0.5;
        }
        pos.at(i, 0) = r * std::cos(phi);
        pos.at(i, 1) = y;
        pos.at(i, 2) = r * std::sin(phi);
        const Vec3& c = cycle(palette, static_cast<std::size_t>(part));
        for (int a = 0; a < 3; ++a) col.at(i, a) = c[static_cast<std::size_t>(a)];
    }
}

inline void sample_chairlike(int n, const Palette& palette, Rng& rng, Tensor& pos,
                             Tensor& col) {
    // Seat and back in one tone, four legs in another.
    std::vector<SurfacePatch> patches;
    const Vec3 body = cycle(palette, 0);
    const Vec3 legs = cycle(palette, 1);
    patches.push_back({{-0.45, 0.0, -0.45}, {0.9, 0.0, 0.0}, {0.0, 0.0, 0.9}, body});
    patches.push_back({{-0.45, 0.0, -0.45}, {0.9, 0.0, 0.0}, {0.0, 0.9, 0.0}, body});
    for (const double x : {-0.4, 0.4})
        for (const double z : {-0.4, 0.4})
            patches.push_back(
                {{x - 0.04, -0.8, z}, {0.08, 0.0, 0.0}, {0.0, 0.8, 0.0}, legs});

    std::vector<double> weights;
    for (const auto& p : patches) weights.push_back(p.area());
    for (int i = 0; i < n; ++i) {
        const auto& patch = patches[static_cast<std::size_t>(pick_weighted(weights, rng))];
        const Vec3 p = patch.sample(rng);
        for (int a = 0; a < 3; ++a) {
            pos.at(i, a) = p[static_cast<std::size_t>(a)];
            col.at(i, a) = patch.color[static_cast<std::size_t>(a)];
        }
    }
}

}  // namespace detail

/// Raw surface sampler: points on the unit-scale shape with their colors,
/// before any normalization.
inline PointCloud sample_shape(ShapeKind kind, int n_points, const Palette& palette,
                               Rng& rng) {
    if (n_points < 8)
        throw ContractError("sample_shape needs n_points >= 8, got " +
                            std::to_string(n_points));
    if (palette.empty()) throw ContractError("sample_shape: empty palette");

    Tensor pos({n_points, 3});
    Tensor col({n_points, 3});
    switch (kind) {
        case ShapeKind::Sphere: detail::sample_sphere(n_points, palette, rng, pos, col); break;
        case ShapeKind::Cube: detail::sample_cube(n_points, palette, rng, pos, col); break;
        case ShapeKind::Cylinder:
            detail::sample_cylinder(n_points, palette, rng, pos, col);
            break;
        case ShapeKind::Chairlike:
            detail::sample_chairlike(n_points, palette, rng, pos, col);
            break;
    }
    PointCloud cloud(std::move(pos));
    cloud.set_colors(std::move(col));
    return cloud;
}

/// Full sample: sampled shape, normalized, rendered from `cam`. The same
/// (kind, n_points, palette, cam, seed, cfg) always produces bitwise
/// identical output.
inline Sample gen_synthetic(ShapeKind kind, int n_points, const Palette& palette,
                            const Camera& cam, std::uint64_t seed,
                            const RenderConfig& cfg = RenderConfig{}) {
    Rng rng(seed);
    const PointCloud raw = sample_shape(kind, n_points, palette, rng);
    NormalizedCloud norm = normalize(raw);
    Image reference = render(norm.cloud, cam, cfg);
    return {std::move(norm.cloud), std::move(reference), cam, norm.record};
}

}  // namespace pcdm
