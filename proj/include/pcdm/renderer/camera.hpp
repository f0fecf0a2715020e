#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "pcdm/core/tensor.hpp"

namespace pcdm {

using Vec3 = std::array<double, 3>;

namespace vec {

inline Vec3 sub(const Vec3& a, const Vec3& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 add(const Vec3& a, const Vec3& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline double dot(const Vec3& a, const Vec3& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalize(const Vec3& a) {
    const double n = norm(a);
    if (n < 1e-300) throw ContractError("cannot normalize zero vector");
    return scale(a, 1.0 / n);
}

}  // namespace vec

/// Pinhole camera. fov_y is the full vertical field of view in radians.
struct Camera {
    Vec3 position{0.0, 0.0, 2.5};
    Vec3 look_at{0.0, 0.0, 0.0};
    Vec3 up{0.0, 1.0, 0.0};
    double fov_y = std::numbers::pi / 3.0;
    int height = 64;
    int width = 64;
};

/// One ray per pixel in row-major pixel order; directions are unit length.
struct Rays {
    Tensor origins;     // (h*w) x 3
    Tensor directions;  // (h*w) x 3
};

inline Rays generate_rays(const Camera& cam) {
    if (cam.height < 1 || cam.width < 1)
        throw ContractError("camera dims must be positive");
    if (!(cam.fov_y > 0.0 && cam.fov_y < std::numbers::pi))
        throw ContractError("fov must lie in (0, pi)");
    const Vec3 view = vec::sub(cam.look_at, cam.position);
    if (vec::norm(view) < 1e-12)
        throw ContractError("camera position equals look-at target");
    const Vec3 forward = vec::normalize(view);
    const Vec3 side = vec::cross(forward, cam.up);
    if (vec::norm(side) < 1e-9)
        throw ContractError("camera up is parallel to the view direction");
    const Vec3 right = vec::normalize(side);
    const Vec3 true_up = vec::cross(right, forward);

    const double half_h = std::tan(cam.fov_y / 2.0);
    const double half_w = half_h * static_cast<double>(cam.width) / cam.height;

    Rays rays;
    rays.origins = Tensor({cam.height * cam.width, 3});
    rays.directions = Tensor({cam.height * cam.width, 3});
    for (int y = 0; y < cam.height; ++y) {
        const double sy = (1.0 - 2.0 * (y + 0.5) / cam.height) * half_h;
        for (int x = 0; x < cam.width; ++x) {
            const double sx = (2.0 * (x + 0.5) / cam.width - 1.0) * half_w;
            const Vec3 dir = vec::normalize(
                vec::add(forward, vec::add(vec::scale(right, sx), vec::scale(true_up, sy))));
            const int row = y * cam.width + x;
            for (int c = 0; c < 3; ++c) {
                rays.origins.at(row, c) = cam.position[static_cast<std::size_t>(c)];
                rays.directions.at(row, c) = dir[static_cast<std::size_t>(c)];
            }
        }
    }
    return rays;
}

}  // namespace pcdm
