#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "pcdm/core/graph.hpp"
#include "pcdm/core/rng.hpp"
#include "pcdm/image.hpp"
#include "pcdm/point_cloud.hpp"
#include "pcdm/renderer/camera.hpp"
#include "pcdm/renderer/spatial_index.hpp"

namespace pcdm {

/// Floor on the centroid distance in the density formula.
inline constexpr double kDensityEps = 1e-4;

struct RenderConfig {
    int samples_per_ray = 32;  // M
    int k_neighbors = 8;       // K
    double near = 0.0;         // both > 0 to pin the depth range explicitly;
    double far = 0.0;          // otherwise derived from the cloud's bounds
    double mask_radius = 0.1;
    std::array<double, 3> background{1.0, 1.0, 1.0};
    double bound_margin = 0.2;  // bounding-sphere slack for the derived range
};

struct DepthRange {
    double near;
    double far;
};

/// Depth window along the rays: explicit from the config when set, otherwise
/// the cloud's bounding sphere (seen from the camera) padded by the margin.
inline DepthRange depth_range(const Tensor& positions, const Camera& cam,
                              const RenderConfig& cfg) {
    if (cfg.near > 0.0 || cfg.far > 0.0) {
        if (!(cfg.near > 0.0 && cfg.near < cfg.far))
            throw ContractError("render depth range needs 0 < near < far, got " +
                                std::to_string(cfg.near) + ".." + std::to_string(cfg.far));
        return {cfg.near, cfg.far};
    }
    Vec3 lo{positions.at(0, 0), positions.at(0, 1), positions.at(0, 2)};
    Vec3 hi = lo;
    for (int i = 1; i < positions.rows(); ++i)
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], positions.at(i, a));
            hi[a] = std::max(hi[a], positions.at(i, a));
        }
    const Vec3 center = vec::scale(vec::add(lo, hi), 0.5);
    double radius = 0.0;
    for (int i = 0; i < positions.rows(); ++i) {
        const Vec3 d = {positions.at(i, 0) - center[0], positions.at(i, 1) - center[1],
                        positions.at(i, 2) - center[2]};
        radius = std::max(radius, vec::norm(d));
    }
    const double reach = (1.0 + cfg.bound_margin) * std::max(radius, 1e-6);
    const double dist = vec::norm(vec::sub(center, cam.position));
    return {std::max(dist - reach, 1e-4), dist + reach};
}

/// M depths along one ray: stratified when an rng is given, stratum midpoints
/// otherwise. Spacing of the last sample repeats the one before it.
inline void sample_depths(const DepthRange& range, int m, Rng* rng,
                          std::vector<double>& depths, std::vector<double>& deltas) {
    if (m < 1) throw ContractError("need at least one sample per ray");
    const double span = (range.far - range.near) / m;
    depths.resize(static_cast<std::size_t>(m));
    deltas.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double u = rng ? rng->uniform() : 0.5;
        depths[static_cast<std::size_t>(i)] = range.near + (i + u) * span;
    }
    for (int i = 0; i + 1 < m; ++i)
        deltas[static_cast<std::size_t>(i)] =
            depths[static_cast<std::size_t>(i + 1)] - depths[static_cast<std::size_t>(i)];
    deltas[static_cast<std::size_t>(m - 1)] =
        m > 1 ? deltas[static_cast<std::size_t>(m - 2)] : span;
}

/// Density from the K nearest neighbors: inverse distance to their centroid,
/// clamped away from the coincident-centroid singularity.
inline double density_at(const Vec3& p, const PointCloud& cloud, int k,
                         const SpatialIndex& index) {
    const auto nn = index.knn(p, k);
    Vec3 centroid{0.0, 0.0, 0.0};
    for (int idx : nn)
        for (int a = 0; a < 3; ++a)
            centroid[static_cast<std::size_t>(a)] += cloud.positions.at(idx, a);
    centroid = vec::scale(centroid, 1.0 / static_cast<double>(nn.size()));
    return 1.0 / std::max(vec::norm(vec::sub(p, centroid)), kDensityEps);
}

/// Radiance as a softmax over negative neighbor distances applied to the
/// neighbor colors.
inline Vec3 radiance_at(const Vec3& p, const PointCloud& cloud, int k,
                        const SpatialIndex& index) {
    if (!cloud.has_colors()) throw ContractError("radiance needs point colors");
    const auto nn = index.knn(p, k);
    std::vector<double> neg(nn.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nn.size(); ++j) {
        const int idx = nn[j];
        const Vec3 q{cloud.positions.at(idx, 0), cloud.positions.at(idx, 1),
                     cloud.positions.at(idx, 2)};
        neg[j] = -vec::norm(vec::sub(p, q));
        mx = std::max(mx, neg[j]);
    }
    double denom = 0.0;
    for (double& v : neg) {
        v = std::exp(v - mx);
        denom += v;
    }
    Vec3 rgb{0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < nn.size(); ++j) {
        const double w = neg[j] / denom;
        for (int c = 0; c < 3; ++c) rgb[static_cast<std::size_t>(c)] +=
            w * cloud.colors.at(nn[j], c);
    }
    return rgb;
}

/// Per-sample shading record along one ray.
struct ShadingResult {
    std::vector<double> sigma;
    std::vector<double> delta;
    std::vector<double> tau;
    std::vector<Vec3> radiance;
    std::vector<bool> masked;
    Vec3 pixel{0.0, 0.0, 0.0};
    double weight_sum = 0.0;
};

/// Volume compositing over precomputed sigma/delta/color rows; fills tau,
/// pixel and the accumulated alpha-weight sum of `res`.
inline void composite_ray(ShadingResult& res, const std::array<double, 3>& background) {
    const std::size_t m = res.sigma.size();
    res.tau.assign(m, 1.0);
    res.pixel = {0.0, 0.0, 0.0};
    res.weight_sum = 0.0;
    double tau = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        res.tau[i] = tau;
        const double decay = std::exp(-res.sigma[i] * res.delta[i]);
        const double w = tau * (1.0 - decay);
        res.weight_sum += w;
        for (int c = 0; c < 3; ++c)
            res.pixel[static_cast<std::size_t>(c)] +=
                w * res.radiance[i][static_cast<std::size_t>(c)];
        tau *= decay;
    }
    for (int c = 0; c < 3; ++c)
        res.pixel[static_cast<std::size_t>(c)] += tau * background[static_cast<std::size_t>(c)];
}

/// Shade one ray against the cloud: mask, density and radiance per sample,
/// then composite.
inline ShadingResult shade_ray(const Vec3& origin, const Vec3& dir,
                               const std::vector<double>& depths,
                               const std::vector<double>& deltas,
                               const PointCloud& cloud, const SpatialIndex& index,
                               const RenderConfig& cfg) {
    ShadingResult res;
    const std::size_t m = depths.size();
    res.sigma.assign(m, 0.0);
    res.delta = deltas;
    res.radiance.assign(m, Vec3{0.0, 0.0, 0.0});
    res.masked.assign(m, true);
    for (std::size_t i = 0; i < m; ++i) {
        const Vec3 p = vec::add(origin, vec::scale(dir, depths[i]));
        if (!index.within(p, cfg.mask_radius)) continue;
        res.masked[i] = false;
        res.sigma[i] = density_at(p, cloud, cfg.k_neighbors, index);
        res.radiance[i] = radiance_at(p, cloud, cfg.k_neighbors, index);
    }
    composite_ray(res, cfg.background);
    return res;
}

/// Full image render, plain scalar path.
inline Image render(const PointCloud& cloud, const Camera& cam, const RenderConfig& cfg,
                    Rng* depth_rng = nullptr) {
    if (!cloud.has_colors()) throw ContractError("render needs point colors");
    if (cfg.k_neighbors > cloud.size())
        throw ContractError("k_neighbors exceeds cloud size");
    const Rays rays = generate_rays(cam);
    const DepthRange range = depth_range(cloud.positions, cam, cfg);
    const SpatialIndex index(cloud.positions, cfg.mask_radius);

    Image img(cam.height, cam.width);
    std::vector<double> depths, deltas;
    for (int r = 0; r < cam.height * cam.width; ++r) {
        sample_depths(range, cfg.samples_per_ray, depth_rng, depths, deltas);
        const Vec3 o{rays.origins.at(r, 0), rays.origins.at(r, 1), rays.origins.at(r, 2)};
        const Vec3 d{rays.directions.at(r, 0), rays.directions.at(r, 1),
                     rays.directions.at(r, 2)};
        const ShadingResult res = shade_ray(o, d, depths, deltas, cloud, index, cfg);
        for (int c = 0; c < 3; ++c)
            img.rgb.at(r, c) = std::clamp(res.pixel[static_cast<std::size_t>(c)], 0.0, 1.0);
    }
    return img;
}

/// Tape-recorded render: same math as the scalar path, with neighbor picks,
/// masking and depth sampling frozen as discrete data. Masked samples never
/// touch the cloud tensors, so their gradients are exactly zero. Returns the
/// (h*w) x 3 pixel block.
inline Val render_graph(Graph& g, Val positions, Val colors, const Camera& cam,
                        const RenderConfig& cfg, Rng* depth_rng = nullptr) {
    const Tensor& pos = positions.value();
    if (pos.cols() != 3 || colors.cols() != 3 || pos.rows() != colors.rows())
        throw ContractError("render_graph: positions " + shape_str(pos.shape()) +
                            " vs colors " + shape_str(colors.value().shape()));
    if (cfg.k_neighbors > pos.rows())
        throw ContractError("k_neighbors exceeds cloud size");

    const Rays rays = generate_rays(cam);
    const DepthRange range = depth_range(pos, cam, cfg);
    const SpatialIndex index(pos, cfg.mask_radius);
    const int n_rays = cam.height * cam.width;
    const int m = cfg.samples_per_ray;
    const int k = cfg.k_neighbors;
    const int n_samples = n_rays * m;

    // Freeze sample geometry and neighbor structure.
    Tensor delta_flat({n_samples, 1});
    std::vector<Vec3> sample_pos(static_cast<std::size_t>(n_samples));
    std::vector<int> unmasked;
    std::vector<double> depths, deltas;
    for (int r = 0; r < n_rays; ++r) {
        sample_depths(range, m, depth_rng, depths, deltas);
        const Vec3 o{rays.origins.at(r, 0), rays.origins.at(r, 1), rays.origins.at(r, 2)};
        const Vec3 d{rays.directions.at(r, 0), rays.directions.at(r, 1),
                     rays.directions.at(r, 2)};
        for (int i = 0; i < m; ++i) {
            const int s = r * m + i;
            delta_flat[static_cast<std::size_t>(s)] = deltas[static_cast<std::size_t>(i)];
            sample_pos[static_cast<std::size_t>(s)] =
                vec::add(o, vec::scale(d, depths[static_cast<std::size_t>(i)]));
            if (index.within(sample_pos[static_cast<std::size_t>(s)], cfg.mask_radius))
                unmasked.push_back(s);
        }
    }

    const int u = static_cast<int>(unmasked.size());
    Val sigma_dense{&g, -1};
    Val rgb_dense{&g, -1};
    if (u == 0) {
        sigma_dense = g.constant(Tensor({n_samples, 1}));
        rgb_dense = g.constant(Tensor({n_samples, 3}));
    } else {
        std::vector<int> flat_nn(static_cast<std::size_t>(u) * k);
        std::vector<int> group(static_cast<std::size_t>(u) * k);
        Tensor p_u({u, 3});
        Tensor p_rep({u * k, 3});
        for (int j = 0; j < u; ++j) {
            const Vec3& p = sample_pos[static_cast<std::size_t>(unmasked[j])];
            const auto nn = index.knn(p, k);
            for (int a = 0; a < 3; ++a) p_u.at(j, a) = p[static_cast<std::size_t>(a)];
            for (int t = 0; t < k; ++t) {
                flat_nn[static_cast<std::size_t>(j * k + t)] = nn[static_cast<std::size_t>(t)];
                group[static_cast<std::size_t>(j * k + t)] = j;
                for (int a = 0; a < 3; ++a)
                    p_rep.at(j * k + t, a) = p[static_cast<std::size_t>(a)];
            }
        }

        Val gathered = g.gather_rows(positions, flat_nn);
        Val centroids =
            g.mul_scalar(g.scatter_add_rows(gathered, group, u), 1.0 / k);
        Val cdist = g.l2_norm_rows(g.sub(g.constant(p_u), centroids));
        Val sigma_u = g.reciprocal(g.clamp_min(cdist, kDensityEps));

        Val ndist = g.l2_norm_rows(g.sub(g.constant(p_rep), gathered));
        Val weights = g.softmax_rows(g.neg(g.reshape(ndist, {u, k})));
        Val w_flat = g.reshape(weights, {u * k, 1});
        Val weighted = g.mul(g.broadcast_cols(w_flat, 3), g.gather_rows(colors, flat_nn));
        Val rgb_u = g.scatter_add_rows(weighted, group, u);

        sigma_dense = g.scatter_add_rows(sigma_u, unmasked, n_samples);
        rgb_dense = g.scatter_add_rows(rgb_u, unmasked, n_samples);
    }

    Val a_rows = g.reshape(g.mul(sigma_dense, g.constant(delta_flat)), {n_rays, m});
    Val tau = g.exp(g.neg(g.cumsum_rows_exclusive(a_rows)));
    Val alpha = g.sub(g.constant(Tensor::full({n_rays, m}, 1.0)),
                      g.exp(g.neg(a_rows)));
    Val w_samples = g.reshape(g.mul(tau, alpha), {n_samples, 1});

    std::vector<int> ray_of(static_cast<std::size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) ray_of[static_cast<std::size_t>(s)] = s / m;
    Val foreground = g.scatter_add_rows(g.mul(g.broadcast_cols(w_samples, 3), rgb_dense),
                                        ray_of, n_rays);

    Val residual = g.exp(g.neg(g.sum_rows(a_rows)));
    Tensor bg({n_rays, 3});
    for (int r = 0; r < n_rays; ++r)
        for (int c = 0; c < 3; ++c) bg.at(r, c) = cfg.background[static_cast<std::size_t>(c)];
    return g.add(foreground, g.mul(g.broadcast_cols(residual, 3), g.constant(bg)));
}

}  // namespace pcdm
