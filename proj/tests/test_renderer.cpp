#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "pcdm/renderer/camera.hpp"
#include "pcdm/renderer/renderer.hpp"
#include "pcdm/renderer/spatial_index.hpp"
#include "support/fd.hpp"

using namespace pcdm;

namespace {

PointCloud ball_cloud(int n, Rng& rng, double radius = 0.5) {
    Tensor pos({n, 3});
    for (int i = 0; i < n; ++i) {
        // Rejection-sample the unit ball.
        for (;;) {
            const double x = rng.uniform(-1.0, 1.0);
            const double y = rng.uniform(-1.0, 1.0);
            const double z = rng.uniform(-1.0, 1.0);
            if (x * x + y * y + z * z <= 1.0) {
                pos.at(i, 0) = radius * x;
                pos.at(i, 1) = radius * y;
                pos.at(i, 2) = radius * z;
                break;
            }
        }
    }
    Tensor col({n, 3});
    for (std::size_t i = 0; i < col.numel(); ++i) col[i] = rng.uniform();
    return PointCloud(std::move(pos), std::move(col));
}

std::vector<int> brute_knn(const Tensor& pts, const Vec3& p, int k) {
    std::vector<std::pair<double, int>> all;
    for (int i = 0; i < pts.rows(); ++i) {
        const double dx = p[0] - pts.at(i, 0);
        const double dy = p[1] - pts.at(i, 1);
        const double dz = p[2] - pts.at(i, 2);
        all.emplace_back(dx * dx + dy * dy + dz * dz, i);
    }
    std::sort(all.begin(), all.end());
    std::vector<int> out;
    for (int i = 0; i < k; ++i) out.push_back(all[static_cast<std::size_t>(i)].second);
    return out;
}

Camera basic_camera(int h = 5, int w = 5) {
    Camera cam;
    cam.position = {0.0, 0.0, 2.5};
    cam.look_at = {0.0, 0.0, 0.0};
    cam.height = h;
    cam.width = w;
    return cam;
}

}  // namespace

TEST(Rays, CenterPixelFollowsPrincipalAxis) {
    Camera cam = basic_camera(5, 5);
    cam.position = {0.4, -0.7, 2.0};
    cam.look_at = {-0.1, 0.3, -0.5};
    const Rays rays = generate_rays(cam);
    const Vec3 expect = vec::normalize(vec::sub(cam.look_at, cam.position));
    const int center = 2 * 5 + 2;
    for (int c = 0; c < 3; ++c)
        EXPECT_NEAR(rays.directions.at(center, c), expect[static_cast<std::size_t>(c)],
                    1e-12);
}

TEST(Rays, AllDirectionsUnitNorm) {
    Camera cam = basic_camera(7, 9);
    cam.fov_y = 1.1;
    const Rays rays = generate_rays(cam);
    for (int r = 0; r < 63; ++r) {
        const Vec3 d{rays.directions.at(r, 0), rays.directions.at(r, 1),
                     rays.directions.at(r, 2)};
        EXPECT_NEAR(vec::norm(d), 1.0, 1e-12);
    }
}

TEST(Rays, CornerOffsetMatchesPinholeGeometry) {
    Camera cam = basic_camera(6, 8);
    const Rays rays = generate_rays(cam);
    const Vec3 forward = vec::normalize(vec::sub(cam.look_at, cam.position));
    const double half_h = std::tan(cam.fov_y / 2.0);
    const double half_w = half_h * 8.0 / 6.0;
    // Corner pixel (0,0): offsets of its center in the image plane.
    const double sx = (2.0 * 0.5 / 8.0 - 1.0) * half_w;
    const double sy = (1.0 - 2.0 * 0.5 / 6.0) * half_h;
    const double expect_cos = 1.0 / std::sqrt(1.0 + sx * sx + sy * sy);
    const Vec3 d{rays.directions.at(0, 0), rays.directions.at(0, 1),
                 rays.directions.at(0, 2)};
    EXPECT_NEAR(vec::dot(forward, d), expect_cos, 1e-12);
}

TEST(Rays, DegenerateCamerasRejected) {
    Camera cam = basic_camera();
    cam.fov_y = 0.0;
    EXPECT_THROW(generate_rays(cam), ContractError);
    cam = basic_camera();
    cam.fov_y = std::numbers::pi;
    EXPECT_THROW(generate_rays(cam), ContractError);
    cam = basic_camera();
    cam.up = {0.0, 0.0, 1.0};  // parallel to the view direction
    EXPECT_THROW(generate_rays(cam), ContractError);
    cam = basic_camera();
    cam.look_at = cam.position;
    EXPECT_THROW(generate_rays(cam), ContractError);
    cam = basic_camera();
    cam.width = 0;
    EXPECT_THROW(generate_rays(cam), ContractError);
}

TEST(SpatialIndexTest, MatchesBruteForceOnRandomQueries) {
    Rng rng(21);
    const PointCloud cloud = ball_cloud(120, rng);
    const SpatialIndex index(cloud.positions, 0.1);
    for (int q = 0; q < 100; ++q) {
        const Vec3 p{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8),
                     rng.uniform(-0.8, 0.8)};
        for (int k : {1, 4, 8}) {
            const auto got = index.knn(p, k);
            const auto want = brute_knn(cloud.positions, p, k);
            EXPECT_EQ(got, want) << "query " << q << " k " << k;
        }
    }
}

TEST(SpatialIndexTest, TieBreaksByIndex) {
    Tensor pos = Tensor::from_data(
        {4, 3}, {0.05, 0.0, 0.0, 0.3, 0.3, 0.3, 0.05, 0.0, 0.0, -0.4, 0.1, 0.0});
    const SpatialIndex index(pos, 0.1);
    const auto nn = index.knn({0.0, 0.0, 0.0}, 2);
    EXPECT_EQ(nn, (std::vector<int>{0, 2}));
}

TEST(SpatialIndexTest, WithinRadius) {
    Tensor pos = Tensor::from_data({2, 3}, {1.0, 0.0, 0.0, -0.35, 0.0, 0.0});
    const SpatialIndex index(pos, 0.1);
    EXPECT_TRUE(index.within({1.0, 0.0, 0.0}, 0.0));
    // Dyadic coordinates make the boundary distance exact: within is inclusive.
    EXPECT_TRUE(index.within({0.9375, 0.0, 0.0}, 0.0625));
    EXPECT_FALSE(index.within({0.9375, 0.0, 0.0}, 0.06));
    EXPECT_FALSE(index.within({0.5, 0.0, 0.0}, 0.1));
    // Radius far beyond the cell size still finds the point.
    EXPECT_TRUE(index.within({0.0, 0.0, 0.0}, 0.36));
    EXPECT_FALSE(index.within({0.0, 0.0, 0.0}, 0.3));
}

TEST(SpatialIndexTest, Contracts) {
    Rng rng(22);
    const PointCloud cloud = ball_cloud(5, rng);
    const SpatialIndex index(cloud.positions, 0.1);
    EXPECT_THROW(index.knn({0, 0, 0}, 0), ContractError);
    EXPECT_THROW(index.knn({0, 0, 0}, 6), ContractError);
    EXPECT_THROW(SpatialIndex(cloud.positions, 0.0), ContractError);
    EXPECT_THROW(SpatialIndex(Tensor({2, 2}), 0.1), ContractError);
}

TEST(Density, SingleNeighborInverseDistance) {
    Tensor pos = Tensor::from_data({2, 3}, {2.0, 0.0, 0.0, 9.0, 9.0, 9.0});
    const PointCloud cloud(pos);
    const SpatialIndex index(pos, 0.1);
    EXPECT_DOUBLE_EQ(density_at({0.0, 0.0, 0.0}, cloud, 1, index), 0.5);
}

TEST(Density, CoincidentCentroidClamps) {
    // Four points whose centroid is the origin.
    Tensor pos = Tensor::from_data({4, 3}, {0.2, 0.0, 0.0, -0.2, 0.0, 0.0, 0.0, 0.2,
                                            0.0, 0.0, -0.2, 0.0});
    const PointCloud cloud(pos);
    const SpatialIndex index(pos, 0.1);
    EXPECT_DOUBLE_EQ(density_at({0.0, 0.0, 0.0}, cloud, 4, index), 1e4);
}

TEST(Density, MatchesBruteForceOracle) {
    Rng rng(23);
    const PointCloud cloud = ball_cloud(60, rng);
    const SpatialIndex index(cloud.positions, 0.1);
    for (int q = 0; q < 25; ++q) {
        const Vec3 p{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                     rng.uniform(-0.5, 0.5)};
        const auto nn = brute_knn(cloud.positions, p, 4);
        Vec3 centroid{0, 0, 0};
        for (int idx : nn)
            for (int a = 0; a < 3; ++a)
                centroid[static_cast<std::size_t>(a)] += cloud.positions.at(idx, a);
        centroid = vec::scale(centroid, 0.25);
        const double expect = 1.0 / std::max(vec::norm(vec::sub(p, centroid)), 1e-4);
        EXPECT_EQ(density_at(p, cloud, 4, index), expect);
    }
}

TEST(Radiance, SingleNeighborCopiesColor) {
    Tensor pos = Tensor::from_data({2, 3}, {0.3, 0.1, 0.0, 5.0, 5.0, 5.0});
    Tensor col = Tensor::from_data({2, 3}, {0.7, 0.2, 0.9, 0.0, 1.0, 0.0});
    const PointCloud cloud(pos, col);
    const SpatialIndex index(pos, 0.1);
    const Vec3 rgb = radiance_at({0.0, 0.0, 0.0}, cloud, 1, index);
    EXPECT_DOUBLE_EQ(rgb[0], 0.7);
    EXPECT_DOUBLE_EQ(rgb[1], 0.2);
    EXPECT_DOUBLE_EQ(rgb[2], 0.9);
}

TEST(Radiance, EquidistantNeighborsBlendEvenly) {
    Tensor pos = Tensor::from_data({2, 3}, {1.0, 0.0, 0.0, -1.0, 0.0, 0.0});
    Tensor col = Tensor::from_data({2, 3}, {1.0, 0.0, 0.0, 0.0, 0.0, 1.0});
    const PointCloud cloud(pos, col);
    const SpatialIndex index(pos, 0.1);
    const Vec3 rgb = radiance_at({0.0, 0.0, 0.0}, cloud, 2, index);
    EXPECT_DOUBLE_EQ(rgb[0], 0.5);
    EXPECT_DOUBLE_EQ(rgb[1], 0.0);
    EXPECT_DOUBLE_EQ(rgb[2], 0.5);
}

TEST(Radiance, WeightsNormalized) {
    Rng rng(24);
    PointCloud cloud = ball_cloud(40, rng);
    Tensor flat({40, 3});
    for (int i = 0; i < 40; ++i) {
        flat.at(i, 0) = 0.3;
        flat.at(i, 1) = 0.6;
        flat.at(i, 2) = 0.9;
    }
    cloud.set_colors(flat);
    const SpatialIndex index(cloud.positions, 0.1);
    for (int q = 0; q < 20; ++q) {
        const Vec3 p{rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6),
                     rng.uniform(-0.6, 0.6)};
        const Vec3 rgb = radiance_at(p, cloud, 8, index);
        EXPECT_NEAR(rgb[0], 0.3, 1e-12);
        EXPECT_NEAR(rgb[1], 0.6, 1e-12);
        EXPECT_NEAR(rgb[2], 0.9, 1e-12);
    }
}

TEST(Radiance, RequiresColors) {
    Rng rng(25);
    PointCloud cloud = ball_cloud(10, rng);
    cloud = cloud.without_colors();
    const SpatialIndex index(cloud.positions, 0.1);
    EXPECT_THROW(radiance_at({0, 0, 0}, cloud, 2, index), ContractError);
}

TEST(Composite, HalfOpacitySingleSample) {
    ShadingResult res;
    res.sigma = {std::log(2.0)};
    res.delta = {1.0};
    res.radiance = {Vec3{0.8, 0.4, 0.2}};
    composite_ray(res, {0.0, 0.0, 0.0});
    EXPECT_NEAR(res.pixel[0], 0.4, 1e-12);
    EXPECT_NEAR(res.pixel[1], 0.2, 1e-12);
    EXPECT_NEAR(res.pixel[2], 0.1, 1e-12);
    EXPECT_NEAR(res.weight_sum, 0.5, 1e-12);
    EXPECT_EQ(res.tau[0], 1.0);
}

TEST(Composite, ZeroDensityShowsBackground) {
    ShadingResult res;
    res.sigma.assign(5, 0.0);
    res.delta.assign(5, 0.2);
    res.radiance.assign(5, Vec3{1.0, 1.0, 1.0});
    composite_ray(res, {0.25, 0.5, 0.75});
    EXPECT_DOUBLE_EQ(res.pixel[0], 0.25);
    EXPECT_DOUBLE_EQ(res.pixel[1], 0.5);
    EXPECT_DOUBLE_EQ(res.pixel[2], 0.75);
    EXPECT_DOUBLE_EQ(res.weight_sum, 0.0);
}

TEST(Composite, PropertySweepOverRandomRays) {
    Rng rng(26);
    RenderConfig cfg;
    cfg.samples_per_ray = 16;
    cfg.k_neighbors = 4;
    cfg.mask_radius = 0.15;
    int checked = 0;
    for (int trial = 0; trial < 5; ++trial) {
        const PointCloud cloud = ball_cloud(50, rng);
        const SpatialIndex index(cloud.positions, cfg.mask_radius);
        const DepthRange range{0.5, 3.5};
        std::vector<double> depths, deltas;
        for (int r = 0; r < 220; ++r) {
            Vec3 origin{rng.uniform(-2, 2), rng.uniform(-2, 2), 2.5};
            Vec3 dir = vec::normalize(
                Vec3{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), -1.0});
            sample_depths(range, cfg.samples_per_ray, &rng, depths, deltas);
            const auto res = shade_ray(origin, dir, depths, deltas, cloud, index, cfg);
            EXPECT_EQ(res.tau[0], 1.0);
            for (std::size_t i = 1; i < res.tau.size(); ++i)
                EXPECT_LE(res.tau[i], res.tau[i - 1]);
            EXPECT_GE(res.weight_sum, 0.0);
            EXPECT_LE(res.weight_sum, 1.0 + 1e-12);
            for (double v : res.pixel) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0 + 1e-12);
            }
            ++checked;
        }
    }
    EXPECT_GE(checked, 1000);
}

TEST(Render, FullyMaskedSceneIsBackground) {
    Rng rng(27);
    const PointCloud cloud = ball_cloud(30, rng);
    Camera cam = basic_camera(6, 6);
    RenderConfig cfg;
    cfg.samples_per_ray = 8;
    cfg.k_neighbors = 4;
    cfg.near = 0.1;  // depth band entirely in front of the cloud
    cfg.far = 0.8;
    cfg.background = {0.1, 0.2, 0.3};
    const Image img = render(cloud, cam, cfg);
    for (int r = 0; r < img.pixels(); ++r) {
        EXPECT_DOUBLE_EQ(img.rgb.at(r, 0), 0.1);
        EXPECT_DOUBLE_EQ(img.rgb.at(r, 1), 0.2);
        EXPECT_DOUBLE_EQ(img.rgb.at(r, 2), 0.3);
    }
}

TEST(Render, GraphPathAgreesWithScalarPath) {
    Rng rng(28);
    const PointCloud cloud = ball_cloud(40, rng);
    Camera cam = basic_camera(8, 8);
    RenderConfig cfg;
    cfg.samples_per_ray = 6;
    cfg.k_neighbors = 4;
    cfg.mask_radius = 0.3;
    const Image plain = render(cloud, cam, cfg);

    Graph g;
    Val out = render_graph(g, g.input(cloud.positions, true),
                           g.input(cloud.colors, true), cam, cfg);
    ASSERT_EQ(out.shape(), (Shape{64, 3}));
    for (std::size_t i = 0; i < out.value().numel(); ++i)
        EXPECT_NEAR(out.value()[i], plain.rgb[i], 1e-12);
}

TEST(Render, PixelValuesStayInRange) {
    Rng rng(29);
    const PointCloud cloud = ball_cloud(80, rng);
    Camera cam = basic_camera(10, 10);
    RenderConfig cfg;
    cfg.samples_per_ray = 12;
    cfg.k_neighbors = 6;
    const Image img = render(cloud, cam, cfg);
    for (std::size_t i = 0; i < img.rgb.numel(); ++i) {
        EXPECT_GE(img.rgb[i], 0.0);
        EXPECT_LE(img.rgb[i], 1.0);
    }
}

TEST(Render, ColorGradientMatchesFiniteDifferences) {
    Rng rng(30);
    const PointCloud cloud = ball_cloud(12, rng, 0.4);
    Camera cam = basic_camera(4, 4);
    RenderConfig cfg;
    cfg.samples_per_ray = 8;
    cfg.k_neighbors = 3;
    cfg.mask_radius = 0.25;

    const auto rep = test::check_grad(
        [&](Graph& g, std::vector<Val>& xs) {
            Val out = render_graph(g, g.constant(cloud.positions.clone()), xs[0], cam, cfg);
            return g.sum(out);
        },
        {cloud.colors}, 1e-5, 1e-2, 1e-8);
    EXPECT_TRUE(rep.pass) << "max rel " << rep.max_rel << " max abs " << rep.max_abs;
}

TEST(Render, MaskedPointGradientsExactlyZero) {
    Rng rng(31);
    PointCloud cloud = ball_cloud(12, rng, 0.4);
    // Append a point far outside every ray's sample band.
    Tensor pos({13, 3});
    Tensor col({13, 3});
    for (int i = 0; i < 12; ++i)
        for (int c = 0; c < 3; ++c) {
            pos.at(i, c) = cloud.positions.at(i, c);
            col.at(i, c) = cloud.colors.at(i, c);
        }
    pos.at(12, 0) = 40.0;
    pos.at(12, 1) = 40.0;
    pos.at(12, 2) = 40.0;
    col.at(12, 0) = 1.0;

    Camera cam = basic_camera(4, 4);
    RenderConfig cfg;
    cfg.samples_per_ray = 8;
    cfg.k_neighbors = 3;
    cfg.mask_radius = 0.25;
    cfg.near = 1.5;  // pin the band to the cluster, not the outlier
    cfg.far = 3.5;

    Graph g;
    Val pos_v = g.input(pos, true);
    Val col_v = g.input(col, true);
    g.backward(g.sum(render_graph(g, pos_v, col_v, cam, cfg)));
    const Tensor gp = g.grad_of(pos_v);
    const Tensor gc = g.grad_of(col_v);
    for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(gp.at(12, c), 0.0);
        EXPECT_EQ(gc.at(12, c), 0.0);
    }
    // The cluster itself is visible and receives gradient somewhere.
    double total = 0.0;
    for (int i = 0; i < 12; ++i)
        for (int c = 0; c < 3; ++c) total += std::abs(gc.at(i, c));
    EXPECT_GT(total, 0.0);
}

TEST(Render, ConfigErrors) {
    Rng rng(32);
    const PointCloud cloud = ball_cloud(10, rng);
    Camera cam = basic_camera(4, 4);
    RenderConfig cfg;
    cfg.near = 2.0;
    cfg.far = 1.0;
    EXPECT_THROW(render(cloud, cam, cfg), ContractError);
    RenderConfig cfg2;
    cfg2.k_neighbors = 11;
    EXPECT_THROW(render(cloud, cam, cfg2), ContractError);
    PointCloud bare = cloud.without_colors();
    EXPECT_THROW(render(bare, cam, RenderConfig{}), ContractError);
}

TEST(Render, AutoDepthRangeWrapsBoundingSphere) {
    Rng rng(33);
    const PointCloud cloud = ball_cloud(50, rng, 0.5);
    Camera cam = basic_camera();
    RenderConfig cfg;
    const DepthRange range = depth_range(cloud.positions, cam, cfg);

    Vec3 lo{cloud.positions.at(0, 0), cloud.positions.at(0, 1), cloud.positions.at(0, 2)};
    Vec3 hi = lo;
    for (int i = 1; i < 50; ++i)
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], cloud.positions.at(i, a));
            hi[a] = std::max(hi[a], cloud.positions.at(i, a));
        }
    const Vec3 center = vec::scale(vec::add(lo, hi), 0.5);
    double radius = 0.0;
    for (int i = 0; i < 50; ++i) {
        const Vec3 d{cloud.positions.at(i, 0) - center[0],
                     cloud.positions.at(i, 1) - center[1],
                     cloud.positions.at(i, 2) - center[2]};
        radius = std::max(radius, vec::norm(d));
    }
    const double dist = vec::norm(vec::sub(center, cam.position));
    EXPECT_NEAR(range.near, dist - 1.2 * radius, 1e-12);
    EXPECT_NEAR(range.far, dist + 1.2 * radius, 1e-12);
}

TEST(Render, DepthSamplesStrictlyIncreasing) {
    Rng rng(34);
    std::vector<double> depths, deltas;
    sample_depths({1.0, 3.0}, 10, nullptr, depths, deltas);
    for (std::size_t i = 1; i < depths.size(); ++i) EXPECT_GT(depths[i], depths[i - 1]);
    EXPECT_GE(depths.front(), 1.0);
    EXPECT_LE(depths.back(), 3.0);
    EXPECT_DOUBLE_EQ(deltas[9], deltas[8]);

    for (int trial = 0; trial < 20; ++trial) {
        sample_depths({1.0, 3.0}, 10, &rng, depths, deltas);
        for (std::size_t i = 1; i < depths.size(); ++i)
            EXPECT_GT(depths[i], depths[i - 1]);
        EXPECT_GE(depths.front(), 1.0);
        EXPECT_LT(depths.back(), 3.0);
    }
}
