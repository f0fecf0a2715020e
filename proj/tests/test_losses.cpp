#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pcdm/losses/emd.hpp"
#include "pcdm/losses/losses.hpp"
#include "support/fd.hpp"

using namespace pcdm;

namespace {

PointCloud random_cloud(int n, Rng& rng, double scale = 1.0) {
    Tensor pos({n, 3});
    for (std::size_t i = 0; i < pos.numel(); ++i) pos[i] = scale * rng.normal();
    return PointCloud(std::move(pos));
}

Image uniform_image(int h, int w, double v) {
    Image img(h, w);
    for (std::size_t i = 0; i < img.rgb.numel(); ++i) img.rgb[i] = v;
    return img;
}

}  // namespace

TEST(LossGeo, PerfectPredictionIsZero) {
    Rng rng(41);
    const Tensor eps = test::random_tensor({6, 3}, rng);
    EXPECT_EQ(loss_geo(eps, eps.clone()), 0.0);
}

TEST(LossGeo, UnitOffsetScoresOne) {
    const Tensor zero({5, 3});
    EXPECT_DOUBLE_EQ(loss_geo(zero, Tensor::full({5, 3}, 1.0)), 1.0);
}

TEST(LossGeo, MatchesNaiveLoopOracle) {
    Rng rng(42);
    const Tensor a = test::random_tensor({10, 3}, rng);
    const Tensor b = test::random_tensor({10, 3}, rng);
    double acc = 0.0;
    int count = 0;
    for (int i = 0; i < 10; ++i)
        for (int c = 0; c < 3; ++c) {
            const double d = a.at(i, c) - b.at(i, c);
            acc += d * d;
            ++count;
        }
    EXPECT_NEAR(loss_geo(a, b), acc / count, 1e-12);
    EXPECT_THROW(loss_geo(a, Tensor({9, 3})), ContractError);
}

TEST(LossGeo, GraphPathMatchesAndDifferentiates) {
    Rng rng(43);
    const Tensor a = test::random_tensor({4, 3}, rng);
    const Tensor b = test::random_tensor({4, 3}, rng);
    Graph g;
    Val loss = loss_geo_graph(g.input(a, true), g.constant(b));
    EXPECT_NEAR(loss.item(), loss_geo(a, b), 1e-15);

    const auto rep = test::check_grad(
        [&](Graph& gg, std::vector<Val>& xs) {
            return loss_geo_graph(xs[0], gg.constant(b.clone()));
        },
        {a});
    EXPECT_TRUE(rep.pass) << rep.max_rel;
}

TEST(LossChamfer, IdenticalCloudsScoreZero) {
    Rng rng(44);
    const PointCloud a = random_cloud(12, rng);
    EXPECT_EQ(loss_chamfer(a, a.clone()), 0.0);
}

TEST(LossChamfer, SingletonPairDoublesSquaredDistance) {
    const PointCloud a(Tensor::from_data({1, 3}, {0.0, 0.0, 0.0}));
    const PointCloud b(Tensor::from_data({1, 3}, {0.0, 3.0, 4.0}));  // distance 5
    EXPECT_DOUBLE_EQ(loss_chamfer(a, b), 50.0);
}

TEST(LossChamfer, MatchesBruteForceOracle) {
    Rng rng(45);
    const PointCloud a = random_cloud(16, rng);
    const PointCloud b = random_cloud(16, rng);

    auto directed = [](const PointCloud& from, const PointCloud& to) {
        double acc = 0.0;
        for (int i = 0; i < from.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < to.size(); ++j) {
                double d = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const double diff = from.positions.at(i, c) - to.positions.at(j, c);
                    d += diff * diff;
                }
                best = std::min(best, d);
            }
            acc += best;
        }
        return acc / from.size();
    };
    EXPECT_NEAR(loss_chamfer(a, b), directed(a, b) + directed(b, a), 1e-12);
    EXPECT_EQ(loss_chamfer(a, b), loss_chamfer(b, a));
}

TEST(LossChamfer, GraphPathMatchesAndDifferentiates) {
    Rng rng(46);
    const PointCloud a = random_cloud(8, rng);
    const PointCloud b = random_cloud(10, rng);
    Graph g;
    Val loss = loss_chamfer_graph(g, g.input(a.positions, true), g.constant(b.positions));
    EXPECT_NEAR(loss.item(), loss_chamfer(a, b), 1e-13);

    const auto rep = test::check_grad(
        [&](Graph& gg, std::vector<Val>& xs) {
            return loss_chamfer_graph(gg, xs[0], gg.constant(b.positions.clone()));
        },
        {a.positions});
    EXPECT_TRUE(rep.pass) << rep.max_rel;
}

TEST(LossRgb, IdenticalImagesScoreZero) {
    const Image img = uniform_image(4, 4, 0.6);
    EXPECT_EQ(loss_rgb(img, img), 0.0);
}

TEST(LossRgb, BlackVersusWhiteScoresThree) {
    EXPECT_DOUBLE_EQ(loss_rgb(uniform_image(4, 5, 0.0), uniform_image(4, 5, 1.0)), 3.0);
}

TEST(LossRgb, DimMismatchRejected) {
    EXPECT_THROW(loss_rgb(uniform_image(4, 4, 0.0), uniform_image(4, 5, 0.0)),
                 ContractError);
}

TEST(LossRgb, GradientIsScaledResidual) {
    Rng rng(47);
    Tensor rendered = test::random_tensor({12, 3}, rng, 0.0, 1.0);
    Image reference(3, 4, test::random_tensor({12, 3}, rng, 0.0, 1.0));

    Graph g;
    Val r = g.input(rendered, true);
    g.backward(loss_rgb_graph(g, r, reference));
    const Tensor grad = g.grad_of(r);
    for (std::size_t i = 0; i < grad.numel(); ++i)
        EXPECT_NEAR(grad[i], 2.0 * (rendered[i] - reference.rgb[i]) / 12.0, 1e-12);
}

TEST(TotalLoss, SumsComponents) {
    const auto parts = loss_breakdown(1.0, 2.0, 3.0);
    EXPECT_EQ(parts.total, 6.0);
    EXPECT_EQ(total_loss(parts), 6.0);
    EXPECT_EQ(total_loss(loss_breakdown(0.0, 0.0, 0.0)), 0.0);

    // Disabling the rgb term leaves the geometric parts.
    const auto ablated = loss_breakdown(1.5, 0.25, 0.0);
    EXPECT_EQ(ablated.total, 1.75);
    EXPECT_EQ(ablated.total, ablated.geo + ablated.cham + ablated.rgb);
}

TEST(TotalLoss, GradientIsSumOfComponentGradients) {
    Rng rng(48);
    const PointCloud a = random_cloud(6, rng);
    const PointCloud b = random_cloud(6, rng);
    const Tensor eps = test::random_tensor({6, 3}, rng);

    auto grad_of = [&](auto&& build) {
        Graph g;
        Val x = g.input(a.positions, true);
        g.backward(build(g, x));
        return g.grad_of(x);
    };
    const Tensor g_cham = grad_of([&](Graph& g, Val x) {
        return loss_chamfer_graph(g, x, g.constant(b.positions));
    });
    const Tensor g_geo = grad_of([&](Graph& g, Val x) {
        return loss_geo_graph(x, g.constant(eps));
    });
    const Tensor g_total = grad_of([&](Graph& g, Val x) {
        return g.add(loss_chamfer_graph(g, x, g.constant(b.positions)),
                     loss_geo_graph(x, g.constant(eps)));
    });
    for (std::size_t i = 0; i < g_total.numel(); ++i)
        EXPECT_NEAR(g_total[i], g_cham[i] + g_geo[i], 1e-12);
}

TEST(MetricCd, EqualsChamferDefinition) {
    Rng rng(49);
    const PointCloud a = random_cloud(20, rng);
    const PointCloud b = random_cloud(20, rng);
    EXPECT_EQ(metric_cd(a, b), loss_chamfer(a, b));
    EXPECT_EQ(metric_cd(a, a.clone()), 0.0);
}

TEST(MetricEmd, PermutedCloudScoresZero) {
    Rng rng(50);
    const PointCloud a = random_cloud(15, rng);
    Tensor shuffled({15, 3});
    std::vector<int> perm{14, 3, 7, 0, 11, 5, 9, 1, 13, 2, 8, 4, 12, 6, 10};
    for (int i = 0; i < 15; ++i)
        for (int c = 0; c < 3; ++c)
            shuffled.at(i, c) = a.positions.at(perm[static_cast<std::size_t>(i)], c);
    EXPECT_EQ(metric_emd(a, PointCloud(shuffled)), 0.0);
}

TEST(MetricEmd, SingletonDistance) {
    const PointCloud a(Tensor::from_data({1, 3}, {1.0, 2.0, 2.0}));
    const PointCloud b(Tensor::from_data({1, 3}, {1.0, 5.0, 6.0}));  // distance 5
    EXPECT_DOUBLE_EQ(metric_emd(a, b), 5.0);
}

TEST(MetricEmd, SymmetricAndNonNegative) {
    Rng rng(51);
    const PointCloud a = random_cloud(24, rng);
    const PointCloud b = random_cloud(24, rng);
    const double ab = metric_emd(a, b);
    const double ba = metric_emd(b, a);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(ab, ba, 1e-9);
}

TEST(MetricEmd, InvariantUnderRigidMotion) {
    Rng rng(52);
    const PointCloud a = random_cloud(20, rng);
    const PointCloud b = random_cloud(20, rng);
    const double base = metric_emd(a, b);

    // Rotate about z by a fixed angle, then translate.
    const double th = 0.83;
    const double cs = std::cos(th), sn = std::sin(th);
    auto moved = [&](const PointCloud& src) {
        Tensor out({src.size(), 3});
        for (int i = 0; i < src.size(); ++i) {
            const double x = src.positions.at(i, 0);
            const double y = src.positions.at(i, 1);
            out.at(i, 0) = cs * x - sn * y + 0.7;
            out.at(i, 1) = sn * x + cs * y - 1.2;
            out.at(i, 2) = src.positions.at(i, 2) + 0.4;
        }
        return PointCloud(std::move(out));
    };
    EXPECT_NEAR(metric_emd(moved(a), moved(b)), base, 1e-9);
}

TEST(MetricEmd, AuctionTracksHungarianOracle) {
    Rng rng(53);
    for (int trial = 0; trial < 10; ++trial) {
        const PointCloud a = random_cloud(8, rng);
        const PointCloud b = random_cloud(8, rng);
        const double exact = emd_hungarian(a, b);
        const double approx = emd_auction(a, b);
        EXPECT_GE(approx, exact - 1e-12);
        EXPECT_LE(approx, exact * 1.01);
    }
    // A larger instance stays close as well.
    const PointCloud a = random_cloud(60, rng);
    const PointCloud b = random_cloud(60, rng);
    EXPECT_LE(emd_auction(a, b), emd_hungarian(a, b) * 1.01);
}

TEST(MetricEmd, UnequalCountsRejected) {
    Rng rng(54);
    EXPECT_THROW(metric_emd(random_cloud(5, rng), random_cloud(6, rng)), ContractError);
}
