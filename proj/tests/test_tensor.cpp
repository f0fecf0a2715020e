#include <gtest/gtest.h>

#include <cmath>

#include "pcdm/core/adam.hpp"
#include "pcdm/core/graph.hpp"
#include "pcdm/core/rng.hpp"
#include "support/fd.hpp"

using namespace pcdm;
using pcdm::test::check_grad;
using pcdm::test::random_tensor;

namespace {

// Probe loss: sum(out .* R) with a fixed random probe so every output
// element contributes to the scalar.
Val probe_loss(Graph& g, Val out, const Tensor& probe) {
    return g.sum(g.mul(out, g.constant(probe.clone())));
}

}  // namespace

TEST(Tensor, ConstructionInvariants) {
    Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(t.numel(), 6u);
    EXPECT_EQ(t.rows(), 2);
    EXPECT_EQ(t.cols(), 3);
    EXPECT_THROW(Tensor::from_data({2}, {1, 2, 3}), ContractError);
    EXPECT_THROW(Tensor::from_data({1}, {std::nan("")}), DomainError);
    EXPECT_THROW(Tensor::from_data({1}, {INFINITY}), DomainError);
    EXPECT_THROW(Tensor({0, 2}), ContractError);
}

TEST(Tensor, ShapeMismatchNamesBothShapes) {
    Graph g;
    Val a = g.constant(Tensor({2, 3}));
    Val b = g.constant(Tensor({3, 2}));
    try {
        g.add(a, b);
        FAIL() << "expected ContractError";
    } catch (const ContractError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[3x2]"), std::string::npos) << msg;
    }
}

TEST(Tensor, DomainErrors) {
    Graph g;
    Val neg = g.constant(Tensor::from_data({1}, {-1.0}));
    EXPECT_THROW(g.log(neg), DomainError);
    EXPECT_THROW(g.sqrt(neg), DomainError);
    Val zero = g.constant(Tensor::from_data({1}, {0.0}));
    EXPECT_THROW(g.log(zero), DomainError);
}

TEST(Tensor, ForwardExamples) {
    Graph g;
    EXPECT_DOUBLE_EQ(g.sigmoid(g.constant(Tensor::scalar(0.0))).item(), 0.5);

    Val x = g.constant(Tensor::from_data({3}, {1, 2, 3}));
    EXPECT_DOUBLE_EQ(g.sum(g.square(x)).item(), 14.0);

    Val sm = g.softmax_rows(g.constant(Tensor::from_data({1, 2}, {0, 0})));
    EXPECT_DOUBLE_EQ(sm.value()[0], 0.5);
    EXPECT_DOUBLE_EQ(sm.value()[1], 0.5);
}

TEST(Tensor, BackwardExamples) {
    {
        Graph g;
        Val x = g.input(Tensor::from_data({2}, {1, 2}), true);
        Val loss = g.sum(g.square(x));
        g.backward(loss);
        Tensor d = g.grad_of(x);
        EXPECT_DOUBLE_EQ(d[0], 2.0);
        EXPECT_DOUBLE_EQ(d[1], 4.0);
    }
    {
        Graph g;
        Val x = g.input(Tensor::scalar(0.0), true);
        Val loss = g.sum(g.sigmoid(x));
        g.backward(loss);
        EXPECT_DOUBLE_EQ(g.grad_of(x)[0], 0.25);
    }
}

TEST(Tensor, BackwardRequiresScalarLoss) {
    Graph g;
    Val x = g.input(Tensor::from_data({2}, {1, 2}), true);
    Val y = g.square(x);
    EXPECT_THROW(g.backward(y), ContractError);
}

TEST(Tensor, UnreachedParamsGetZeroGradients) {
    ParamStore store;
    store.add("used", Tensor::from_data({2}, {1, 2}));
    store.add("unused", Tensor::from_data({3}, {1, 2, 3}));
    Graph g;
    Val p = g.param(store, "used");
    GradMap grads = backward(g.sum(g.square(p)), store);
    EXPECT_DOUBLE_EQ(grads.at("used")[1], 4.0);
    ASSERT_EQ(grads.at("unused").numel(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(grads.at("unused")[i], 0.0);
}

// Gradient of every differentiable op kind vs central finite differences at
// 20 random points each.
TEST(TensorGradients, ElementwiseOps) {
    Rng rng(71);
    struct Case {
        const char* name;
        std::function<Val(Graph&, Val)> op;
        double lo, hi;
    };
    const std::vector<Case> cases = {
        {"neg", [](Graph& g, Val x) { return g.neg(x); }, -2, 2},
        {"add_scalar", [](Graph& g, Val x) { return g.add_scalar(x, 0.7); }, -2, 2},
        {"mul_scalar", [](Graph& g, Val x) { return g.mul_scalar(x, -1.3); }, -2, 2},
        {"exp", [](Graph& g, Val x) { return g.exp(x); }, -2, 2},
        {"log", [](Graph& g, Val x) { return g.log(x); }, 0.2, 3},
        {"sigmoid", [](Graph& g, Val x) { return g.sigmoid(x); }, -4, 4},
        {"softplus", [](Graph& g, Val x) { return g.softplus(x); }, -4, 4},
        {"leaky_relu", [](Graph& g, Val x) { return g.leaky_relu(x); }, 0.05, 2},
        {"leaky_relu_neg", [](Graph& g, Val x) { return g.leaky_relu(x); }, -2, -0.05},
        {"sin", [](Graph& g, Val x) { return g.sin(x); }, -3, 3},
        {"cos", [](Graph& g, Val x) { return g.cos(x); }, -3, 3},
        {"square", [](Graph& g, Val x) { return g.square(x); }, -2, 2},
        {"sqrt", [](Graph& g, Val x) { return g.sqrt(x); }, 0.2, 3},
        {"reciprocal", [](Graph& g, Val x) { return g.reciprocal(x); }, 0.3, 3},
        {"clamp_min_above", [](Graph& g, Val x) { return g.clamp_min(x, 0.1); }, 0.3, 2},
        {"clamp_min_below", [](Graph& g, Val x) { return g.clamp_min(x, 0.1); }, -2, -0.3},
    };
    for (const auto& c : cases) {
        for (int rep = 0; rep < 20; ++rep) {
            Tensor x = random_tensor({2, 3}, rng, c.lo, c.hi);
            Tensor probe = random_tensor({2, 3}, rng);
            auto build = [&](Graph& g, std::vector<Val>& xs) {
                return probe_loss(g, c.op(g, xs[0]), probe);
            };
            auto rep_out = check_grad(build, {x});
            EXPECT_TRUE(rep_out.pass)
                << c.name << " rep " << rep << " max_rel " << rep_out.max_rel;
        }
    }
}

TEST(TensorGradients, BinaryAndMatrixOps) {
    Rng rng(72);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor a = random_tensor({3, 4}, rng);
        Tensor b = random_tensor({3, 4}, rng);
        Tensor probe = random_tensor({3, 4}, rng);
        for (auto op : {OpKind::Add, OpKind::Sub, OpKind::Mul}) {
            auto build = [&](Graph& g, std::vector<Val>& xs) {
                Val out = op == OpKind::Add   ? g.add(xs[0], xs[1])
                          : op == OpKind::Sub ? g.sub(xs[0], xs[1])
                                              : g.mul(xs[0], xs[1]);
                return probe_loss(g, out, probe);
            };
            EXPECT_TRUE(check_grad(build, {a, b}).pass);
        }

        Tensor m1 = random_tensor({2, 3}, rng);
        Tensor m2 = random_tensor({3, 4}, rng);
        Tensor probe2 = random_tensor({2, 4}, rng);
        auto build_mm = [&](Graph& g, std::vector<Val>& xs) {
            return probe_loss(g, g.matmul(xs[0], xs[1]), probe2);
        };
        EXPECT_TRUE(check_grad(build_mm, {m1, m2}).pass);
    }
}

TEST(TensorGradients, ReductionAndStructureOps) {
    Rng rng(73);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor a = random_tensor({3, 4}, rng);

        auto sum_build = [&](Graph& g, std::vector<Val>& xs) { return g.sum(xs[0]); };
        EXPECT_TRUE(check_grad(sum_build, {a}).pass);

        auto mean_build = [&](Graph& g, std::vector<Val>& xs) { return g.mean(xs[0]); };
        EXPECT_TRUE(check_grad(mean_build, {a}).pass);

        Tensor pr_rows = random_tensor({3, 1}, rng);
        auto sr_build = [&](Graph& g, std::vector<Val>& xs) {
            return probe_loss(g, g.sum_rows(xs[0]), pr_rows);
        };
        EXPECT_TRUE(check_grad(sr_build, {a}).pass);

        // keep rows away from the origin where the norm is non-smooth
        Tensor anorm = random_tensor({3, 4}, rng, 0.5, 2.0);
        auto l2_build = [&](Graph& g, std::vector<Val>& xs) {
            return probe_loss(g, g.l2_norm_rows(xs[0]), pr_rows);
        };
        EXPECT_TRUE(check_grad(l2_build, {anorm}).pass);

        Tensor pr = random_tensor({3, 4}, rng);
        auto sm_build = [&](Graph& g, std::vector<Val>& xs) {
            return probe_loss(g, g.softmax_rows(xs[0]), pr);
        };
        EXPECT_TRUE(check_grad(sm_build, {a}).pass);

        auto cs_build = [&](Graph& g, std::vector<Val>& xs) {
            return probe_loss(g, g.cumsum_rows_exclusive(xs[0]), pr);
        };
        EXPECT_TRUE(check_grad(cs_build, {a}).pass);

        Tensor b = random_tensor({2, 4}, rng);
        Tensor pr_cat = random_tensor({5, 4}, rng);
        auto cat_build = [&](Graph& g, std::vector<Val>& xs) {
            return probe_loss(g, g.concat_rows({xs[0], xs[1]}), pr_cat);
        };
        EXPECT_TRUE(check_grad(cat_build, {a, b}).pass);

        Tensor c = random_tensor({3, 2}, rng);
        Tensor pr_cc = random_tensor({3, 6}, rng);
        auto cc_build = [&](Graph& g, std::vector<Val>& xs) {
            return probe_loss(g, g.concat_cols({xs[0], xs[1]}), pr_cc);
        };
        EXPECT_TRUE(check_grad(cc_build, {a, c}).pass);

        const std::vector<int> idx = {2, 0, 0, 1};
        Tensor pr_g = random_tensor({4, 4}, rng);
        auto gather_build = [&](Graph& g, std::vector<Val>& xs) {
            return probe_loss(g, g.gather_rows(xs[0], idx), pr_g);
        };
        EXPECT_TRUE(check_grad(gather_build, {a}).pass);

        const std::vector<int> sidx = {4, 1, 0};
        Tensor pr_s = random_tensor({5, 4}, rng);
        auto scatter_build = [&](Graph& g, std::vector<Val>& xs) {
            return probe_loss(g, g.scatter_add_rows(xs[0], sidx, 5), pr_s);
        };
        EXPECT_TRUE(check_grad(scatter_build, {a}).pass);

        Tensor row = random_tensor({1, 4}, rng);
        auto br_build = [&](Graph& g, std::vector<Val>& xs) {
            return probe_loss(g, g.broadcast_rows(xs[0], 3), pr);
        };
        EXPECT_TRUE(check_grad(br_build, {row}).pass);

        Tensor col = random_tensor({3, 1}, rng);
        auto bc_build = [&](Graph& g, std::vector<Val>& xs) {
            return probe_loss(g, g.broadcast_cols(xs[0], 4), pr);
        };
        EXPECT_TRUE(check_grad(bc_build, {col}).pass);

        auto rs_build = [&](Graph& g, std::vector<Val>& xs) {
            return probe_loss(g, g.reshape(xs[0], {4, 3}), Tensor::uninit({4, 3}, pr.vec()));
        };
        EXPECT_TRUE(check_grad(rs_build, {a}).pass);
    }
}

TEST(TensorGradients, BackwardLinearity) {
    Rng rng(74);
    ParamStore store;
    store.add("w", random_tensor({3, 3}, rng));

    auto loss_a = [](Graph& g, Val w) { return g.sum(g.square(w)); };
    auto loss_b = [](Graph& g, Val w) { return g.mean(g.sigmoid(w)); };

    Graph g1;
    Val w1 = g1.param(store, "w");
    GradMap ga = backward(loss_a(g1, w1), store);
    Graph g2;
    Val w2 = g2.param(store, "w");
    GradMap gb = backward(loss_b(g2, w2), store);
    Graph g3;
    Val w3 = g3.param(store, "w");
    GradMap gsum = backward(g3.add(loss_a(g3, w3), loss_b(g3, w3)), store);

    for (std::size_t i = 0; i < 9; ++i)
        EXPECT_NEAR(gsum.at("w")[i], ga.at("w")[i] + gb.at("w")[i], 1e-12);
}

TEST(TensorGradients, RepeatedPassesBitwiseIdentical) {
    auto run = [] {
        Rng rng(99);
        ParamStore store;
        store.add("w", random_tensor({4, 4}, rng));
        Graph g;
        Val w = g.param(store, "w");
        Val x = g.constant(random_tensor({4, 4}, rng));
        Val loss = g.mean(g.square(g.sub(g.matmul(x, w), x)));
        GradMap grads = backward(loss, store);
        return std::make_pair(loss.item(), grads.at("w").vec());
    };
    auto [l1, d1] = run();
    auto [l2, d2] = run();
    EXPECT_EQ(l1, l2);
    EXPECT_EQ(d1, d2);
}

TEST(TensorGradients, ParamReusedTwiceAccumulates) {
    ParamStore store;
    store.add("w", Tensor::from_data({1}, {3.0}));
    Graph g;
    Val w1 = g.param(store, "w");
    Val w2 = g.param(store, "w");
    EXPECT_EQ(w1.id, w2.id);
    // loss = w^2 + 2w -> dloss/dw = 2w + 2 = 8
    Val loss = g.add(g.square(w1), g.mul_scalar(w2, 2.0));
    GradMap grads = backward(g.sum(loss), store);
    EXPECT_DOUBLE_EQ(grads.at("w")[0], 8.0);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
    ParamStore store;
    store.add("p", Tensor::from_data({2}, {1.5, -2.0}));
    AdamState st;
    GradMap grads = store.zero_grads();
    adam_step(store, grads, AdamConfig{}, st);
    EXPECT_DOUBLE_EQ(store.at("p")[0], 1.5);
    EXPECT_DOUBLE_EQ(store.at("p")[1], -2.0);
}

TEST(Adam, DescentDirectionOnSquare) {
    ParamStore store;
    store.add("x", Tensor::from_data({1}, {1.0}));
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 0.1;
    Graph g;
    Val x = g.param(store, "x");
    GradMap grads = backward(g.sum(g.square(x)), store);
    adam_step(store, grads, cfg, st);
    EXPECT_LT(store.at("x")[0], 1.0);
    EXPECT_GT(store.at("x")[0], 0.0);
}

TEST(Adam, MatchesScalarReferenceAndConverges) {
    // Independent scalar Adam on f(x) = (x-3)^2 starting from x = 0.
    AdamConfig cfg;
    cfg.lr = 0.1;
    double rx = 0.0, rm = 0.0, rv = 0.0;
    std::vector<double> ref;
    for (int t = 1; t <= 10; ++t) {
        const double gr = 2.0 * (rx - 3.0);
        rm = cfg.beta1 * rm + (1 - cfg.beta1) * gr;
        rv = cfg.beta2 * rv + (1 - cfg.beta2) * gr * gr;
        const double mhat = rm / (1 - std::pow(cfg.beta1, t));
        const double vhat = rv / (1 - std::pow(cfg.beta2, t));
        rx -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        ref.push_back(rx);
    }

    ParamStore store;
    store.add("x", Tensor::from_data({1}, {0.0}));
    AdamState st;
    double prev_err = 3.0;
    for (int t = 0; t < 10; ++t) {
        Graph g;
        Val x = g.param(store, "x");
        Val loss = g.sum(g.square(g.add_scalar(x, -3.0)));
        GradMap grads = backward(loss, store);
        adam_step(store, grads, cfg, st);
        EXPECT_NEAR(store.at("x")[0], ref[t], 1e-12);
        const double err = std::abs(store.at("x")[0] - 3.0);
        if (t >= 1) EXPECT_LT(err, prev_err);
        prev_err = err;
    }
}

TEST(Adam, MissingGradientKeyIsContractError) {
    ParamStore store;
    store.add("p", Tensor({2}));
    AdamState st;
    GradMap grads;  // empty
    EXPECT_THROW(adam_step(store, grads, AdamConfig{}, st), ContractError);
}

TEST(Rng, DeterministicStreamsAndStats) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());

    Rng s1 = Rng(42).stream(1);
    Rng s2 = Rng(42).stream(2);
    EXPECT_NE(s1.next_u64(), s2.next_u64());

    // restored counter resumes the sequence
    Rng c(7);
    c.normal();
    const auto key = c.key();
    const auto ctr = c.counter();
    const double next = c.normal();
    Rng d(key, ctr, true);
    EXPECT_EQ(d.normal(), next);

    Rng e(5);
    double sum = 0, sumsq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = e.normal();
        sum += x;
        sumsq += x * x;
    }
    EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(sumsq / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}
