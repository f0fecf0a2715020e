#pragma once

#include <algorithm>
#include <string>

#include "pcdm/conditioning/modulation.hpp"
#include "pcdm/conditioning/time_embed.hpp"
#include "pcdm/core/graph.hpp"
#include "pcdm/core/param_store.hpp"
#include "pcdm/core/rng.hpp"
#include "pcdm/point_cloud.hpp"

namespace pcdm {

/// Per-point noise predictor: coordinates through a shared MLP whose hidden
/// layers are gate-bias modulated by concat(shape code, time fragment).
struct ShapeNetConfig {
    int width = 128;
    int layers = 3;
    int code_dim = 128;
    int n_freq = 6;
    double leaky_slope = 0.01;
    // Lower bound on the embedding's noise_scale when the head output is
    // divided by it; bounds both the amplification and the gradient blow-up
    // at the smallest timesteps.
    double scale_floor = 0.05;

    int cond_dim() const { return code_dim + 1 + 2 * n_freq; }
};

/// Per-point color head; same trunk shape, conditioned on the color code
/// alone, sigmoid output.
struct ColorNetConfig {
    int width = 128;
    int layers = 3;
    int code_dim = 128;
    double leaky_slope = 0.01;

    int cond_dim() const { return code_dim; }
};

namespace detail {

inline void add_point_mlp_params(ParamStore& store, const std::string& prefix,
                                 int width, int layers, int cond_dim, Rng& rng) {
    store.add_uniform(prefix + ".in.w", {3, width}, 3, rng);
    store.add_zeros(prefix + ".in.b", {1, width});
    for (int i = 1; i <= layers; ++i) {
        const std::string hid = prefix + ".hid" + std::to_string(i);
        store.add_uniform(hid + ".w", {width, width}, width, rng);
        store.add_zeros(hid + ".b", {1, width});
        add_modulation_params(store, prefix + ".mod" + std::to_string(i), cond_dim,
                              width, rng);
    }
    // Zero head: before training the net predicts zero noise, keeping early
    // reverse passes close to the identity denoiser.
    store.add_zeros(prefix + ".out.w", {width, 3});
    store.add_zeros(prefix + ".out.b", {1, 3});
}

inline Val point_mlp(Graph& g, ParamStore& store, const std::string& prefix, Val points,
                     Val cond, int layers, double slope) {
    if (points.cols() != 3)
        throw ContractError(prefix + " expects n x 3 points, got " +
                            shape_str(points.shape()));
    Val h = linear(points, g.param(store, prefix + ".in.w"),
                   g.param(store, prefix + ".in.b"));
    for (int i = 1; i <= layers; ++i) {
        const std::string idx = std::to_string(i);
        h = linear(h, g.param(store, prefix + ".hid" + idx + ".w"),
                   g.param(store, prefix + ".hid" + idx + ".b"));
        h = gate_bias_modulate(g, store, prefix + ".mod" + idx, h, cond,
                               Activation::LeakyRelu, slope);
    }
    return linear(h, g.param(store, prefix + ".out.w"),
                  g.param(store, prefix + ".out.b"));
}

}  // namespace detail

inline void add_shape_net_params(ParamStore& store, const ShapeNetConfig& cfg, Rng& rng) {
    detail::add_point_mlp_params(store, "shape", cfg.width, cfg.layers, cfg.cond_dim(),
                                 rng);
}

inline void add_color_net_params(ParamStore& store, const ColorNetConfig& cfg, Rng& rng) {
    detail::add_point_mlp_params(store, "color", cfg.width, cfg.layers, cfg.cond_dim(),
                                 rng);
}

inline Val predict_noise_graph(Graph& g, ParamStore& store, Val points, Val shape_code,
                               const TimeEmbedding& emb, const ShapeNetConfig& cfg) {
    if (shape_code.cols() != cfg.code_dim)
        throw ContractError("shape code dim " + std::to_string(shape_code.cols()) +
                            " != " + std::to_string(cfg.code_dim));
    Val cond = condition_vector(g, shape_code, emb);
    Val raw = detail::point_mlp(g, store, "shape", points, cond, cfg.layers,
                                cfg.leaky_slope);
    // The trunk fits the smooth "offset from the clean cloud" field; dividing
    // by the corruption level supplies the sharpening the sampler needs at
    // small timesteps, where the noise estimate is offset / noise_scale.
    const double amp = 1.0 / std::max(emb.noise_scale, cfg.scale_floor);
    return amp == 1.0 ? raw : g.mul_scalar(raw, amp);
}

inline Val predict_colors_graph(Graph& g, ParamStore& store, Val points, Val color_code,
                                const ColorNetConfig& cfg) {
    if (color_code.cols() != cfg.code_dim)
        throw ContractError("color code dim " + std::to_string(color_code.cols()) +
                            " != " + std::to_string(cfg.code_dim));
    return g.sigmoid(detail::point_mlp(g, store, "color", points, color_code,
                                       cfg.layers, cfg.leaky_slope));
}

inline Tensor predict_noise(const PointCloud& x_t, const TimeEmbedding& emb,
                            const Tensor& shape_code, ParamStore& store,
                            const ShapeNetConfig& cfg) {
    Graph g;
    Val out = predict_noise_graph(g, store, g.constant(x_t.positions),
                                  g.constant(shape_code), emb, cfg);
    return out.value().clone();
}

inline Tensor predict_colors(const PointCloud& x0_est, const Tensor& color_code,
                             ParamStore& store, const ColorNetConfig& cfg) {
    Graph g;
    Val out = predict_colors_graph(g, store, g.constant(x0_est.positions),
                                   g.constant(color_code), cfg);
    return out.value().clone();
}

}  // namespace pcdm
