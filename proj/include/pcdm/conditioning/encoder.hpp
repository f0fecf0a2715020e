#pragma once

#include <array>
#include <string>
#include <vector>

#include "pcdm/conditioning/modulation.hpp"
#include "pcdm/core/graph.hpp"
#include "pcdm/core/param_store.hpp"
#include "pcdm/core/rng.hpp"
#include "pcdm/image.hpp"

namespace pcdm {

struct EncoderConfig {
    int image_size = 64;
    std::array<int, 4> channels{16, 32, 64, 128};
    int code_dim = 128;
    double leaky_slope = 0.01;
};

/// Latent description of the reference image: one code for geometry, one for
/// appearance.
struct LatentCodes {
    Tensor shape_code;  // 1 x D_s
    Tensor color_code;  // 1 x D_c
};

struct LatentCodeVals {
    Val shape_code;
    Val color_code;
};

namespace detail {

/// Row indices that lift a (h*w) x c feature map into 3x3 stride-2 patches.
/// Index h*w refers to the appended zero row and stands in for padding.
inline std::vector<int> conv_offsets(int h, int w, int ky, int kx) {
    const int ho = h / 2, wo = w / 2;
    std::vector<int> idx(static_cast<std::size_t>(ho) * wo);
    std::size_t at = 0;
    for (int oy = 0; oy < ho; ++oy) {
        const int iy = 2 * oy + ky - 1;
        for (int ox = 0; ox < wo; ++ox) {
            const int ix = 2 * ox + kx - 1;
            idx[at++] = (iy < 0 || iy >= h || ix < 0 || ix >= w) ? h * w : iy * w + ix;
        }
    }
    return idx;
}

/// 3x3 convolution with stride 2 and unit zero padding, expressed as gathers
/// plus one matmul. Feature maps are (h*w) x channels; h and w must be even.
inline Val conv3x3_s2(Graph& g, Val x, int h, int w, Val weight, Val bias,
                      double slope) {
    const int c_in = x.cols();
    if (x.rows() != h * w || h % 2 != 0 || w % 2 != 0)
        throw ContractError("conv3x3_s2: feature map " + shape_str(x.shape()) +
                            " does not cover even " + std::to_string(h) + "x" +
                            std::to_string(w));
    Val padded = g.concat_rows({x, g.constant(Tensor({1, c_in}))});
    std::vector<Val> patches;
    patches.reserve(9);
    for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
            patches.push_back(g.gather_rows(padded, conv_offsets(h, w, ky, kx)));
    Val cols = g.concat_cols(patches);
    return g.leaky_relu(linear(cols, weight, bias), slope);
}

inline std::string block_name(int i) { return "enc.conv" + std::to_string(i + 1); }

}  // namespace detail

inline void add_encoder_params(ParamStore& store, const EncoderConfig& cfg, Rng& rng) {
    int c_in = 3;
    for (int i = 0; i < 4; ++i) {
        const int c_out = cfg.channels[static_cast<std::size_t>(i)];
        store.add_uniform(detail::block_name(i) + ".w", {9 * c_in, c_out}, 9 * c_in, rng);
        store.add_zeros(detail::block_name(i) + ".b", {1, c_out});
        c_in = c_out;
    }
    store.add_uniform("enc.shape_head.w", {c_in, cfg.code_dim}, c_in, rng);
    store.add_zeros("enc.shape_head.b", {1, cfg.code_dim});
    store.add_uniform("enc.color_head.w", {c_in, cfg.code_dim}, c_in, rng);
    store.add_zeros("enc.color_head.b", {1, cfg.code_dim});
}

/// Shared convolutional trunk with two linear heads; fully on the tape so the
/// rendering losses reach the encoder weights.
inline LatentCodeVals encode_image_graph(Graph& g, ParamStore& store, const Image& img,
                                         const EncoderConfig& cfg) {
    if (img.height != cfg.image_size || img.width != cfg.image_size)
        throw ContractError("encoder expects " + std::to_string(cfg.image_size) + "x" +
                            std::to_string(cfg.image_size) + " input, got " +
                            std::to_string(img.height) + "x" + std::to_string(img.width));
    Val x = g.constant(img.rgb);
    int side = cfg.image_size;
    for (int i = 0; i < 4; ++i) {
        x = detail::conv3x3_s2(g, x, side, side,
                               g.param(store, detail::block_name(i) + ".w"),
                               g.param(store, detail::block_name(i) + ".b"),
                               cfg.leaky_slope);
        side /= 2;
    }
    // Global average pool as a fixed 1 x (side*side) averaging matmul.
    const int cells = side * side;
    Val pooled = g.matmul(g.constant(Tensor::full({1, cells}, 1.0 / cells)), x);
    return {linear(pooled, g.param(store, "enc.shape_head.w"),
                   g.param(store, "enc.shape_head.b")),
            linear(pooled, g.param(store, "enc.color_head.w"),
                   g.param(store, "enc.color_head.b"))};
}

inline LatentCodes encode_image(const Image& img, ParamStore& store,
                                const EncoderConfig& cfg) {
    Graph g;
    const auto codes = encode_image_graph(g, store, img, cfg);
    return {codes.shape_code.value().clone(), codes.color_code.value().clone()};
}

}  // namespace pcdm
