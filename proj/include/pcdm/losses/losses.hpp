#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "pcdm/core/graph.hpp"
#include "pcdm/image.hpp"
#include "pcdm/point_cloud.hpp"

namespace pcdm {

/// Per-term training losses for one sample, with their sum.
struct LossBreakdown {
    double geo = 0.0;
    double cham = 0.0;
    double rgb = 0.0;
    double total = 0.0;
};

inline LossBreakdown loss_breakdown(double geo, double cham, double rgb) {
    return {geo, cham, rgb, geo + cham + rgb};
}

/// Per-term weights; a zero switches the term off entirely.
struct LossWeights {
    double geo = 1.0;
    double cham = 1.0;
    double rgb = 1.0;
};

/// Mean squared error between true and predicted noise, averaged over every
/// entry.
inline double loss_geo(const Tensor& true_noise, const Tensor& predicted) {
    require_same_shape(true_noise, predicted, "loss_geo");
    double acc = 0.0;
    for (std::size_t i = 0; i < true_noise.numel(); ++i) {
        const double d = true_noise[i] - predicted[i];
        acc += d * d;
    }
    return acc / static_cast<double>(true_noise.numel());
}

inline Val loss_geo_graph(Val true_noise, Val predicted) {
    return mse(true_noise, predicted);
}

namespace detail {
inline std::vector<int> nearest_indices(const Tensor& from, const Tensor& to) {
    std::vector<int> idx(static_cast<std::size_t>(from.rows()));
    for (int i = 0; i < from.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int j = 0; j < to.rows(); ++j) {
            double d = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double diff = from.at(i, c) - to.at(j, c);
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        idx[static_cast<std::size_t>(i)] = arg;
    }
    return idx;
}

inline double directed_chamfer(const Tensor& from, const Tensor& to) {
    double acc = 0.0;
    const auto idx = nearest_indices(from, to);
    for (int i = 0; i < from.rows(); ++i) {
        const int j = idx[static_cast<std::size_t>(i)];
        for (int c = 0; c < 3; ++c) {
            const double diff = from.at(i, c) - to.at(j, c);
            acc += diff * diff;
        }
    }
    return acc / from.rows();
}
}  // namespace detail

/// Chamfer: squared nearest-neighbor distances, mean per direction, directions
/// summed.
inline double loss_chamfer(const PointCloud& a, const PointCloud& b) {
    return detail::directed_chamfer(a.positions, b.positions) +
           detail::directed_chamfer(b.positions, a.positions);
}

/// Tape version; nearest-neighbor matches are frozen from current values.
inline Val loss_chamfer_graph(Graph& g, Val a, Val b) {
    if (a.cols() != 3 || b.cols() != 3)
        throw ContractError("chamfer expects n x 3 clouds, got " +
                            shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const auto a_to_b = detail::nearest_indices(a.value(), b.value());
    const auto b_to_a = detail::nearest_indices(b.value(), a.value());
    Val da = g.sub(a, g.gather_rows(b, a_to_b));
    Val db = g.sub(b, g.gather_rows(a, b_to_a));
    // mean over rows of the squared row-norms = sum of squares / n.
    Val term_a = g.mul_scalar(g.sum(g.square(da)), 1.0 / a.rows());
    Val term_b = g.mul_scalar(g.sum(g.square(db)), 1.0 / b.rows());
    return g.add(term_a, term_b);
}

/// Squared image distance normalized by pixel count (channels summed, so
/// all-black vs all-white scores 3).
inline double loss_rgb(const Image& rendered, const Image& reference) {
    if (rendered.height != reference.height || rendered.width != reference.width)
        throw ContractError("image dims differ: " + std::to_string(rendered.height) +
                            "x" + std::to_string(rendered.width) + " vs " +
                            std::to_string(reference.height) + "x" +
                            std::to_string(reference.width));
    double acc = 0.0;
    for (std::size_t i = 0; i < rendered.rgb.numel(); ++i) {
        const double d = rendered.rgb[i] - reference.rgb[i];
        acc += d * d;
    }
    return acc / rendered.pixels();
}

/// Tape version over the renderer's (h*w) x 3 pixel block.
inline Val loss_rgb_graph(Graph& g, Val rendered, const Image& reference) {
    if (rendered.rows() != reference.pixels() || rendered.cols() != 3)
        throw ContractError("rendered block " + shape_str(rendered.shape()) +
                            " does not match " + std::to_string(reference.height) + "x" +
                            std::to_string(reference.width) + " reference");
    Val diff = g.sub(rendered, g.constant(reference.rgb));
    return g.mul_scalar(g.sum(g.square(diff)), 1.0 / reference.pixels());
}

inline double total_loss(const LossBreakdown& parts) {
    return parts.geo + parts.cham + parts.rgb;
}

/// Chamfer distance as reported by evaluation; the x1000 presentation scale
/// is applied only when results are printed.
inline double metric_cd(const PointCloud& a, const PointCloud& b) {
    return loss_chamfer(a, b);
}

}  // namespace pcdm
