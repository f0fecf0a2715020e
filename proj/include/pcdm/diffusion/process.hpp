#pragma once

#include <cmath>
#include <cstdint>

#include "pcdm/core/graph.hpp"
#include "pcdm/core/rng.hpp"
#include "pcdm/diffusion/schedule.hpp"
#include "pcdm/point_cloud.hpp"

namespace pcdm {

/// Standard-normal n x 3 draw tagged with the PRNG state it came from, so a
/// sample can be reproduced exactly.
struct NoiseSample {
    Tensor values;  // n x 3
    std::uint64_t rng_key = 0;
    std::uint64_t rng_counter = 0;

    static NoiseSample draw(int n_points, Rng& rng) {
        NoiseSample s;
        s.rng_key = rng.key();
        s.rng_counter = rng.counter();
        s.values = Tensor({n_points, 3});
        for (std::size_t i = 0; i < s.values.numel(); ++i) s.values[i] = rng.normal();
        return s;
    }

    static NoiseSample zeros(int n_points) {
        NoiseSample s;
        s.values = Tensor({n_points, 3});
        return s;
    }
};

namespace detail {
inline void check_points_match(const Tensor& a, const Tensor& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != 3 || b.cols() != 3)
        throw ContractError(std::string(what) + ": " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
}
}  // namespace detail

/// One forward noising step: x_t = sqrt(1-beta_t) x_{t-1} + sqrt(beta_t) n.
/// Only geometry diffuses; colors are dropped.
inline PointCloud forward_step(const PointCloud& x_prev, int t,
                               const DiffusionSchedule& sched,
                               const NoiseSample& noise) {
    sched.check_step(t);
    detail::check_points_match(x_prev.positions, noise.values, "forward_step");
    const double keep = std::sqrt(1.0 - sched.beta(t));
    const double add = std::sqrt(sched.beta(t));
    Tensor out(x_prev.positions.shape());
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = keep * x_prev.positions[i] + add * noise.values[i];
    return PointCloud(std::move(out));
}

/// Closed-form marginal: x_t = sqrt(alpha_bar_t) x_0 + sqrt(1-alpha_bar_t) n.
inline PointCloud forward_marginal(const PointCloud& x0, int t,
                                   const DiffusionSchedule& sched,
                                   const NoiseSample& noise) {
    sched.check_step(t);
    detail::check_points_match(x0.positions, noise.values, "forward_marginal");
    const double keep = std::sqrt(sched.alpha_bar(t));
    const double add = std::sqrt(1.0 - sched.alpha_bar(t));
    Tensor out(x0.positions.shape());
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = keep * x0.positions[i] + add * noise.values[i];
    return PointCloud(std::move(out));
}

/// Algebraic recovery of the clean cloud from a noisy cloud and a noise
/// estimate.
inline PointCloud estimate_x0(const PointCloud& x_t, const Tensor& predicted_noise,
                              int t, const DiffusionSchedule& sched) {
    sched.check_step(t);
    detail::check_points_match(x_t.positions, predicted_noise, "estimate_x0");
    const auto s = sched.x0_scales(t);
    Tensor out(x_t.positions.shape());
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = s.inv_sqrt_alpha_bar * x_t.positions[i] -
                 s.noise_coef * predicted_noise[i];
    return PointCloud(std::move(out));
}

/// Tape-recorded version of estimate_x0 for the training losses.
inline Val estimate_x0_graph(Val x_t, Val predicted_noise, int t,
                             const DiffusionSchedule& sched) {
    sched.check_step(t);
    Graph& g = *x_t.g;
    const auto s = sched.x0_scales(t);
    return g.sub(g.mul_scalar(x_t, s.inv_sqrt_alpha_bar),
                 g.mul_scalar(predicted_noise, s.noise_coef));
}

/// One ancestral sampling step of the reverse chain, variance beta_t. The
/// injected noise z is suppressed at t = 1, making the final step
/// deterministic.
inline PointCloud reverse_step(const PointCloud& x_t, const Tensor& predicted_noise,
                               int t, const DiffusionSchedule& sched,
                               const NoiseSample& z) {
    sched.check_step(t);
    detail::check_points_match(x_t.positions, predicted_noise, "reverse_step");
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(t));
    const double noise_coef = sched.beta(t) / std::sqrt(1.0 - sched.alpha_bar(t));
    const double sigma = t == 1 ? 0.0 : std::sqrt(sched.beta(t));
    if (t > 1) detail::check_points_match(x_t.positions, z.values, "reverse_step");
    Tensor out(x_t.positions.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double mean =
            inv_sqrt_alpha * (x_t.positions[i] - noise_coef * predicted_noise[i]);
        out[i] = sigma == 0.0 ? mean : mean + sigma * z.values[i];
    }
    return PointCloud(std::move(out));
}

}  // namespace pcdm
