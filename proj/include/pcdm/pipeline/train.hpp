#pragma once

// Training loop. Every step: draw a batch, noise each cloud at a uniform
// timestep, run encoder + noise predictor on a fresh tape per element, add
// the chamfer term on the recovered cloud and (on render steps) the rgb term
// on a differentiable render, then take one averaged Adam step.

#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "pcdm/conditioning/time_embed.hpp"
#include "pcdm/diffusion/process.hpp"
#include "pcdm/losses/losses.hpp"
#include "pcdm/pipeline/dataset.hpp"
#include "pcdm/pipeline/model.hpp"
#include "pcdm/renderer/renderer.hpp"

namespace pcdm {

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<LossBreakdown> trace;  // one entry per step
};

namespace detail {

/// Shuffled order of dataset indices for one epoch, a pure function of
/// (seed, epoch) so resumed runs see the same order without extra state.
inline std::vector<int> epoch_permutation(std::uint64_t seed, std::uint64_t epoch, int n) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed, 0xEB0C5EEDULL + epoch);
    for (int i = n - 1; i > 0; --i) {
        const auto j = rng.uniform_int(static_cast<std::uint64_t>(i) + 1);
        std::swap(perm[static_cast<std::size_t>(i)], perm[j]);
    }
    return perm;
}

inline void accumulate_grads(GradMap& into, const GradMap& grads, double weight) {
    for (const auto& [name, g] : grads) {
        auto it = into.find(name);
        if (it == into.end()) it = into.emplace(name, Tensor(g.shape())).first;
        for (std::size_t i = 0; i < g.numel(); ++i) it->second[i] += weight * g[i];
    }
}

/// Cosine decay from lr down to lr_final over the step budget; lr_final < 0
/// keeps the rate constant. Pure in (cfg, step), so resumed runs continue on
/// the same curve via the persisted step counter.
inline double scheduled_lr(const TrainConfig& cfg, std::uint64_t step) {
    if (cfg.lr_final < 0.0 || cfg.steps <= 1) return cfg.lr;
    const double progress =
        std::min(1.0, static_cast<double>(step) / static_cast<double>(cfg.steps - 1));
    return cfg.lr_final +
           0.5 * (cfg.lr - cfg.lr_final) * (1.0 + std::cos(progress * std::numbers::pi));
}

}  // namespace detail

/// One optimization step over a full batch. Returns batch-averaged losses.
inline LossBreakdown train_step(ModelState& st, const TrainConfig& cfg,
                                const std::vector<NamedSample>& data) {
    if (data.empty()) throw ContractError("train_step: empty dataset");
    const int n_data = static_cast<int>(data.size());
    const int total_t = st.sched.steps();
    const bool render_step = !cfg.disable_rgb && st.step % cfg.render_stride == 0;
    // Rendering is the expensive term, so render steps shade one rotating
    // batch element rather than all of them.
    const int render_elem =
        render_step ? static_cast<int>((st.step / cfg.render_stride) % cfg.batch_size) : -1;

    GradMap grads;
    LossBreakdown avg{0.0, 0.0, 0.0, 0.0};
    const double inv_b = 1.0 / cfg.batch_size;

    for (int j = 0; j < cfg.batch_size; ++j) {
        const std::uint64_t global = st.step * static_cast<std::uint64_t>(cfg.batch_size) +
                                     static_cast<std::uint64_t>(j);
        const auto perm = detail::epoch_permutation(
            cfg.seed, global / static_cast<std::uint64_t>(n_data), n_data);
        const NamedSample& item =
            data[static_cast<std::size_t>(perm[global % static_cast<std::uint64_t>(n_data)])];
        const Sample& sample = item.sample;

        const int t = static_cast<int>(st.rng_data.uniform_int(
                          static_cast<std::uint64_t>(total_t))) + 1;
        NoiseSample eps = NoiseSample::draw(sample.cloud.size(), st.rng_noise);
        // Half the draws corrupt above schedule level, with the regression
        // target scaled to match. The reverse chain lags the forward marginal
        // at small t, so the predictor also has to be accurate on states
        // noisier than the schedule says; plain schedule-level draws never
        // visit those.
        if (cfg.noise_aug > 0.0) {
            const double gate = st.rng_data.uniform();
            const double extra = st.rng_data.uniform();
            if (gate < 0.5) {
                const double scale = 1.0 + cfg.noise_aug * extra;
                for (std::size_t i = 0; i < eps.values.numel(); ++i) eps.values[i] *= scale;
            }
        }
        const PointCloud x_t = forward_marginal(sample.cloud, t, st.sched, eps);

        Graph g;
        const LatentCodeVals codes = encode_image_graph(g, st.params, sample.image, st.encoder);
        const Val x_t_val = g.constant(x_t.positions);
        const Val eps_hat = predict_noise_graph(g, st.params, x_t_val, codes.shape_code,
                                                time_embed(t, total_t, st.shape_net.n_freq,
                                                           st.sched),
                                                st.shape_net);
        const Val l_geo = loss_geo_graph(g.constant(eps.values), eps_hat);
        const Val x0_est = estimate_x0_graph(x_t_val, eps_hat, t, st.sched);
        const Val l_cham = loss_chamfer_graph(g, x0_est, g.constant(sample.cloud.positions));
        Val total = g.add(g.mul_scalar(l_geo, cfg.weights.geo),
                          g.mul_scalar(l_cham, cfg.weights.cham));

        double rgb_item = 0.0;
        if (j == render_elem) {
            const Val colors = predict_colors_graph(g, st.params, x0_est, codes.color_code,
                                                    st.color_net);
            Camera cam = sample.camera;
            cam.height = cam.width = cfg.render_resolution;
            RenderConfig rc;
            rc.samples_per_ray = cfg.render_samples;
            rc.k_neighbors = cfg.k_neighbors;
            rc.mask_radius = cfg.mask_radius;
            const Val rendered = render_graph(g, x0_est, colors, cam, rc);
            const int factor = sample.image.height / cfg.render_resolution;
            const Image reference = factor == 1 ? sample.image : downsample(sample.image, factor);
            const Val l_rgb = loss_rgb_graph(g, rendered, reference);
            total = g.add(total, g.mul_scalar(l_rgb, cfg.weights.rgb));
            rgb_item = l_rgb.item();
        }

        const double total_item = total.item();
        if (!std::isfinite(total_item) || !std::isfinite(l_geo.item()) ||
            !std::isfinite(l_cham.item()) || !std::isfinite(rgb_item))
            throw DomainError(
                "train step " + std::to_string(st.step) + " diverged on sample \"" +
                item.name + "\": t=" + std::to_string(t) +
                " noise_key=" + std::to_string(eps.rng_key) +
                " noise_counter=" + std::to_string(eps.rng_counter) +
                " geo=" + std::to_string(l_geo.item()) +
                " cham=" + std::to_string(l_cham.item()) +
                " rgb=" + std::to_string(rgb_item));

        detail::accumulate_grads(grads, backward(total, st.params), inv_b);
        avg.geo += l_geo.item() * inv_b;
        avg.cham += l_cham.item() * inv_b;
        avg.rgb += rgb_item * inv_b;
        avg.total += total_item * inv_b;
    }

    // Parameters outside this step's graphs (the color net on non-render
    // steps) get explicit zero gradients so Adam sees every parameter.
    for (const auto& [name, p] : st.params)
        if (!grads.count(name)) grads.emplace(name, Tensor(p.shape()));

    AdamConfig acfg;
    acfg.lr = detail::scheduled_lr(cfg, st.step);
    adam_step(st.params, grads, acfg, st.opt);
    st.step += 1;
    return avg;
}

/// Run `st` forward to cfg.steps, checkpointing along the way. Appends one
/// trace entry per executed step.
inline TrainResult train_from(ModelState& st, const TrainConfig& cfg,
                              const std::vector<NamedSample>& data,
                              std::ostream* log = nullptr) {
    cfg.validate();
    if (data.empty()) throw ContractError("train: empty dataset");
    for (const auto& item : data)
        if (item.sample.image.height != cfg.encoder.image_size ||
            item.sample.image.width != cfg.encoder.image_size)
            throw ContractError("train: sample \"" + item.name + "\" image is " +
                                std::to_string(item.sample.image.height) + "x" +
                                std::to_string(item.sample.image.width) + ", config wants " +
                                std::to_string(cfg.encoder.image_size));

    TrainResult result;
    const auto start = std::chrono::steady_clock::now();
    while (st.step < static_cast<std::uint64_t>(cfg.steps)) {
        const LossBreakdown losses = train_step(st, cfg, data);
        result.trace.push_back(losses);

        const bool last = st.step == static_cast<std::uint64_t>(cfg.steps);
        if (log && (cfg.log_every > 0 && (st.step % static_cast<std::uint64_t>(cfg.log_every) == 0 || last))) {
            const double secs = std::chrono::duration<double>(
                                    std::chrono::steady_clock::now() - start)
                                    .count();
            (*log) << "step " << st.step << " total " << losses.total << " geo "
                   << losses.geo << " cham " << losses.cham << " rgb " << losses.rgb
                   << " wall_s " << secs << "\n";
        }
        if (!cfg.out_path.empty() && cfg.checkpoint_every > 0 && !last &&
            st.step % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0)
            save_checkpoint(cfg.out_path, to_checkpoint(st));
    }

    result.checkpoint = to_checkpoint(st);
    if (!cfg.out_path.empty()) save_checkpoint(cfg.out_path, result.checkpoint);
    return result;
}

inline TrainResult train(const TrainConfig& cfg, const std::vector<NamedSample>& data,
                         std::ostream* log = nullptr) {
    ModelState st = init_model(cfg);
    return train_from(st, cfg, data, log);
}

}  // namespace pcdm
