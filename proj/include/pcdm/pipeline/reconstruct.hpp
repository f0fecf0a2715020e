#pragma once

// Ancestral sampler: start from Gaussian noise, run the learned reverse chain
// conditioned on the image's shape code, then color the final cloud.

#include <functional>
#include <vector>

#include "pcdm/conditioning/time_embed.hpp"
#include "pcdm/diffusion/process.hpp"
#include "pcdm/pipeline/model.hpp"

namespace pcdm {

struct ReconstructionTrace {
    std::vector<int> trace_steps;           // timestep after each recorded snapshot
    std::vector<PointCloud> intermediates;  // geometry-only snapshots
    PointCloud final_cloud;                 // carries predicted colors
};

/// Noise estimate for the current cloud at timestep t.
using NoisePredictor = std::function<Tensor(const PointCloud&, int)>;

/// Reverse chain driven by an arbitrary predictor. The x_T draw and the
/// per-step noise come from a dedicated Rng seeded here, so the chain is a
/// pure function of (schedule, n_points, seed, predictor).
inline ReconstructionTrace run_reverse_chain(const DiffusionSchedule& sched, int n_points,
                                             std::uint64_t seed,
                                             const NoisePredictor& predict,
                                             int trace_stride = 0) {
    Rng rng(seed, 0x5A3FBull);
    const int total_t = sched.steps();

    ReconstructionTrace out;
    PointCloud x(NoiseSample::draw(n_points, rng).values);
    for (int t = total_t; t >= 1; --t) {
        const Tensor eps_hat = predict(x, t);
        const NoiseSample z =
            t > 1 ? NoiseSample::draw(n_points, rng) : NoiseSample::zeros(n_points);
        x = reverse_step(x, eps_hat, t, sched, z);
        const int done = total_t - t + 1;
        if (trace_stride > 0 && t > 1 && done % trace_stride == 0) {
            out.trace_steps.push_back(t - 1);
            out.intermediates.push_back(x.clone());
        }
    }
    out.final_cloud = std::move(x);
    return out;
}

/// Full image-conditioned reconstruction with the model's predictor and
/// color head.
inline ReconstructionTrace reconstruct(ModelState& st, const Image& image, int n_points,
                                       std::uint64_t seed, int trace_stride = 0) {
    if (image.height != st.encoder.image_size || image.width != st.encoder.image_size)
        throw ContractError("reconstruct: image is " + std::to_string(image.height) + "x" +
                            std::to_string(image.width) + ", checkpoint encoder wants " +
                            std::to_string(st.encoder.image_size));
    if (n_points < 1) throw ContractError("reconstruct: n_points must be positive");

    const LatentCodes codes = encode_image(image, st.params, st.encoder);
    const int total_t = st.sched.steps();
    ReconstructionTrace out = run_reverse_chain(
        st.sched, n_points, seed,
        [&](const PointCloud& x, int t) {
            return predict_noise(x, time_embed(t, total_t, st.shape_net.n_freq, st.sched),
                                 codes.shape_code, st.params, st.shape_net);
        },
        trace_stride);
    out.final_cloud.set_colors(
        predict_colors(out.final_cloud, codes.color_code, st.params, st.color_net));
    return out;
}

}  // namespace pcdm
