#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pcdm/core/tensor.hpp"
#include "pcdm/diffusion/schedule.hpp"

namespace pcdm {

/// Normalized timestep plus its Fourier features: (sin, cos) pairs at
/// frequencies 2^k pi for k = 0..F-1.
struct TimeEmbedding {
    double t_norm = 0.0;
    std::vector<double> fourier;  // length 2F

    // The corruption level sqrt(1 - alpha_bar_t) when built against a
    // schedule; the noise head divides by it so its trunk fits a smooth
    // offset field rather than one whose slope grows as noise vanishes.
    double noise_scale = 1.0;

    /// The condition-vector fragment [t_norm, fourier...] as a 1 x (1+2F) row.
    Tensor as_row() const {
        Tensor out({1, 1 + static_cast<int>(fourier.size())});
        out[0] = t_norm;
        for (std::size_t i = 0; i < fourier.size(); ++i) out[i + 1] = fourier[i];
        return out;
    }
};

inline TimeEmbedding time_embed(int t, int total_steps, int n_freq) {
    if (total_steps < 1 || t < 1 || t > total_steps)
        throw ContractError("time_embed: step " + std::to_string(t) + " outside 1.." +
                            std::to_string(total_steps));
    if (n_freq < 0) throw ContractError("time_embed: negative frequency count");
    TimeEmbedding e;
    e.t_norm = static_cast<double>(t) / total_steps;
    e.fourier.reserve(2 * n_freq);
    double freq = std::numbers::pi;
    for (int k = 0; k < n_freq; ++k, freq *= 2.0) {
        e.fourier.push_back(std::sin(freq * e.t_norm));
        e.fourier.push_back(std::cos(freq * e.t_norm));
    }
    return e;
}

inline TimeEmbedding time_embed(int t, int total_steps, int n_freq,
                                const DiffusionSchedule& sched) {
    TimeEmbedding e = time_embed(t, total_steps, n_freq);
    e.noise_scale = std::sqrt(1.0 - sched.alpha_bar(t));
    return e;
}

}  // namespace pcdm
