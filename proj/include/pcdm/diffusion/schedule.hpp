#pragma once

#include <cmath>
#include <vector>

#include "pcdm/core/tensor.hpp"

namespace pcdm {

/// Noise schedule for the diffusion chain: beta ramps linearly between the
/// endpoints, alpha = 1 - beta, alpha_bar is the running product. Steps are
/// addressed 1..T.
class DiffusionSchedule {
public:
    static DiffusionSchedule linear(int steps, double beta_start, double beta_end) {
        if (steps < 1)
            throw ContractError("schedule needs at least one step");
        if (!(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0))
            throw ContractError("schedule endpoints must satisfy 0 < beta_start < beta_end < 1");
        DiffusionSchedule s;
        s.beta_start_ = beta_start;
        s.beta_end_ = beta_end;
        s.beta_.resize(steps);
        s.alpha_bar_.resize(steps);
        double prod = 1.0;
        for (int t = 1; t <= steps; ++t) {
            const double frac = steps == 1 ? 0.0
                                           : static_cast<double>(t - 1) /
                                                 static_cast<double>(steps - 1);
            const double b = beta_start + frac * (beta_end - beta_start);
            prod *= 1.0 - b;
            s.beta_[t - 1] = b;
            s.alpha_bar_[t - 1] = prod;
        }
        return s;
    }

    int steps() const { return static_cast<int>(beta_.size()); }
    double beta_start() const { return beta_start_; }
    double beta_end() const { return beta_end_; }

    double beta(int t) const { return beta_[index(t)]; }
    double alpha(int t) const { return 1.0 - beta_[index(t)]; }
    double alpha_bar(int t) const { return alpha_bar_[index(t)]; }

    /// Coefficients of the clean-cloud estimate
    ///   x0 = inv_sqrt_alpha_bar * x_t - noise_coef * predicted_noise
    /// so the formula lives in one place for both the value and tape paths.
    struct X0Scales {
        double inv_sqrt_alpha_bar;
        double noise_coef;
    };
    X0Scales x0_scales(int t) const {
        const double ab = alpha_bar(t);
        const double s = std::sqrt(ab);
        return {1.0 / s, std::sqrt(1.0 - ab) / s};
    }

    void check_step(int t) const { (void)index(t); }

private:
    std::size_t index(int t) const {
        if (t < 1 || t > steps())
            throw ContractError("step " + std::to_string(t) + " outside 1.." +
                                std::to_string(steps()));
        return static_cast<std::size_t>(t - 1);
    }

    double beta_start_ = 0.0;
    double beta_end_ = 0.0;
    std::vector<double> beta_;
    std::vector<double> alpha_bar_;
};

}  // namespace pcdm
