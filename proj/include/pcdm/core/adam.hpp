#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "pcdm/core/param_store.hpp"

namespace pcdm {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment buffers plus the bias-correction step count.
class AdamState {
public:
    std::uint64_t step = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;

    void ensure(const ParamStore& store) {
        for (const auto& [name, t] : store) {
            if (!m.count(name)) m.emplace(name, Tensor(t.shape()));
            if (!v.count(name)) v.emplace(name, Tensor(t.shape()));
        }
    }
};

/// One Adam update with bias correction. Every parameter must have a
/// gradient entry.
inline void adam_step(ParamStore& store, const GradMap& grads,
                      const AdamConfig& cfg, AdamState& state) {
    state.ensure(store);
    state.step += 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (auto& [name, p] : store) {
        auto git = grads.find(name);
        if (git == grads.end())
            throw ContractError("adam_step: missing gradient for " + name);
        const Tensor& g = git->second;
        require_same_shape(p, g, "adam_step");
        Tensor& mo = state.m.at(name);
        Tensor& vo = state.v.at(name);
        for (std::size_t i = 0; i < p.numel(); ++i) {
            mo[i] = cfg.beta1 * mo[i] + (1.0 - cfg.beta1) * g[i];
            vo[i] = cfg.beta2 * vo[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = mo[i] / c1;
            const double vhat = vo[i] / c2;
            p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace pcdm
