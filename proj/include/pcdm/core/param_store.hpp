#pragma once

#include <map>
#include <string>

#include "pcdm/core/rng.hpp"
#include "pcdm/core/tensor.hpp"

namespace pcdm {

/// Gradient tensors keyed by parameter path. Ordered map so iteration is
/// deterministic.
using GradMap = std::map<std::string, Tensor>;

/// Named trainable tensors. Names are dot-separated paths, unique, iterated
/// in lexicographic order.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t) {
        auto [it, inserted] = params_.emplace(name, std::move(t));
        if (!inserted) throw ContractError("duplicate parameter name: " + name);
        return it->second;
    }

    /// Add a matrix initialized uniform in +-sqrt(1/fan_in).
    Tensor& add_uniform(const std::string& name, Shape shape, int fan_in, Rng& rng) {
        Tensor t(shape);
        const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
        return add(name, std::move(t));
    }

    Tensor& add_zeros(const std::string& name, Shape shape) {
        return add(name, Tensor(std::move(shape)));
    }

    Tensor& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("unknown parameter: " + name);
        return it->second;
    }
    const Tensor& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("unknown parameter: " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    std::size_t size() const { return params_.size(); }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    /// Map of zero tensors matching every parameter's shape.
    GradMap zero_grads() const {
        GradMap g;
        for (const auto& [name, t] : params_) g.emplace(name, Tensor(t.shape()));
        return g;
    }

private:
    std::map<std::string, Tensor> params_;
};

}  // namespace pcdm
