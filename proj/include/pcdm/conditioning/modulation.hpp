#pragma once

#include <string>

#include "pcdm/conditioning/time_embed.hpp"
#include "pcdm/core/graph.hpp"
#include "pcdm/core/param_store.hpp"
#include "pcdm/core/rng.hpp"

namespace pcdm {

enum class Activation { Identity, LeakyRelu };

inline Val activate(Graph& g, Val x, Activation act, double slope = 0.01) {
    switch (act) {
        case Activation::Identity: return x;
        case Activation::LeakyRelu: return g.leaky_relu(x, slope);
    }
    throw ContractError("unknown activation");
}

/// Register the four weight tensors of one gate-bias layer under `prefix`.
inline void add_modulation_params(ParamStore& store, const std::string& prefix,
                                  int cond_dim, int dim, Rng& rng) {
    store.add_uniform(prefix + ".gate_w", {cond_dim, dim}, cond_dim, rng);
    store.add_zeros(prefix + ".gate_b", {1, dim});
    store.add_uniform(prefix + ".bias_w", {cond_dim, dim}, cond_dim, rng);
    store.add_zeros(prefix + ".bias_b", {1, dim});
}

/// Feature modulation: a sigmoid gate and an additive bias, both linear in the
/// condition row, applied per feature dimension across all rows of x.
///   out = act(sigmoid(cond W_g + b_g) * x + (cond W_b + b_b))
inline Val gate_bias_modulate(Graph& g, ParamStore& store, const std::string& prefix,
                              Val x, Val cond, Activation act,
                              double slope = 0.01) {
    if (cond.rows() != 1)
        throw ContractError("condition must be a single row, got " +
                            shape_str(cond.shape()));
    Val gate = g.sigmoid(linear(cond, g.param(store, prefix + ".gate_w"),
                                g.param(store, prefix + ".gate_b")));
    Val bias = linear(cond, g.param(store, prefix + ".bias_w"),
                      g.param(store, prefix + ".bias_b"));
    const int n = x.rows();
    Val out = g.add(g.mul(g.broadcast_rows(gate, n), x), g.broadcast_rows(bias, n));
    return activate(g, out, act, slope);
}

/// Condition row fed to every modulated layer: the latent code followed by the
/// timestep fragment [t_norm, fourier].
inline Val condition_vector(Graph& g, Val code, const TimeEmbedding& emb) {
    if (code.rows() != 1)
        throw ContractError("latent code must be a single row, got " +
                            shape_str(code.shape()));
    return g.concat_cols({code, g.constant(emb.as_row())});
}

}  // namespace pcdm
