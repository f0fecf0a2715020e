#pragma once

// Everything a training or sampling run carries: schedule, configs, weights,
// optimizer moments, and the two PRNG streams that make runs reproducible.

#include <string>
#include <utility>

#include "pcdm/conditioning/encoder.hpp"
#include "pcdm/core/adam.hpp"
#include "pcdm/core/rng.hpp"
#include "pcdm/diffusion/schedule.hpp"
#include "pcdm/io/checkpoint.hpp"
#include "pcdm/pipeline/config.hpp"
#include "pcdm/predictors/nets.hpp"

namespace pcdm {

struct ModelState {
    DiffusionSchedule sched;
    EncoderConfig encoder;
    ShapeNetConfig shape_net;
    ColorNetConfig color_net;
    ParamStore params;
    AdamState opt;
    Rng rng_data;   // batch composition and timestep draws
    Rng rng_noise;  // diffusion noise draws
    std::uint64_t step = 0;

    ModelState(DiffusionSchedule s, const EncoderConfig& enc, const ShapeNetConfig& sn,
               const ColorNetConfig& cn, Rng data, Rng noise)
        : sched(std::move(s)),
          encoder(enc),
          shape_net(sn),
          color_net(cn),
          rng_data(data),
          rng_noise(noise) {}
};

/// Fresh model: parameters drawn from stream 0 of the seed, data/noise
/// streams from streams 1 and 2.
inline ModelState init_model(const TrainConfig& cfg) {
    Rng master(cfg.seed);
    ModelState st(DiffusionSchedule::linear(cfg.timesteps, cfg.beta_start, cfg.beta_end),
                  cfg.encoder, cfg.shape_net, cfg.color_net, master.stream(1),
                  master.stream(2));
    Rng init_rng = master.stream(0);
    add_encoder_params(st.params, cfg.encoder, init_rng);
    add_shape_net_params(st.params, cfg.shape_net, init_rng);
    add_color_net_params(st.params, cfg.color_net, init_rng);
    return st;
}

inline Checkpoint to_checkpoint(const ModelState& st) {
    Checkpoint ck;
    ck.schedule_steps = st.sched.steps();
    ck.beta_start = st.sched.beta(1);
    ck.beta_end = st.sched.beta(st.sched.steps());
    ck.encoder = st.encoder;
    ck.shape_net = st.shape_net;
    ck.color_net = st.color_net;
    for (const auto& [name, t] : st.params) ck.tensors.emplace(name, t.clone());
    for (const auto& [name, t] : st.opt.m) ck.tensors.emplace("opt.m." + name, t.clone());
    for (const auto& [name, t] : st.opt.v) ck.tensors.emplace("opt.v." + name, t.clone());
    ck.rng_streams["data"] = {st.rng_data.key(), st.rng_data.counter()};
    ck.rng_streams["noise"] = {st.rng_noise.key(), st.rng_noise.counter()};
    ck.step = st.step;
    return ck;
}

inline ModelState model_from_checkpoint(const Checkpoint& ck) {
    auto stream = [&](const std::string& name) {
        auto it = ck.rng_streams.find(name);
        if (it == ck.rng_streams.end())
            throw ParseError("checkpoint lacks rng stream \"" + name + "\"");
        return Rng(it->second.key, it->second.counter, true);
    };
    ModelState st(DiffusionSchedule::linear(ck.schedule_steps, ck.beta_start, ck.beta_end),
                  ck.encoder, ck.shape_net, ck.color_net, stream("data"), stream("noise"));
    for (const auto& [name, t] : ck.tensors) {
        if (name.rfind("opt.m.", 0) == 0)
            st.opt.m.emplace(name.substr(6), t.clone());
        else if (name.rfind("opt.v.", 0) == 0)
            st.opt.v.emplace(name.substr(6), t.clone());
        else
            st.params.add(name, t.clone());
    }
    // One optimizer update per training step, so the counters coincide.
    st.step = ck.step;
    st.opt.step = ck.step;
    return st;
}

}  // namespace pcdm
