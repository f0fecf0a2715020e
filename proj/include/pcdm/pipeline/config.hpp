#pragma once

// Training configuration, mirrored field-for-field by the JSON config file.

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "pcdm/conditioning/encoder.hpp"
#include "pcdm/io/errors.hpp"
#include "pcdm/losses/losses.hpp"
#include "pcdm/predictors/nets.hpp"

namespace pcdm {

struct TrainConfig {
    int timesteps = 200;
    double beta_start = 1e-4;
    double beta_end = 0.05;

    int batch_size = 4;
    int steps = 5000;
    double lr = 1e-3;
    double lr_final = -1.0;  // >= 0: cosine-decay the rate to this by the last step
    double noise_aug = 0.0;  // > 0: half the noise draws scale up by as much as 1 + this
    LossWeights weights;
    bool disable_rgb = false;

    // Rendering during training: the rgb loss is computed every render_stride
    // steps at render_resolution rays per side with render_samples per ray.
    int render_stride = 4;
    int render_resolution = 32;
    int render_samples = 16;
    int k_neighbors = 8;
    double mask_radius = 0.1;

    std::uint64_t seed = 0;
    int checkpoint_every = 1000;
    int log_every = 50;
    std::string data_dir;
    std::string out_path = "model.pcdm";

    EncoderConfig encoder;
    ShapeNetConfig shape_net;
    ColorNetConfig color_net;

    void validate() const {
        auto positive = [](long v, const char* name) {
            if (v <= 0)
                throw ContractError(std::string("config: ") + name + " must be positive");
        };
        positive(timesteps, "timesteps");
        positive(batch_size, "batch_size");
        positive(steps, "steps");
        if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0))
            throw ContractError("config: need 0 < beta_start < beta_end < 1");
        if (!(lr > 0.0)) throw ContractError("config: lr must be positive");
        if (lr_final > lr) throw ContractError("config: lr_final must not exceed lr");
        if (noise_aug < 0.0) throw ContractError("config: noise_aug must be >= 0");
        if (weights.geo < 0.0 || weights.cham < 0.0 || weights.rgb < 0.0)
            throw ContractError("config: loss weights must be >= 0");
        positive(render_stride, "render_stride");
        positive(render_resolution, "render_resolution");
        positive(render_samples, "render_samples");
        positive(k_neighbors, "k_neighbors");
        if (!(mask_radius > 0.0)) throw ContractError("config: mask_radius must be positive");
        if (encoder.image_size % render_resolution != 0)
            throw ContractError("config: render_resolution must divide encoder image_size");
        if (shape_net.code_dim != encoder.code_dim || color_net.code_dim != encoder.code_dim)
            throw ContractError("config: predictor code_dim must match encoder code_dim");
    }
};

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* name, T& out) {
    if (j.contains(name)) out = j.at(name).get<T>();
}

}  // namespace detail

inline TrainConfig parse_train_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("train config JSON: ") + e.what());
    }
    try {
        TrainConfig cfg;
        detail::read_field(j, "timesteps", cfg.timesteps);
        detail::read_field(j, "beta_start", cfg.beta_start);
        detail::read_field(j, "beta_end", cfg.beta_end);
        detail::read_field(j, "batch_size", cfg.batch_size);
        detail::read_field(j, "steps", cfg.steps);
        detail::read_field(j, "lr", cfg.lr);
        detail::read_field(j, "lr_final", cfg.lr_final);
        detail::read_field(j, "noise_aug", cfg.noise_aug);
        if (j.contains("weights")) {
            const auto& w = j.at("weights");
            detail::read_field(w, "geo", cfg.weights.geo);
            detail::read_field(w, "cham", cfg.weights.cham);
            detail::read_field(w, "rgb", cfg.weights.rgb);
        }
        detail::read_field(j, "disable_rgb", cfg.disable_rgb);
        detail::read_field(j, "render_stride", cfg.render_stride);
        detail::read_field(j, "render_resolution", cfg.render_resolution);
        detail::read_field(j, "render_samples", cfg.render_samples);
        detail::read_field(j, "k_neighbors", cfg.k_neighbors);
        detail::read_field(j, "mask_radius", cfg.mask_radius);
        detail::read_field(j, "seed", cfg.seed);
        detail::read_field(j, "checkpoint_every", cfg.checkpoint_every);
        detail::read_field(j, "log_every", cfg.log_every);
        detail::read_field(j, "data_dir", cfg.data_dir);
        detail::read_field(j, "out_path", cfg.out_path);
        if (j.contains("encoder")) {
            const auto& e = j.at("encoder");
            detail::read_field(e, "image_size", cfg.encoder.image_size);
            detail::read_field(e, "channels", cfg.encoder.channels);
            detail::read_field(e, "code_dim", cfg.encoder.code_dim);
            detail::read_field(e, "leaky_slope", cfg.encoder.leaky_slope);
        }
        if (j.contains("shape_net")) {
            const auto& s = j.at("shape_net");
            detail::read_field(s, "width", cfg.shape_net.width);
            detail::read_field(s, "layers", cfg.shape_net.layers);
            detail::read_field(s, "code_dim", cfg.shape_net.code_dim);
            detail::read_field(s, "n_freq", cfg.shape_net.n_freq);
            detail::read_field(s, "leaky_slope", cfg.shape_net.leaky_slope);
        }
        if (j.contains("color_net")) {
            const auto& c = j.at("color_net");
            detail::read_field(c, "width", cfg.color_net.width);
            detail::read_field(c, "layers", cfg.color_net.layers);
            detail::read_field(c, "code_dim", cfg.color_net.code_dim);
            detail::read_field(c, "leaky_slope", cfg.color_net.leaky_slope);
        }
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("train config JSON: ") + e.what());
    }
}

inline TrainConfig load_train_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return parse_train_config(text);
}

inline std::string train_config_to_json(const TrainConfig& cfg) {
    nlohmann::json j;
    j["timesteps"] = cfg.timesteps;
    j["beta_start"] = cfg.beta_start;
    j["beta_end"] = cfg.beta_end;
    j["batch_size"] = cfg.batch_size;
    j["steps"] = cfg.steps;
    j["lr"] = cfg.lr;
    j["lr_final"] = cfg.lr_final;
    j["noise_aug"] = cfg.noise_aug;
    j["weights"] = {{"geo", cfg.weights.geo}, {"cham", cfg.weights.cham},
                    {"rgb", cfg.weights.rgb}};
    j["disable_rgb"] = cfg.disable_rgb;
    j["render_stride"] = cfg.render_stride;
    j["render_resolution"] = cfg.render_resolution;
    j["render_samples"] = cfg.render_samples;
    j["k_neighbors"] = cfg.k_neighbors;
    j["mask_radius"] = cfg.mask_radius;
    j["seed"] = cfg.seed;
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["log_every"] = cfg.log_every;
    j["data_dir"] = cfg.data_dir;
    j["out_path"] = cfg.out_path;
    j["encoder"] = {{"image_size", cfg.encoder.image_size},
                    {"channels", cfg.encoder.channels},
                    {"code_dim", cfg.encoder.code_dim},
                    {"leaky_slope", cfg.encoder.leaky_slope}};
    j["shape_net"] = {{"width", cfg.shape_net.width},
                      {"layers", cfg.shape_net.layers},
                      {"code_dim", cfg.shape_net.code_dim},
                      {"n_freq", cfg.shape_net.n_freq},
                      {"leaky_slope", cfg.shape_net.leaky_slope}};
    j["color_net"] = {{"width", cfg.color_net.width},
                      {"layers", cfg.color_net.layers},
                      {"code_dim", cfg.color_net.code_dim},
                      {"leaky_slope", cfg.color_net.leaky_slope}};
    return j.dump(2) + "\n";
}

}  // namespace pcdm
