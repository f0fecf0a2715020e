#pragma once

// Binary model checkpoint. Layout (all little-endian):
//   magic "PCDM" | u32 version
//   schedule: i32 steps, f64 beta_start, f64 beta_end
//   encoder config | shape-net config | color-net config
//   tensor table: u64 count, then (name, u32 rank, i64 dims..., f64 values...)
//   rng table:    u64 count, then (name, u64 key, u64 counter)
//   u64 step
// Tensor values keep their exact bit patterns, so save -> load -> save is
// byte-identical. Writes go to a temp file renamed into place.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>

#include "pcdm/conditioning/encoder.hpp"
#include "pcdm/core/tensor.hpp"
#include "pcdm/io/binary.hpp"
#include "pcdm/io/errors.hpp"
#include "pcdm/predictors/nets.hpp"

namespace pcdm {

inline constexpr std::uint32_t kCheckpointVersion = 2;

struct RngStreamState {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;
};

struct Checkpoint {
    int schedule_steps = 200;
    double beta_start = 1e-4;
    double beta_end = 0.05;
    EncoderConfig encoder;
    ShapeNetConfig shape_net;
    ColorNetConfig color_net;
    std::map<std::string, Tensor> tensors;
    std::map<std::string, RngStreamState> rng_streams;
    std::uint64_t step = 0;
};

namespace detail {

inline void write_checkpoint_body(std::ostream& os, const Checkpoint& ck) {
    write_bytes(os, reinterpret_cast<const unsigned char*>("PCDM"), 4);
    write_u32_le(os, kCheckpointVersion);

    write_i32_le(os, ck.schedule_steps);
    write_f64_le(os, ck.beta_start);
    write_f64_le(os, ck.beta_end);

    write_i32_le(os, ck.encoder.image_size);
    for (int c : ck.encoder.channels) write_i32_le(os, c);
    write_i32_le(os, ck.encoder.code_dim);
    write_f64_le(os, ck.encoder.leaky_slope);

    write_i32_le(os, ck.shape_net.width);
    write_i32_le(os, ck.shape_net.layers);
    write_i32_le(os, ck.shape_net.code_dim);
    write_i32_le(os, ck.shape_net.n_freq);
    write_f64_le(os, ck.shape_net.leaky_slope);
    write_f64_le(os, ck.shape_net.scale_floor);

    write_i32_le(os, ck.color_net.width);
    write_i32_le(os, ck.color_net.layers);
    write_i32_le(os, ck.color_net.code_dim);
    write_f64_le(os, ck.color_net.leaky_slope);

    write_u64_le(os, ck.tensors.size());
    for (const auto& [name, t] : ck.tensors) {
        write_string(os, name);
        write_u32_le(os, static_cast<std::uint32_t>(t.shape().size()));
        for (int d : t.shape()) write_i64_le(os, d);
        for (std::size_t i = 0; i < t.numel(); ++i) write_f64_le(os, t[i]);
    }

    write_u64_le(os, ck.rng_streams.size());
    for (const auto& [name, state] : ck.rng_streams) {
        write_string(os, name);
        write_u64_le(os, state.key);
        write_u64_le(os, state.counter);
    }

    write_u64_le(os, ck.step);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        detail::write_checkpoint_body(os, ck);
        os.flush();
        if (!os) throw IoError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);

    unsigned char magic[4];
    detail::read_bytes(is, magic, 4);
    if (!(magic[0] == 'P' && magic[1] == 'C' && magic[2] == 'D' && magic[3] == 'M'))
        throw ParseError(path + ": bad checkpoint magic (expected \"PCDM\")");
    const std::uint32_t version = detail::read_u32_le(is);
    if (version != kCheckpointVersion)
        throw ParseError(path + ": checkpoint version " + std::to_string(version) +
                         " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");

    Checkpoint ck;
    ck.schedule_steps = detail::read_i32_le(is);
    ck.beta_start = detail::read_f64_le(is);
    ck.beta_end = detail::read_f64_le(is);

    ck.encoder.image_size = detail::read_i32_le(is);
    for (int& c : ck.encoder.channels) c = detail::read_i32_le(is);
    ck.encoder.code_dim = detail::read_i32_le(is);
    ck.encoder.leaky_slope = detail::read_f64_le(is);

    ck.shape_net.width = detail::read_i32_le(is);
    ck.shape_net.layers = detail::read_i32_le(is);
    ck.shape_net.code_dim = detail::read_i32_le(is);
    ck.shape_net.n_freq = detail::read_i32_le(is);
    ck.shape_net.leaky_slope = detail::read_f64_le(is);
    ck.shape_net.scale_floor = detail::read_f64_le(is);

    ck.color_net.width = detail::read_i32_le(is);
    ck.color_net.layers = detail::read_i32_le(is);
    ck.color_net.code_dim = detail::read_i32_le(is);
    ck.color_net.leaky_slope = detail::read_f64_le(is);

    const std::uint64_t n_tensors = detail::read_u64_le(is);
    for (std::uint64_t i = 0; i < n_tensors; ++i) {
        const std::string name = detail::read_string(is);
        const std::uint32_t rank = detail::read_u32_le(is);
        if (rank > 8) throw ParseError(path + ": tensor " + name + " has rank " +
                                       std::to_string(rank));
        Shape shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d)
            shape[d] = static_cast<int>(detail::read_i64_le(is));
        Tensor t(shape);
        for (std::size_t j = 0; j < t.numel(); ++j) t[j] = detail::read_f64_le(is);
        ck.tensors.emplace(name, std::move(t));
    }

    const std::uint64_t n_streams = detail::read_u64_le(is);
    for (std::uint64_t i = 0; i < n_streams; ++i) {
        const std::string name = detail::read_string(is);
        RngStreamState state;
        state.key = detail::read_u64_le(is);
        state.counter = detail::read_u64_le(is);
        ck.rng_streams.emplace(name, state);
    }

    ck.step = detail::read_u64_le(is);

    is.peek();
    if (!is.eof())
        throw ParseError(path + ": trailing bytes after checkpoint payload");
    return ck;
}

}  // namespace pcdm
