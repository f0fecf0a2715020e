#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace pcdm {

/// Counter-based deterministic PRNG. The state is a (key, counter) pair of
/// 64-bit words; every output is a hash of the pair, so saving and restoring
/// the state is trivial and independent streams are just different keys.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))), counter_(0) {}

    Rng(std::uint64_t key, std::uint64_t counter, bool raw_state)
        : key_(key), counter_(counter) {
        (void)raw_state;
    }

    /// Derive an independent stream from this generator's key. Does not
    /// consume state.
    Rng stream(std::uint64_t tag) const { return Rng(key_, tag); }

    std::uint64_t next_u64() {
        const std::uint64_t x = key_ + counter_ * 0x9e3779b97f4a7c15ULL;
        ++counter_;
        return mix(x);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Multiply-shift mapping; bias is below
    /// 2^-53 for any desk-scale n.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller. Consumes two words per call and keeps
    /// no cached spare, so the (key, counter) pair fully describes the state.
    double normal() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    std::vector<double> normal_vec(std::size_t n) {
        std::vector<double> out(n);
        for (auto& v : out) v = normal();
        return out;
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }
    void set_counter(std::uint64_t c) { counter_ = c; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace pcdm
