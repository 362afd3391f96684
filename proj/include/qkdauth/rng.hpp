#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace qkdauth {

/// Deterministic random stream (xoshiro256** seeded via splitmix64).
/// The standard library engines/distributions are avoided on purpose:
/// every stochastic component must be bit-reproducible across builds
/// and platforms so that transcripts and ledgers are byte-identical
/// under a fixed seed.
class DetRng {
public:
    explicit DetRng(uint64_t seed);

    /// Independent stream keyed by (seed, label, round). Labels separate
    /// roles and subsystems, e.g. ("alice-protocol", round) vs
    /// ("channel", round).
    static DetRng derive(uint64_t seed, std::string_view label, uint32_t round = 0);

    uint64_t next_u64();
    /// Uniform in [0, n). n must be > 0. Rejection sampling, no modulo bias.
    uint64_t uniform_below(uint64_t n);
    bool bit() { return next_u64() >> 63; }
    /// Uniform in [0, 1) with 53-bit resolution.
    double unit_double() { return double(next_u64() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p) { return unit_double() < p; }

    void fill_bytes(uint8_t* out, size_t len);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// m distinct indices from [0, n), returned sorted ascending.
    std::vector<uint32_t> sample_without_replacement(uint32_t n, uint32_t m);

private:
    explicit DetRng(const std::array<uint64_t, 4>& state);

    std::array<uint64_t, 4> s_;
};

}  // namespace qkdauth
