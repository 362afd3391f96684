#include "qkdauth/rng.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "qkdauth/sha256.hpp"

namespace qkdauth {

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

DetRng::DetRng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
}

DetRng::DetRng(const std::array<uint64_t, 4>& state) : s_(state) {
    bool all_zero = true;
    for (uint64_t w : s_) all_zero = all_zero && w == 0;
    if (all_zero) s_[0] = 1;
}

DetRng DetRng::derive(uint64_t seed, std::string_view label, uint32_t round) {
    Sha256 h;
    uint8_t le[8];
    for (int i = 0; i < 8; ++i) le[i] = uint8_t(seed >> (8 * i));
    h.update(le, 8);
    h.update(label.data(), label.size());
    uint8_t r[4];
    for (int i = 0; i < 4; ++i) r[i] = uint8_t(round >> (8 * i));
    h.update(r, 4);
    auto digest = h.finish();

    std::array<uint64_t, 4> state{};
    for (int i = 0; i < 4; ++i) {
        uint64_t w = 0;
        for (int b = 0; b < 8; ++b) w |= uint64_t(digest[8 * i + b]) << (8 * b);
        state[i] = w;
    }
    return DetRng(state);
}

uint64_t DetRng::next_u64() {
    uint64_t result = rotl(s_[1] * 5, 7) * 9;
    uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

uint64_t DetRng::uniform_below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("DetRng::uniform_below: n must be > 0");
    uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
        uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

void DetRng::fill_bytes(uint8_t* out, size_t len) {
    size_t i = 0;
    while (i < len) {
        uint64_t w = next_u64();
        for (int b = 0; b < 8 && i < len; ++b, ++i) out[i] = uint8_t(w >> (8 * b));
    }
}

std::vector<uint32_t> DetRng::sample_without_replacement(uint32_t n, uint32_t m) {
    if (m > n) throw std::invalid_argument("sample_without_replacement: m > n");
    std::vector<uint32_t> idx(n);
    for (uint32_t i = 0; i < n; ++i) idx[i] = i;
    for (uint32_t i = 0; i < m; ++i) {
        uint32_t j = i + uint32_t(uniform_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace qkdauth
