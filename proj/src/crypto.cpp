#include "qkdauth/crypto.hpp"

#include <bit>
#include <stdexcept>

#include "qkdauth/sha256.hpp"

namespace qkdauth {

Digest hash_digest(std::span<const uint8_t> message, size_t bits) {
    if (bits == 0) throw std::invalid_argument("hash_digest: zero-length digest");
    std::vector<uint8_t> raw;
    if (bits <= 256) {
        auto d = sha256(message);
        raw.assign(d.begin(), d.end());
    } else {
        size_t nblocks = (bits + 255) / 256;
        raw.reserve(nblocks * 32);
        for (size_t i = 0; i < nblocks; ++i) {
            Sha256 h;
            uint8_t ctr[4] = {uint8_t(i >> 24), uint8_t(i >> 16), uint8_t(i >> 8), uint8_t(i)};
            h.update(ctr, 4);
            h.update(message);
            auto d = h.finish();
            raw.insert(raw.end(), d.begin(), d.end());
        }
    }
    return Digest{BitString::from_bytes(raw, bits)};
}

BitString otp_encrypt(const BitString& key, const BitString& plaintext) {
    if (key.size() != plaintext.size())
        throw std::invalid_argument("otp_encrypt: key/plaintext length mismatch");
    return key ^ plaintext;
}

void ToeplitzSeed::validate() const {
    if (in_len == 0 || out_len == 0)
        throw std::invalid_argument("ToeplitzSeed: in_len and out_len must be positive");
    if (seed.size() != in_len + out_len - 1)
        throw std::invalid_argument("ToeplitzSeed: seed length must be in_len + out_len - 1");
}

namespace {

// 64-bit window of `bits` starting at bit offset `pos`; out-of-range bits zero.
inline uint64_t window64(const std::vector<uint64_t>& words, size_t nbits, size_t pos) {
    if (pos >= nbits) return 0;
    size_t w = pos >> 6;
    size_t sh = pos & 63;
    uint64_t lo = words[w] >> sh;
    uint64_t hi = (sh != 0 && w + 1 < words.size()) ? words[w + 1] << (64 - sh) : 0;
    uint64_t v = lo | hi;
    size_t avail = nbits - pos;
    if (avail < 64) v &= (uint64_t{1} << avail) - 1;
    return v;
}

}  // namespace

BitString toeplitz_hash(const ToeplitzSeed& ts, const BitString& input) {
    ts.validate();
    if (input.size() != ts.in_len)
        throw std::invalid_argument("toeplitz_hash: input length != in_len");

    const size_t k = ts.in_len;
    const size_t l = ts.out_len;

    // Reversed seed turns every row into a contiguous k-bit window:
    // row i bit j = seed[i + k-1 - j] = rev[l-1-i + j].
    BitString rev(ts.seed.size());
    for (size_t t = 0; t < ts.seed.size(); ++t)
        if (ts.seed.bit(ts.seed.size() - 1 - t)) rev.set_bit(t, true);

    const auto& in_words = input.words();
    const auto& rev_words = rev.words();

    BitString out(l);
    for (size_t i = 0; i < l; ++i) {
        size_t off = l - 1 - i;
        uint64_t acc = 0;
        for (size_t jw = 0; jw * 64 < k; ++jw)
            acc ^= in_words[jw] & window64(rev_words, rev.size(), off + jw * 64);
        if (std::popcount(acc) & 1) out.set_bit(i, true);
    }
    return out;
}

std::vector<uint8_t> expand_stream(std::span<const uint8_t> key, size_t nbytes) {
    std::vector<uint8_t> out;
    out.reserve(nbytes);
    for (uint32_t ctr = 0; out.size() < nbytes; ++ctr) {
        Sha256 h;
        h.update(key);
        uint8_t c[4] = {uint8_t(ctr >> 24), uint8_t(ctr >> 16), uint8_t(ctr >> 8), uint8_t(ctr)};
        h.update(c, 4);
        auto block = h.finish();
        size_t take = std::min(size_t{32}, nbytes - out.size());
        out.insert(out.end(), block.begin(), block.begin() + take);
    }
    return out;
}

}  // namespace qkdauth
