#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qkdauth/bitstring.hpp"

namespace qkdauth {

/// Fixed-length message digest.
struct Digest {
    BitString value;

    size_t bits() const { return value.size(); }
    std::vector<uint8_t> bytes() const { return value.to_bytes(); }
    bool operator==(const Digest& other) const = default;
};

/// Deterministic digest of `message`, `bits` long. With bits == 256 this
/// is plain SHA-256; shorter outputs truncate, longer outputs are built
/// by counter-mode expansion of SHA-256 blocks.
Digest hash_digest(std::span<const uint8_t> message, size_t bits = 256);

/// Bitwise one-time pad. key and plaintext must have equal length; a
/// mismatch means a key-budget bug upstream and throws.
BitString otp_encrypt(const BitString& key, const BitString& plaintext);

/// Seed for a Toeplitz matrix T with out_len rows and in_len columns:
/// T[i][j] = seed[i + (in_len - 1) - j]. seed must hold
/// in_len + out_len - 1 bits.
struct ToeplitzSeed {
    BitString seed;
    size_t in_len = 0;
    size_t out_len = 0;

    void validate() const;
};

/// GF(2) matrix-vector product out = T * input for the seeded Toeplitz
/// matrix. Linear in input. Word-parallel over 64-bit windows of the
/// reversed seed.
BitString toeplitz_hash(const ToeplitzSeed& seed, const BitString& input);

/// Counter-mode SHA-256 stream, used by the reference hybrid cipher.
std::vector<uint8_t> expand_stream(std::span<const uint8_t> key, size_t nbytes);

}  // namespace qkdauth
