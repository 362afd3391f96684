#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qkdauth/bitstring.hpp"
#include "qkdauth/crypto.hpp"
#include "qkdauth/rng.hpp"

namespace qkdauth {

struct SignatureKeyPair {
    std::string scheme_id;
    std::vector<uint8_t> private_key;
    std::vector<uint8_t> public_key;
};

struct EncryptionKeyPair {
    std::string scheme_id;
    std::vector<uint8_t> private_key;
    std::vector<uint8_t> public_key;
};

struct SigParams {
    size_t digest_bits = 256;
    /// One-time slots available before the key is exhausted.
    uint32_t slots = 64;
};

/// Digital signature over digests. Implementations are pluggable behind
/// string scheme ids; the in-repo reference is a hash-based one-time
/// scheme (Lamport preimage reveal per digest bit) with per-slot keys
/// committed under a Merkle root, so the public key is a single root
/// hash and verification binds slot index, revealed preimages and the
/// authentication path.
class SignatureScheme {
public:
    virtual ~SignatureScheme() = default;
    virtual std::string id() const = 0;
    virtual SignatureKeyPair keygen(DetRng& rng, const SigParams& params) const = 0;
    /// Signs with one-time slot `slot`. Callers must never reuse a slot;
    /// use LamportSigner for managed signing.
    virtual std::vector<uint8_t> sign(const SignatureKeyPair& kp, uint32_t slot,
                                      const Digest& digest) const = 0;
    virtual bool verify(std::span<const uint8_t> public_key, const Digest& digest,
                        std::span<const uint8_t> tag) const = 0;
};

/// Public-key encryption of short strings (digests). The in-repo
/// reference ("hybrid-otp-sha256") derives a stream from
/// H(nonce || public value) and XORs; it is a structural stand-in and
/// NOT cryptographically secure -- anyone holding the public key can
/// decrypt. The simulator's claims concern protocol structure only.
class PkeScheme {
public:
    virtual ~PkeScheme() = default;
    virtual std::string id() const = 0;
    virtual EncryptionKeyPair keygen(DetRng& rng) const = 0;
    virtual std::vector<uint8_t> encrypt(std::span<const uint8_t> public_key,
                                         const BitString& plaintext, DetRng& rng) const = 0;
    virtual BitString decrypt(std::span<const uint8_t> private_key,
                              std::span<const uint8_t> ciphertext) const = 0;
    virtual size_t capacity_bits() const = 0;
};

/// Registry lookups; throw std::invalid_argument for unknown ids.
const SignatureScheme& signature_scheme(const std::string& scheme_id);
const PkeScheme& pke_scheme(const std::string& scheme_id);

inline constexpr const char* kLamportSchemeId = "lamport-merkle-sha256";
inline constexpr const char* kHybridOtpSchemeId = "hybrid-otp-sha256";

/// Keyed-index manager for one-time signing keys: hands out each slot
/// exactly once, throws when the key is exhausted. Caches the Merkle
/// tree so signing is O(digest_bits + depth) instead of a full key
/// rebuild per signature.
class LamportSigner {
public:
    LamportSigner() = default;
    explicit LamportSigner(SignatureKeyPair kp);

    std::vector<uint8_t> sign(const Digest& digest);
    uint32_t slots_remaining() const;
    const SignatureKeyPair& keypair() const { return kp_; }

private:
    SignatureKeyPair kp_;
    uint32_t next_slot_ = 0;
    uint32_t total_slots_ = 0;
    size_t digest_bits_ = 0;
    std::vector<std::vector<std::array<uint8_t, 32>>> tree_levels_;  // bottom-up
};

/// Length-prefixed key serialization (big-endian 32-bit length before
/// each field): scheme_id, private_key, public_key.
std::vector<uint8_t> serialize_signature_keypair(const SignatureKeyPair& kp);
SignatureKeyPair deserialize_signature_keypair(std::span<const uint8_t> data);
std::vector<uint8_t> serialize_encryption_keypair(const EncryptionKeyPair& kp);
EncryptionKeyPair deserialize_encryption_keypair(std::span<const uint8_t> data);

/// Shared helpers for big-endian length-prefixed encodings.
void put_u32be(std::vector<uint8_t>& out, uint32_t v);
void put_field(std::vector<uint8_t>& out, std::span<const uint8_t> field);
uint32_t get_u32be(std::span<const uint8_t> data, size_t& pos);
std::vector<uint8_t> get_field(std::span<const uint8_t> data, size_t& pos);

}  // namespace qkdauth
