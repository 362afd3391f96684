#include "qkdauth/schemes.hpp"

#include <cstring>
#include <stdexcept>

#include "qkdauth/sha256.hpp"

namespace qkdauth {

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

void put_field(std::vector<uint8_t>& out, std::span<const uint8_t> field) {
    put_u32be(out, uint32_t(field.size()));
    out.insert(out.end(), field.begin(), field.end());
}

uint32_t get_u32be(std::span<const uint8_t> data, size_t& pos) {
    if (pos + 4 > data.size()) throw std::invalid_argument("truncated length prefix");
    uint32_t v = (uint32_t(data[pos]) << 24) | (uint32_t(data[pos + 1]) << 16) |
                 (uint32_t(data[pos + 2]) << 8) | uint32_t(data[pos + 3]);
    pos += 4;
    return v;
}

std::vector<uint8_t> get_field(std::span<const uint8_t> data, size_t& pos) {
    uint32_t len = get_u32be(data, pos);
    if (pos + len > data.size()) throw std::invalid_argument("truncated field");
    std::vector<uint8_t> out(data.begin() + pos, data.begin() + pos + len);
    pos += len;
    return out;
}

namespace {

constexpr size_t kHashLen = 32;

// ---- Lamport one-time signatures under a Merkle slot tree ----
//
// private_key: u32be digest_bits | u32be slots | slots * 2*digest_bits
//              secret preimages of kHashLen bytes, ordered
//              (bit 0 value 0), (bit 0 value 1), (bit 1 value 0), ...
// public_key:  u32be digest_bits | u32be slots | 32-byte Merkle root
//              over per-slot leaves.
// tag:         u32be slot | per digest bit: revealed preimage (32B) then
//              the complementary public hash (32B) | Merkle path,
//              bottom-up, 32B per level.

constexpr uint32_t kMaxDigestBits = 1u << 16;
constexpr uint32_t kMaxSlots = 1u << 24;

struct LamportLayout {
    size_t digest_bits;
    uint32_t slots;
    size_t secrets_per_slot() const { return 2 * digest_bits; }
    size_t slot_priv_bytes() const { return secrets_per_slot() * kHashLen; }
    uint32_t padded_leaves() const {
        uint64_t n = 1;
        while (n < slots) n <<= 1;
        return uint32_t(n);
    }
    uint32_t depth() const {
        uint32_t d = 0;
        for (uint32_t n = padded_leaves(); n > 1; n >>= 1) ++d;
        return d;
    }
};

std::array<uint8_t, 32> hash_pair(std::span<const uint8_t> left, std::span<const uint8_t> right) {
    Sha256 h;
    h.update(left);
    h.update(right);
    return h.finish();
}

std::array<uint8_t, 32> pad_leaf(uint32_t index) {
    Sha256 h;
    h.update("pad", 3);
    uint8_t be[4] = {uint8_t(index >> 24), uint8_t(index >> 16), uint8_t(index >> 8),
                     uint8_t(index)};
    h.update(be, 4);
    return h.finish();
}

// Leaf = H(u32be slot || public hashes of every secret in order).
std::array<uint8_t, 32> slot_leaf(uint32_t slot, std::span<const uint8_t> slot_public_hashes) {
    Sha256 h;
    uint8_t be[4] = {uint8_t(slot >> 24), uint8_t(slot >> 16), uint8_t(slot >> 8), uint8_t(slot)};
    h.update(be, 4);
    h.update(slot_public_hashes);
    return h.finish();
}

class LamportScheme : public SignatureScheme {
public:
    std::string id() const override { return kLamportSchemeId; }

    SignatureKeyPair keygen(DetRng& rng, const SigParams& params) const override {
        if (params.digest_bits == 0 || params.slots == 0)
            throw std::invalid_argument("lamport keygen: digest_bits and slots must be > 0");
        if (params.digest_bits > kMaxDigestBits || params.slots > kMaxSlots)
            throw std::invalid_argument("lamport keygen: digest_bits or slots out of range");
        LamportLayout lay{params.digest_bits, params.slots};

        SignatureKeyPair kp;
        kp.scheme_id = id();
        kp.private_key.reserve(8 + size_t(lay.slots) * lay.slot_priv_bytes());
        put_u32be(kp.private_key, uint32_t(lay.digest_bits));
        put_u32be(kp.private_key, lay.slots);

        std::vector<std::array<uint8_t, 32>> leaves;
        leaves.reserve(lay.padded_leaves());
        std::vector<uint8_t> pub_hashes(lay.slot_priv_bytes());
        for (uint32_t s = 0; s < lay.slots; ++s) {
            size_t base = kp.private_key.size();
            kp.private_key.resize(base + lay.slot_priv_bytes());
            rng.fill_bytes(kp.private_key.data() + base, lay.slot_priv_bytes());
            for (size_t i = 0; i < lay.secrets_per_slot(); ++i) {
                auto h = sha256(std::span(kp.private_key).subspan(base + i * kHashLen, kHashLen));
                std::memcpy(pub_hashes.data() + i * kHashLen, h.data(), kHashLen);
            }
            leaves.push_back(slot_leaf(s, pub_hashes));
        }
        for (uint32_t s = lay.slots; s < lay.padded_leaves(); ++s) leaves.push_back(pad_leaf(s));

        while (leaves.size() > 1) {
            std::vector<std::array<uint8_t, 32>> next;
            next.reserve(leaves.size() / 2);
            for (size_t i = 0; i < leaves.size(); i += 2)
                next.push_back(hash_pair(leaves[i], leaves[i + 1]));
            leaves = std::move(next);
        }

        put_u32be(kp.public_key, uint32_t(lay.digest_bits));
        put_u32be(kp.public_key, lay.slots);
        kp.public_key.insert(kp.public_key.end(), leaves[0].begin(), leaves[0].end());
        return kp;
    }

    std::vector<uint8_t> sign(const SignatureKeyPair& kp, uint32_t slot,
                              const Digest& digest) const override {
        LamportLayout lay = parse_private_header(kp.private_key);
        if (digest.bits() != lay.digest_bits)
            throw std::invalid_argument("lamport sign: digest length mismatch");
        if (slot >= lay.slots) throw std::invalid_argument("lamport sign: slot out of range");

        // Rebuild the tree to collect the authentication path. Desk-scale
        // key sizes make the recomputation cheap.
        std::vector<std::array<uint8_t, 32>> level = all_leaves(kp.private_key, lay);

        std::vector<uint8_t> tag;
        put_u32be(tag, slot);

        const uint8_t* slot_priv = kp.private_key.data() + 8 + size_t(slot) * lay.slot_priv_bytes();
        for (size_t bit = 0; bit < lay.digest_bits; ++bit) {
            bool v = digest.value.bit(bit);
            const uint8_t* reveal = slot_priv + (2 * bit + (v ? 1 : 0)) * kHashLen;
            const uint8_t* other = slot_priv + (2 * bit + (v ? 0 : 1)) * kHashLen;
            tag.insert(tag.end(), reveal, reveal + kHashLen);
            auto other_hash = sha256(std::span(other, kHashLen));
            tag.insert(tag.end(), other_hash.begin(), other_hash.end());
        }

        uint32_t index = slot;
        while (level.size() > 1) {
            uint32_t sibling = index ^ 1;
            tag.insert(tag.end(), level[sibling].begin(), level[sibling].end());
            std::vector<std::array<uint8_t, 32>> next;
            next.reserve(level.size() / 2);
            for (size_t i = 0; i < level.size(); i += 2)
                next.push_back(hash_pair(level[i], level[i + 1]));
            level = std::move(next);
            index >>= 1;
        }
        return tag;
    }

    bool verify(std::span<const uint8_t> public_key, const Digest& digest,
                std::span<const uint8_t> tag) const override {
        if (public_key.size() != 8 + kHashLen) return false;
        size_t pos = 0;
        uint32_t digest_bits = get_u32be(public_key, pos);
        uint32_t slots = get_u32be(public_key, pos);
        if (digest_bits == 0 || digest_bits > kMaxDigestBits) return false;
        if (slots == 0 || slots > kMaxSlots) return false;
        if (digest.bits() != digest_bits) return false;

        LamportLayout lay{digest_bits, slots};
        size_t expect = 4 + size_t(digest_bits) * 2 * kHashLen + size_t(lay.depth()) * kHashLen;
        if (tag.size() != expect) return false;

        size_t tpos = 0;
        uint32_t slot = get_u32be(tag, tpos);
        if (slot >= slots) return false;

        std::vector<uint8_t> pub_hashes(lay.slot_priv_bytes());
        for (size_t bit = 0; bit < digest_bits; ++bit) {
            auto revealed = tag.subspan(tpos, kHashLen);
            tpos += kHashLen;
            auto other = tag.subspan(tpos, kHashLen);
            tpos += kHashLen;
            auto revealed_hash = sha256(revealed);
            bool v = digest.value.bit(bit);
            std::memcpy(pub_hashes.data() + (2 * bit + (v ? 1 : 0)) * kHashLen,
                        revealed_hash.data(), kHashLen);
            std::memcpy(pub_hashes.data() + (2 * bit + (v ? 0 : 1)) * kHashLen, other.data(),
                        kHashLen);
        }

        auto node = slot_leaf(slot, pub_hashes);
        uint32_t index = slot;
        for (uint32_t d = 0; d < lay.depth(); ++d) {
            auto sibling = tag.subspan(tpos, kHashLen);
            tpos += kHashLen;
            node = (index & 1) ? hash_pair(sibling, node) : hash_pair(node, sibling);
            index >>= 1;
        }
        return std::memcmp(node.data(), public_key.data() + 8, kHashLen) == 0;
    }

private:
    static LamportLayout parse_private_header(std::span<const uint8_t> priv) {
        size_t pos = 0;
        uint32_t digest_bits = get_u32be(priv, pos);
        uint32_t slots = get_u32be(priv, pos);
        LamportLayout lay{digest_bits, slots};
        if (priv.size() != 8 + size_t(slots) * lay.slot_priv_bytes())
            throw std::invalid_argument("lamport: malformed private key");
        return lay;
    }

    static std::vector<std::array<uint8_t, 32>> all_leaves(std::span<const uint8_t> priv,
                                                           const LamportLayout& lay) {
        std::vector<std::array<uint8_t, 32>> leaves;
        leaves.reserve(lay.padded_leaves());
        std::vector<uint8_t> pub_hashes(lay.slot_priv_bytes());
        for (uint32_t s = 0; s < lay.slots; ++s) {
            const uint8_t* slot_priv = priv.data() + 8 + size_t(s) * lay.slot_priv_bytes();
            for (size_t i = 0; i < lay.secrets_per_slot(); ++i) {
                auto h = sha256(std::span(slot_priv + i * kHashLen, kHashLen));
                std::memcpy(pub_hashes.data() + i * kHashLen, h.data(), kHashLen);
            }
            leaves.push_back(slot_leaf(s, pub_hashes));
        }
        for (uint32_t s = lay.slots; s < lay.padded_leaves(); ++s) leaves.push_back(pad_leaf(s));
        return leaves;
    }
};

// ---- Hybrid OTP "public-key" cipher (reference stand-in) ----
//
// private_key: 32 random bytes. public_key: H(private_key).
// ciphertext:  u32be plaintext bits | 32-byte nonce | masked bytes, with
//              mask = expand_stream(H(nonce || public_key)).
// Decryption only needs H(private_key) = public_key, so possession of
// the public key suffices to decrypt: NOT secure, structural only.

class HybridOtpScheme : public PkeScheme {
public:
    std::string id() const override { return kHybridOtpSchemeId; }

    EncryptionKeyPair keygen(DetRng& rng) const override {
        EncryptionKeyPair kp;
        kp.scheme_id = id();
        kp.private_key.resize(32);
        rng.fill_bytes(kp.private_key.data(), 32);
        auto pub = sha256(kp.private_key);
        kp.public_key.assign(pub.begin(), pub.end());
        return kp;
    }

    std::vector<uint8_t> encrypt(std::span<const uint8_t> public_key, const BitString& plaintext,
                                 DetRng& rng) const override {
        if (public_key.size() != 32)
            throw std::invalid_argument("hybrid-otp encrypt: bad public key");
        if (plaintext.size() > capacity_bits())
            throw std::invalid_argument("hybrid-otp encrypt: plaintext too long");
        std::vector<uint8_t> out;
        put_u32be(out, uint32_t(plaintext.size()));
        std::vector<uint8_t> nonce(32);
        rng.fill_bytes(nonce.data(), 32);
        out.insert(out.end(), nonce.begin(), nonce.end());

        auto body = plaintext.to_bytes();
        auto mask = derive_mask(nonce, public_key, body.size());
        for (size_t i = 0; i < body.size(); ++i) body[i] ^= mask[i];
        out.insert(out.end(), body.begin(), body.end());
        return out;
    }

    BitString decrypt(std::span<const uint8_t> private_key,
                      std::span<const uint8_t> ciphertext) const override {
        if (private_key.size() != 32)
            throw std::invalid_argument("hybrid-otp decrypt: bad private key");
        size_t pos = 0;
        uint32_t nbits = get_u32be(ciphertext, pos);
        if (ciphertext.size() != 4 + 32 + (nbits + 7) / 8)
            throw std::invalid_argument("hybrid-otp decrypt: malformed ciphertext");
        auto nonce = ciphertext.subspan(pos, 32);
        pos += 32;
        auto pub = sha256(private_key);
        std::vector<uint8_t> body(ciphertext.begin() + pos, ciphertext.end());
        auto mask = derive_mask(nonce, pub, body.size());
        for (size_t i = 0; i < body.size(); ++i) body[i] ^= mask[i];
        return BitString::from_bytes(body, nbits);
    }

    size_t capacity_bits() const override { return size_t{1} << 20; }

private:
    static std::vector<uint8_t> derive_mask(std::span<const uint8_t> nonce,
                                            std::span<const uint8_t> pub, size_t nbytes) {
        Sha256 h;
        h.update(nonce);
        h.update(pub);
        auto key = h.finish();
        return expand_stream(key, nbytes);
    }
};

const LamportScheme g_lamport;
const HybridOtpScheme g_hybrid_otp;

}  // namespace

const SignatureScheme& signature_scheme(const std::string& scheme_id) {
    if (scheme_id == kLamportSchemeId) return g_lamport;
    throw std::invalid_argument("unknown signature scheme: " + scheme_id);
}

const PkeScheme& pke_scheme(const std::string& scheme_id) {
    if (scheme_id == kHybridOtpSchemeId) return g_hybrid_otp;
    throw std::invalid_argument("unknown encryption scheme: " + scheme_id);
}

LamportSigner::LamportSigner(SignatureKeyPair kp) : kp_(std::move(kp)) {
    size_t pos = 0;
    digest_bits_ = get_u32be(kp_.private_key, pos);
    total_slots_ = get_u32be(kp_.private_key, pos);

    LamportLayout lay{digest_bits_, total_slots_};
    if (kp_.private_key.size() != 8 + size_t(total_slots_) * lay.slot_priv_bytes())
        throw std::invalid_argument("LamportSigner: malformed private key");

    std::vector<std::array<uint8_t, 32>> level;
    level.reserve(lay.padded_leaves());
    std::vector<uint8_t> pub_hashes(lay.slot_priv_bytes());
    for (uint32_t s = 0; s < total_slots_; ++s) {
        const uint8_t* slot_priv = kp_.private_key.data() + 8 + size_t(s) * lay.slot_priv_bytes();
        for (size_t i = 0; i < lay.secrets_per_slot(); ++i) {
            auto h = sha256(std::span(slot_priv + i * kHashLen, kHashLen));
            std::memcpy(pub_hashes.data() + i * kHashLen, h.data(), kHashLen);
        }
        level.push_back(slot_leaf(s, pub_hashes));
    }
    for (uint32_t s = total_slots_; s < lay.padded_leaves(); ++s) level.push_back(pad_leaf(s));

    tree_levels_.push_back(level);
    while (tree_levels_.back().size() > 1) {
        const auto& prev = tree_levels_.back();
        std::vector<std::array<uint8_t, 32>> next;
        next.reserve(prev.size() / 2);
        for (size_t i = 0; i < prev.size(); i += 2) next.push_back(hash_pair(prev[i], prev[i + 1]));
        tree_levels_.push_back(std::move(next));
    }
}

std::vector<uint8_t> LamportSigner::sign(const Digest& digest) {
    if (next_slot_ >= total_slots_)
        throw std::runtime_error("LamportSigner: one-time slots exhausted");
    if (digest.bits() != digest_bits_)
        throw std::invalid_argument("LamportSigner: digest length mismatch");
    const uint32_t slot = next_slot_++;

    LamportLayout lay{digest_bits_, total_slots_};
    std::vector<uint8_t> tag;
    put_u32be(tag, slot);
    const uint8_t* slot_priv = kp_.private_key.data() + 8 + size_t(slot) * lay.slot_priv_bytes();
    for (size_t bit = 0; bit < digest_bits_; ++bit) {
        bool v = digest.value.bit(bit);
        const uint8_t* reveal = slot_priv + (2 * bit + (v ? 1 : 0)) * kHashLen;
        const uint8_t* other = slot_priv + (2 * bit + (v ? 0 : 1)) * kHashLen;
        tag.insert(tag.end(), reveal, reveal + kHashLen);
        auto other_hash = sha256(std::span(other, kHashLen));
        tag.insert(tag.end(), other_hash.begin(), other_hash.end());
    }
    uint32_t index = slot;
    for (size_t d = 0; d + 1 < tree_levels_.size(); ++d) {
        const auto& sibling = tree_levels_[d][index ^ 1];
        tag.insert(tag.end(), sibling.begin(), sibling.end());
        index >>= 1;
    }
    return tag;
}

uint32_t LamportSigner::slots_remaining() const { return total_slots_ - next_slot_; }

std::vector<uint8_t> serialize_signature_keypair(const SignatureKeyPair& kp) {
    std::vector<uint8_t> out;
    put_field(out, std::span(reinterpret_cast<const uint8_t*>(kp.scheme_id.data()),
                             kp.scheme_id.size()));
    put_field(out, kp.private_key);
    put_field(out, kp.public_key);
    return out;
}

SignatureKeyPair deserialize_signature_keypair(std::span<const uint8_t> data) {
    size_t pos = 0;
    SignatureKeyPair kp;
    auto idf = get_field(data, pos);
    kp.scheme_id.assign(idf.begin(), idf.end());
    kp.private_key = get_field(data, pos);
    kp.public_key = get_field(data, pos);
    if (pos != data.size()) throw std::invalid_argument("trailing bytes in keypair encoding");
    return kp;
}

std::vector<uint8_t> serialize_encryption_keypair(const EncryptionKeyPair& kp) {
    std::vector<uint8_t> out;
    put_field(out, std::span(reinterpret_cast<const uint8_t*>(kp.scheme_id.data()),
                             kp.scheme_id.size()));
    put_field(out, kp.private_key);
    put_field(out, kp.public_key);
    return out;
}

EncryptionKeyPair deserialize_encryption_keypair(std::span<const uint8_t> data) {
    size_t pos = 0;
    EncryptionKeyPair kp;
    auto idf = get_field(data, pos);
    kp.scheme_id.assign(idf.begin(), idf.end());
    kp.private_key = get_field(data, pos);
    kp.public_key = get_field(data, pos);
    if (pos != data.size()) throw std::invalid_argument("trailing bytes in keypair encoding");
    return kp;
}

}  // namespace qkdauth
