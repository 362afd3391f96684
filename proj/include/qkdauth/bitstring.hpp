#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qkdauth {

class DetRng;

/// Packed bit vector, the carrier for keys, digests, seeds and parity
/// messages. Bit i lives at words()[i/64], bit position i%64. Byte
/// serialization packs bit 8j+b into bit b of byte j.
class BitString {
public:
    BitString() = default;
    explicit BitString(size_t nbits) : words_((nbits + 63) / 64, 0), nbits_(nbits) {}

    static BitString zeros(size_t nbits) { return BitString(nbits); }
    static BitString random(DetRng& rng, size_t nbits);
    static BitString from_bools(const std::vector<uint8_t>& bits);
    /// Parses "0"/"1" characters; index 0 is the first character.
    static BitString from_string(const std::string& s);
    static BitString from_bytes(std::span<const uint8_t> bytes, size_t nbits);

    size_t size() const { return nbits_; }
    bool empty() const { return nbits_ == 0; }

    bool bit(size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1; }
    void set_bit(size_t i, bool v) {
        uint64_t mask = uint64_t{1} << (i & 63);
        if (v)
            words_[i >> 6] |= mask;
        else
            words_[i >> 6] &= ~mask;
    }

    void append_bit(bool v);
    void append(const BitString& other);
    BitString slice(size_t pos, size_t len) const;

    void xor_inplace(const BitString& other);  // sizes must match
    size_t popcount() const;

    std::vector<uint8_t> to_bytes() const;
    std::string to_string() const;
    std::string hex() const { auto b = to_bytes(); return hex_of(b); }

    const std::vector<uint64_t>& words() const { return words_; }

    bool operator==(const BitString& other) const;
    bool operator!=(const BitString& other) const { return !(*this == other); }

private:
    static std::string hex_of(std::span<const uint8_t> bytes);
    void mask_tail();

    std::vector<uint64_t> words_;
    size_t nbits_ = 0;
};

BitString operator^(const BitString& a, const BitString& b);

}  // namespace qkdauth
