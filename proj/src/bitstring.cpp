#include "qkdauth/bitstring.hpp"

#include <bit>
#include <stdexcept>

#include "qkdauth/rng.hpp"
#include "qkdauth/sha256.hpp"

namespace qkdauth {

void BitString::mask_tail() {
    size_t rem = nbits_ & 63;
    if (rem != 0 && !words_.empty()) words_.back() &= (uint64_t{1} << rem) - 1;
}

BitString BitString::random(DetRng& rng, size_t nbits) {
    BitString out(nbits);
    for (auto& w : out.words_) w = rng.next_u64();
    out.mask_tail();
    return out;
}

BitString BitString::from_bools(const std::vector<uint8_t>& bits) {
    BitString out(bits.size());
    for (size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) out.set_bit(i, true);
    return out;
}

BitString BitString::from_string(const std::string& s) {
    BitString out(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '1')
            out.set_bit(i, true);
        else if (s[i] != '0')
            throw std::invalid_argument("BitString::from_string: expected '0' or '1'");
    }
    return out;
}

BitString BitString::from_bytes(std::span<const uint8_t> bytes, size_t nbits) {
    if (bytes.size() * 8 < nbits)
        throw std::invalid_argument("BitString::from_bytes: buffer too short");
    BitString out(nbits);
    for (size_t i = 0; i < nbits; ++i)
        if ((bytes[i >> 3] >> (i & 7)) & 1) out.set_bit(i, true);
    return out;
}

void BitString::append_bit(bool v) {
    if ((nbits_ & 63) == 0) words_.push_back(0);
    if (v) words_.back() |= uint64_t{1} << (nbits_ & 63);
    ++nbits_;
}

void BitString::append(const BitString& other) {
    if ((nbits_ & 63) == 0) {
        words_.insert(words_.end(), other.words_.begin(), other.words_.end());
        nbits_ += other.nbits_;
        words_.resize((nbits_ + 63) / 64);
        return;
    }
    for (size_t i = 0; i < other.nbits_; ++i) append_bit(other.bit(i));
}

BitString BitString::slice(size_t pos, size_t len) const {
    if (pos + len > nbits_) throw std::out_of_range("BitString::slice: out of range");
    BitString out(len);
    for (size_t i = 0; i < len; ++i)
        if (bit(pos + i)) out.set_bit(i, true);
    return out;
}

void BitString::xor_inplace(const BitString& other) {
    if (nbits_ != other.nbits_)
        throw std::invalid_argument("BitString::xor_inplace: length mismatch");
    for (size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
}

size_t BitString::popcount() const {
    size_t n = 0;
    for (uint64_t w : words_) n += size_t(std::popcount(w));
    return n;
}

std::vector<uint8_t> BitString::to_bytes() const {
    std::vector<uint8_t> out((nbits_ + 7) / 8, 0);
    for (size_t i = 0; i < out.size(); ++i) {
        size_t w = i >> 3;
        size_t shift = (i & 7) * 8;
        out[i] = uint8_t(words_[w] >> shift);
    }
    if (nbits_ & 7) out.back() &= uint8_t((1u << (nbits_ & 7)) - 1);
    return out;
}

std::string BitString::to_string() const {
    std::string out(nbits_, '0');
    for (size_t i = 0; i < nbits_; ++i)
        if (bit(i)) out[i] = '1';
    return out;
}

std::string BitString::hex_of(std::span<const uint8_t> bytes) { return hex_encode(bytes); }

bool BitString::operator==(const BitString& other) const {
    return nbits_ == other.nbits_ && words_ == other.words_;
}

BitString operator^(const BitString& a, const BitString& b) {
    BitString out = a;
    out.xor_inplace(b);
    return out;
}

}  // namespace qkdauth
