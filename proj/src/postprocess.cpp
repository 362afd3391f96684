#include "qkdauth/postprocess.hpp"

#include <cmath>
#include <stdexcept>

#include "qkdauth/schemes.hpp"

namespace qkdauth {

std::vector<uint32_t> report_valid_detections(const std::vector<DetectionEvent>& events) {
    std::vector<uint32_t> out;
    for (const auto& e : events)
        if (e.detected) out.push_back(e.index);
    return out;
}

std::vector<uint8_t> encode_basis_message(const BitString& bases) {
    std::vector<uint8_t> out;
    put_u32be(out, uint32_t(bases.size()));
    auto body = bases.to_bytes();
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

BitString decode_basis_message(std::span<const uint8_t> message, size_t expected_count) {
    size_t pos = 0;
    uint32_t count = get_u32be(message, pos);
    if (count != expected_count)
        throw std::invalid_argument("basis message covers a different position count");
    if (message.size() != 4 + (size_t(count) + 7) / 8)
        throw std::invalid_argument("basis message truncated");
    return BitString::from_bytes(message.subspan(4), count);
}

SiftedKey sift_with_peer_bases(const BitString& my_bits, const BitString& my_bases,
                               const BitString& peer_bases,
                               const std::vector<uint32_t>& positions) {
    if (my_bits.size() != my_bases.size() || my_bases.size() != peer_bases.size() ||
        positions.size() != my_bits.size())
        throw std::invalid_argument("sift: inconsistent input lengths");
    SiftedKey out;
    for (size_t i = 0; i < positions.size(); ++i) {
        if (my_bases.bit(i) == peer_bases.bit(i)) {
            out.bits.append_bit(my_bits.bit(i));
            out.positions.push_back(positions[i]);
        }
    }
    return out;
}

SiftResult sift_bases(const std::vector<PulseRecord>& sender_records,
                      const std::vector<DetectionEvent>& receiver_events) {
    auto valid = report_valid_detections(receiver_events);

    BitString a_bits, a_bases, b_bits, b_bases;
    for (uint32_t idx : valid) {
        const auto& p = sender_records.at(idx);
        const auto& e = receiver_events.at(idx);
        a_bits.append_bit(p.bit);
        a_bases.append_bit(p.basis == Basis::X);
        b_bits.append_bit(e.bit);
        b_bases.append_bit(e.basis == Basis::X);
    }

    SiftResult out;
    out.basis_message_a = encode_basis_message(a_bases);
    out.basis_message_b = encode_basis_message(b_bases);
    out.alice = sift_with_peer_bases(a_bits, a_bases, b_bases, valid);
    out.bob = sift_with_peer_bases(b_bits, b_bases, a_bases, valid);
    return out;
}

std::vector<uint32_t> qber_sample_positions(size_t key_len, double sample_fraction,
                                            uint64_t coin) {
    if (!(sample_fraction > 0.0 && sample_fraction < 1.0))
        throw std::invalid_argument("sample_fraction must lie in (0,1)");
    uint32_t m = uint32_t(double(key_len) * sample_fraction);
    if (m == 0 && key_len > 1) m = 1;
    if (m == 0) throw std::invalid_argument("estimate_qber: empty sample");
    DetRng rng = DetRng::derive(coin, "qber-sample");
    return rng.sample_without_replacement(uint32_t(key_len), m);
}

BitString remove_positions(const BitString& bits, const std::vector<uint32_t>& sorted_positions) {
    BitString out;
    size_t next = 0;
    for (size_t i = 0; i < bits.size(); ++i) {
        if (next < sorted_positions.size() && sorted_positions[next] == i) {
            ++next;
            continue;
        }
        out.append_bit(bits.bit(i));
    }
    return out;
}

QberEstimate estimate_qber(BitString& alice_bits, BitString& bob_bits, double sample_fraction,
                           double threshold, uint64_t coin) {
    if (alice_bits.size() != bob_bits.size())
        throw std::invalid_argument("estimate_qber: sifted keys differ in length");
    QberEstimate est;
    est.threshold = threshold;
    est.sampled_positions = qber_sample_positions(alice_bits.size(), sample_fraction, coin);
    for (uint32_t p : est.sampled_positions)
        if (alice_bits.bit(p) != bob_bits.bit(p)) ++est.errors;
    est.rate = double(est.errors) / double(est.sampled_positions.size());
    alice_bits = remove_positions(alice_bits, est.sampled_positions);
    bob_bits = remove_positions(bob_bits, est.sampled_positions);
    return est;
}

Digest verification_digest(const BitString& key, const BitString& round_nonce,
                           const std::string& direction_label, size_t digest_bits) {
    if (key.empty()) throw std::invalid_argument("verification_digest: empty key");
    std::vector<uint8_t> buf;
    auto nonce = round_nonce.to_bytes();
    put_field(buf, nonce);
    put_field(buf, std::span(reinterpret_cast<const uint8_t*>(direction_label.data()),
                             direction_label.size()));
    auto body = key.to_bytes();
    put_field(buf, body);
    return hash_digest(buf, digest_bits);
}

double binary_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

uint64_t compute_final_length(uint64_t corrected_len, double qber, const LeakageLedger& ledger) {
    if (!(qber >= 0.0 && qber <= 1.0))
        throw std::invalid_argument("compute_final_length: qber out of range");
    // long double keeps the floor stable against double rounding at
    // desk-scale key lengths.
    long double p = qber;
    long double h2 = 0.0L;
    if (p > 0.0L && p < 1.0L) h2 = -(p * std::log2(p) + (1.0L - p) * std::log2(1.0L - p));
    long double secret = floorl((long double)corrected_len * (1.0L - h2));
    long double ell = secret - (long double)ledger.total();
    if (ell <= 0.0L) return 0;
    return uint64_t(ell);
}

FinalKey privacy_amplify(const CorrectedKey& corrected, const ToeplitzSeed& seed,
                         uint32_t round_index) {
    if (seed.in_len != corrected.bits.size())
        throw std::invalid_argument("privacy_amplify: seed.in_len != corrected key length");
    FinalKey out;
    out.round_index = round_index;
    out.bits = toeplitz_hash(seed, corrected.bits);
    return out;
}

uint64_t second_amplification_length(uint64_t final_len, uint64_t digest_leak2, uint64_t margin2) {
    if (final_len <= digest_leak2 + margin2) return 0;
    return final_len - digest_leak2 - margin2;
}

FinalKey second_amplification(const FinalKey& final_key, const ToeplitzSeed& seed2,
                              uint64_t digest_leak2, uint64_t margin2) {
    uint64_t out_len = second_amplification_length(final_key.bits.size(), digest_leak2, margin2);
    if (out_len == 0) throw std::invalid_argument("second_amplification: nonpositive output length");
    if (seed2.in_len != final_key.bits.size() || seed2.out_len != out_len)
        throw std::invalid_argument("second_amplification: seed dimensions mismatch");
    FinalKey out;
    out.round_index = final_key.round_index;
    out.bits = toeplitz_hash(seed2, final_key.bits);
    return out;
}

SplitKey split_final_key(const FinalKey& final_key, uint64_t next_round_budget) {
    if (final_key.bits.size() < next_round_budget)
        throw std::invalid_argument("split_final_key: key shorter than authentication budget");
    SplitKey out;
    out.reserved_auth_slice = final_key.bits.slice(0, next_round_budget);
    out.stored_key =
        final_key.bits.slice(next_round_budget, final_key.bits.size() - next_round_budget);
    return out;
}

}  // namespace qkdauth
