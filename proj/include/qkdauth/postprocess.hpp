#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qkdauth/bitstring.hpp"
#include "qkdauth/channel.hpp"
#include "qkdauth/crypto.hpp"

namespace qkdauth {

/// Indices with detected=true; everything else is discarded by both
/// sides before sifting.
std::vector<uint32_t> report_valid_detections(const std::vector<DetectionEvent>& events);

struct SiftedKey {
    BitString bits;
    std::vector<uint32_t> positions;  // strictly increasing, into the pulse train
};

/// Canonical basis-sift message: u32be count, then one basis bit per
/// valid position (Z=0, X=1), packed as BitString bytes.
std::vector<uint8_t> encode_basis_message(const BitString& bases);
BitString decode_basis_message(std::span<const uint8_t> message, size_t expected_count);

/// Retains the positions where both basis strings agree. `positions`
/// maps entry i of the basis strings back to a pulse index.
SiftedKey sift_with_peer_bases(const BitString& my_bits, const BitString& my_bases,
                               const BitString& peer_bases,
                               const std::vector<uint32_t>& positions);

/// Two-sided convenience used by tests and oracles: sender records plus
/// receiver events in, both sifted keys and the two basis messages out.
struct SiftResult {
    SiftedKey alice;
    SiftedKey bob;
    std::vector<uint8_t> basis_message_a;
    std::vector<uint8_t> basis_message_b;
};
SiftResult sift_bases(const std::vector<PulseRecord>& sender_records,
                      const std::vector<DetectionEvent>& receiver_events);

struct QberEstimate {
    std::vector<uint32_t> sampled_positions;  // indices into the sifted key
    uint32_t errors = 0;
    double rate = 0.0;
    double threshold = 0.0;

    bool over_threshold() const { return rate > threshold; }
};

/// Chooses the public sample with `coin`, compares the revealed bits and
/// removes the sample from both keys. Throws if the sample would be
/// empty.
QberEstimate estimate_qber(BitString& alice_bits, BitString& bob_bits, double sample_fraction,
                           double threshold, uint64_t coin);

/// Sample positions alone, for per-side protocol use (both sides derive
/// the identical set from the shared coin).
std::vector<uint32_t> qber_sample_positions(size_t key_len, double sample_fraction, uint64_t coin);
BitString remove_positions(const BitString& bits, const std::vector<uint32_t>& sorted_positions);

struct CorrectedKey {
    BitString bits;
    uint64_t ec_leak_bits = 0;
};

/// Two-way verification digest with direction labels, so the two digests
/// of one verification phase never coincide. The round nonce is derived
/// from both basis-sift messages upstream.
Digest verification_digest(const BitString& key, const BitString& round_nonce,
                           const std::string& direction_label, size_t digest_bits);

struct LeakageLedger {
    uint64_t ec_leak_bits = 0;
    uint64_t digest_leak_bits = 0;  // cleartext or PQC-encrypted digests, counted in full
    uint64_t margin_bits = 0;

    uint64_t total() const { return ec_leak_bits + digest_leak_bits + margin_bits; }
};

double binary_entropy(double p);

/// Final key length: floor(k * (1 - h2(qber))) minus every ledger
/// component, clamped at 0. A zero result aborts the round upstream.
uint64_t compute_final_length(uint64_t corrected_len, double qber, const LeakageLedger& ledger);

struct FinalKey {
    BitString bits;
    uint32_t round_index = 0;
};

/// Toeplitz compression of the corrected key. seed.in_len must equal the
/// corrected length and seed.out_len the computed final length.
FinalKey privacy_amplify(const CorrectedKey& corrected, const ToeplitzSeed& seed,
                         uint32_t round_index);

/// Round-1 second compression that strips the final-verification digest
/// leak: output length = input length - digest_leak2 - margin2.
FinalKey second_amplification(const FinalKey& final_key, const ToeplitzSeed& seed2,
                              uint64_t digest_leak2, uint64_t margin2 = 0);
uint64_t second_amplification_length(uint64_t final_len, uint64_t digest_leak2,
                                     uint64_t margin2 = 0);

/// Disjoint split: the reserved prefix funds the next round's symmetric
/// authentication, the remainder goes to the key pool. Throws when the
/// key cannot cover the budget (the chain cannot continue).
struct SplitKey {
    BitString reserved_auth_slice;
    BitString stored_key;
};
SplitKey split_final_key(const FinalKey& final_key, uint64_t next_round_budget);

}  // namespace qkdauth
