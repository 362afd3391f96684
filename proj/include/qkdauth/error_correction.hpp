#pragma once

#include <cstdint>
#include <vector>

#include "qkdauth/bitstring.hpp"

namespace qkdauth {

/// One parity message on the classical channel. Every bit in `parities`
/// is a disclosed parity of the sender's key and is charged to the
/// leakage ledger.
struct EcMessage {
    uint32_t pass = 0;
    uint32_t level = 0;  // 0 = whole blocks, >0 = bisection depth
    bool from_reference = false;
    BitString parities;
};

struct EcTrace {
    std::vector<EcMessage> messages;
    uint32_t passes = 0;
    uint64_t disclosed_bits = 0;  // both directions
    uint32_t corrected_bits = 0;
    bool converged = false;  // terminated by clean passes, not the pass cap
};

/// Iterative block-parity reconciliation. Both parties disclose block
/// parities (reference first, corrector second), mismatched blocks are
/// bisected -- each level discloses the left-half parity from both
/// sides -- and the corrector flips the located bit. Passes shuffle the
/// key with a permutation drawn from the shared public coin and double
/// the block size up to a cap. After two consecutive clean passes the
/// protocol switches to confirmation rounds: both sides disclose the
/// parity of a coin-chosen half of the key, any mismatch is bisected
/// away, and termination requires 20 consecutive clean confirmations
/// (each surviving error pattern flips a confirmation with probability
/// 1/2). Residual errors beyond the caps surface as converged=false and
/// die at the verification digests, never silently.
///
/// `reference` is never modified; `corrector` converges toward it. The
/// returned trace carries the exact classical-channel transcript.
EcTrace correct_errors(const BitString& reference, BitString& corrector, double qber_estimate,
                       uint64_t coin);

/// Initial block size used for a given estimated error rate and key
/// length (0.73 / qber, clamped).
size_t ec_initial_block_size(double qber_estimate, size_t key_len);

}  // namespace qkdauth
