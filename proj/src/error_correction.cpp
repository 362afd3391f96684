#include "qkdauth/error_correction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qkdauth/rng.hpp"

namespace qkdauth {

namespace {

constexpr uint32_t kMaxPasses = 32;
constexpr size_t kBlockSizeCap = 1024;
// Consecutive clean subset parities required after the block passes; a
// surviving error pattern slips through one subset with probability 1/2,
// so the silent-failure bound is 2^-20.
constexpr uint32_t kConfirmTarget = 20;

struct Interval {
    size_t begin;
    size_t end;  // half-open, into an ordering of key positions
};

bool parity_over(const BitString& key, const std::vector<uint32_t>& order, size_t begin,
                 size_t end) {
    bool p = false;
    for (size_t i = begin; i < end; ++i) p ^= key.bit(order[i]);
    return p;
}

}  // namespace

size_t ec_initial_block_size(double qber_estimate, size_t key_len) {
    if (key_len == 0) return 0;
    size_t half = std::max<size_t>(1, key_len / 2);
    if (qber_estimate <= 0.0) return std::min<size_t>(half, kBlockSizeCap);
    size_t b = size_t(std::ceil(0.73 / qber_estimate));
    return std::clamp<size_t>(b, std::min<size_t>(8, half), half);
}

EcTrace correct_errors(const BitString& reference, BitString& corrector, double qber_estimate,
                       uint64_t coin) {
    if (reference.size() != corrector.size())
        throw std::invalid_argument("correct_errors: key length mismatch");
    EcTrace trace;
    const size_t n = reference.size();
    if (n == 0) {
        trace.converged = true;
        return trace;
    }

    const size_t b1 = ec_initial_block_size(qber_estimate, n);
    const size_t cap = std::max(b1, std::min(n / 2 > 0 ? n / 2 : 1, kBlockSizeCap));

    auto send = [&trace](uint32_t pass, uint32_t level, bool from_ref, BitString parities) {
        trace.disclosed_bits += parities.size();
        trace.messages.push_back(EcMessage{pass, level, from_ref, std::move(parities)});
    };

    // Bisection over mismatched intervals of `order`: both sides
    // disclose left-half parities per level, the corrector flips the
    // located bit of every interval.
    auto bisect = [&](const std::vector<uint32_t>& order, std::vector<Interval> active,
                      uint32_t pass) {
        uint32_t level = 0;
        while (!active.empty()) {
            ++level;
            std::vector<Interval> halves, next;
            for (const auto& iv : active) {
                if (iv.end - iv.begin == 1) {
                    corrector.set_bit(order[iv.begin], !corrector.bit(order[iv.begin]));
                    ++trace.corrected_bits;
                } else {
                    halves.push_back(iv);
                }
            }
            if (halves.empty()) break;

            BitString ref_half(halves.size()), cor_half(halves.size());
            for (size_t i = 0; i < halves.size(); ++i) {
                size_t mid = halves[i].begin + (halves[i].end - halves[i].begin) / 2;
                if (parity_over(reference, order, halves[i].begin, mid))
                    ref_half.set_bit(i, true);
                if (parity_over(corrector, order, halves[i].begin, mid))
                    cor_half.set_bit(i, true);
            }
            send(pass, level, true, ref_half);
            send(pass, level, false, cor_half);

            for (size_t i = 0; i < halves.size(); ++i) {
                size_t mid = halves[i].begin + (halves[i].end - halves[i].begin) / 2;
                if (ref_half.bit(i) != cor_half.bit(i))
                    next.push_back(Interval{halves[i].begin, mid});
                else
                    next.push_back(Interval{mid, halves[i].end});
            }
            active = std::move(next);
        }
    };

    // Block passes: shuffled partitions with block sizes doubling up to
    // a cap. Two consecutive passes without mismatches hand over to the
    // subset confirmations.
    uint32_t clean_streak = 0;
    size_t block = b1;
    bool blocks_settled = false;
    for (uint32_t pass = 1; pass <= kMaxPasses; ++pass) {
        trace.passes = pass;

        std::vector<uint32_t> perm(n);
        for (size_t i = 0; i < n; ++i) perm[i] = uint32_t(i);
        if (pass > 1) {
            DetRng prng = DetRng::derive(coin, "ec-perm", pass);
            prng.shuffle(perm);
        }

        std::vector<Interval> blocks;
        for (size_t begin = 0; begin < n; begin += block)
            blocks.push_back(Interval{begin, std::min(begin + block, n)});

        BitString ref_par(blocks.size()), cor_par(blocks.size());
        for (size_t i = 0; i < blocks.size(); ++i) {
            if (parity_over(reference, perm, blocks[i].begin, blocks[i].end))
                ref_par.set_bit(i, true);
            if (parity_over(corrector, perm, blocks[i].begin, blocks[i].end))
                cor_par.set_bit(i, true);
        }
        send(pass, 0, true, ref_par);
        send(pass, 0, false, cor_par);

        std::vector<Interval> active;
        for (size_t i = 0; i < blocks.size(); ++i)
            if (ref_par.bit(i) != cor_par.bit(i)) active.push_back(blocks[i]);

        if (active.empty()) {
            if (++clean_streak >= 2 && pass >= 2) {
                blocks_settled = true;
                break;
            }
        } else {
            clean_streak = 0;
            bisect(perm, active, pass);
        }

        block = std::min(block * 2, cap);
    }
    if (!blocks_settled) return trace;  // converged stays false

    // Confirmation rounds: parity of a coin-chosen half of the key from
    // both sides. A mismatch locates and fixes one error via bisection
    // and restarts the clean count.
    const size_t subset_len = (n + 1) / 2;
    const uint32_t confirm_cap = kConfirmTarget + 44 + uint32_t(std::min<size_t>(n, 1u << 20));
    uint32_t clean = 0;
    for (uint32_t iter = 1; iter <= confirm_cap && clean < kConfirmTarget; ++iter) {
        DetRng crng = DetRng::derive(coin, "ec-confirm", iter);
        std::vector<uint32_t> order(n);
        for (size_t i = 0; i < n; ++i) order[i] = uint32_t(i);
        crng.shuffle(order);
        order.resize(subset_len);

        const uint32_t pass_label = kMaxPasses + iter;
        BitString ref_bit(1), cor_bit(1);
        if (parity_over(reference, order, 0, subset_len)) ref_bit.set_bit(0, true);
        if (parity_over(corrector, order, 0, subset_len)) cor_bit.set_bit(0, true);
        send(pass_label, 0, true, ref_bit);
        send(pass_label, 0, false, cor_bit);

        if (ref_bit == cor_bit) {
            ++clean;
        } else {
            clean = 0;
            bisect(order, {Interval{0, subset_len}}, pass_label);
        }
    }
    trace.converged = clean >= kConfirmTarget;
    return trace;
}

}  // namespace qkdauth
