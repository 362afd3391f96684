#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "qkdauth/error_correction.hpp"
#include "qkdauth/rng.hpp"

using namespace qkdauth;

namespace {

BitString with_planted_errors(const BitString& ref, double rate, DetRng& rng, size_t* count) {
    BitString out = ref;
    size_t planted = 0;
    for (size_t i = 0; i < out.size(); ++i) {
        if (rng.bernoulli(rate)) {
            out.set_bit(i, !out.bit(i));
            ++planted;
        }
    }
    if (count) *count = planted;
    return out;
}

uint64_t recount_disclosed(const EcTrace& trace) {
    uint64_t total = 0;
    for (const auto& msg : trace.messages) total += msg.parities.size();
    return total;
}

}  // namespace

TEST_CASE("zero-error keys: no corrections, leak equals the schedule recount") {
    DetRng rng(1);
    BitString ref = BitString::random(rng, 5000);
    BitString cor = ref;
    EcTrace trace = correct_errors(ref, cor, 0.0, 99);
    CHECK(cor == ref);
    CHECK(trace.corrected_bits == 0);
    CHECK(trace.converged);
    CHECK(trace.disclosed_bits == recount_disclosed(trace));
    // two clean block passes, then 20 two-bit subset confirmations
    CHECK(trace.passes == 2);
    size_t b = ec_initial_block_size(0.0, 5000);
    uint64_t per_pass = 2 * ((5000 + b - 1) / b);
    CHECK(trace.disclosed_bits == 2 * per_pass + 2 * 20);
}

TEST_CASE("single flipped bit is located and fixed") {
    DetRng rng(2);
    for (int iter = 0; iter < 20; ++iter) {
        BitString ref = BitString::random(rng, 2000);
        BitString cor = ref;
        size_t pos = size_t(rng.uniform_below(2000));
        cor.set_bit(pos, !cor.bit(pos));
        EcTrace trace = correct_errors(ref, cor, 0.01, 7 + iter);
        CHECK(cor == ref);
        CHECK(trace.corrected_bits >= 1);
        CHECK(trace.converged);
    }
}

TEST_CASE("random instances at realistic error rates reconcile") {
    DetRng rng(3);
    for (int iter = 0; iter < 30; ++iter) {
        double rate = 0.005 + 0.005 * double(iter % 5);
        size_t n = 3000 + size_t(rng.uniform_below(3000));
        BitString ref = BitString::random(rng, n);
        size_t planted = 0;
        BitString cor = with_planted_errors(ref, rate, rng, &planted);
        EcTrace trace = correct_errors(ref, cor, rate, 1000 + iter);
        CHECK(cor == ref);
        CHECK(trace.corrected_bits == planted);
        CHECK(trace.disclosed_bits == recount_disclosed(trace));
    }
}

TEST_CASE("reference key is never modified") {
    DetRng rng(4);
    BitString ref = BitString::random(rng, 1500);
    BitString snapshot = ref;
    BitString cor = with_planted_errors(ref, 0.05, rng, nullptr);
    correct_errors(ref, cor, 0.05, 5);
    CHECK(ref == snapshot);
}

TEST_CASE("disclosure grows with the error rate") {
    DetRng rng(5);
    BitString ref = BitString::random(rng, 20000);
    BitString low = with_planted_errors(ref, 0.01, rng, nullptr);
    BitString high = with_planted_errors(ref, 0.08, rng, nullptr);
    EcTrace t_low = correct_errors(ref, low, 0.01, 6);
    EcTrace t_high = correct_errors(ref, high, 0.08, 6);
    CHECK(t_low.disclosed_bits < t_high.disclosed_bits);
    CHECK(low == ref);
    CHECK(high == ref);
}

TEST_CASE("messages alternate reference/corrector with equal lengths per layer") {
    DetRng rng(6);
    BitString ref = BitString::random(rng, 4000);
    BitString cor = with_planted_errors(ref, 0.03, rng, nullptr);
    EcTrace trace = correct_errors(ref, cor, 0.03, 8);
    REQUIRE(trace.messages.size() % 2 == 0);
    for (size_t i = 0; i < trace.messages.size(); i += 2) {
        CHECK(trace.messages[i].from_reference);
        CHECK_FALSE(trace.messages[i + 1].from_reference);
        CHECK(trace.messages[i].parities.size() == trace.messages[i + 1].parities.size());
        CHECK(trace.messages[i].pass == trace.messages[i + 1].pass);
        CHECK(trace.messages[i].level == trace.messages[i + 1].level);
    }
}

TEST_CASE("pathological residuals surface as non-convergence, not silence") {
    // 50% error rate with a misleadingly low estimate: whatever happens,
    // the trace must tell the truth about whether keys reconciled.
    DetRng rng(7);
    BitString ref = BitString::random(rng, 512);
    BitString cor = with_planted_errors(ref, 0.5, rng, nullptr);
    EcTrace trace = correct_errors(ref, cor, 0.01, 9);
    if (cor != ref) CHECK_FALSE(trace.converged);
    CHECK(trace.disclosed_bits == recount_disclosed(trace));
}

TEST_CASE("tiny and empty keys") {
    DetRng rng(8);
    BitString empty_ref, empty_cor;
    EcTrace t0 = correct_errors(empty_ref, empty_cor, 0.0, 1);
    CHECK(t0.converged);
    CHECK(t0.disclosed_bits == 0);

    BitString one_ref = BitString::from_string("1");
    BitString one_cor = BitString::from_string("0");
    EcTrace t1 = correct_errors(one_ref, one_cor, 0.5, 2);
    CHECK(one_cor == one_ref);

    CHECK_THROWS_AS(correct_errors(one_ref, empty_cor, 0.0, 3), std::invalid_argument);
}

TEST_CASE("initial block size follows the estimated rate") {
    CHECK(ec_initial_block_size(0.02, 100000) == 37);  // ceil(0.73/0.02)
    CHECK(ec_initial_block_size(0.1, 100000) == 8);    // clamped from 8
    CHECK(ec_initial_block_size(0.5, 100000) == 8);
    CHECK(ec_initial_block_size(0.0, 100000) == 1024);  // capped
    CHECK(ec_initial_block_size(1e-6, 10000) == 5000);  // half the key
}
