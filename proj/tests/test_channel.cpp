#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "qkdauth/channel.hpp"
#include "qkdauth/postprocess.hpp"

using namespace qkdauth;

namespace {

ChannelConfig make_config(uint32_t pulses, double t = 1.0, double flip = 0.0, double eff = 1.0,
                          double dark = 0.0) {
    ChannelConfig c;
    c.pulse_count = pulses;
    c.transmittance = t;
    c.flip_prob = flip;
    c.detector_efficiency = eff;
    c.dark_count_prob = dark;
    return c;
}

}  // namespace

TEST_CASE("prepare_pulses: empty, reproducible, uniform") {
    DetRng rng(1);
    CHECK(prepare_pulses(rng, make_config(0)).empty());

    DetRng r1(42), r2(42);
    auto a = prepare_pulses(r1, make_config(1000));
    auto b = prepare_pulses(r2, make_config(1000));
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].basis == b[i].basis);
        CHECK(a[i].bit == b[i].bit);
        CHECK(a[i].intensity == Intensity::Signal);
        CHECK(a[i].index == i);
    }

    // 1e5 pulses: basis and bit frequencies within 3 sigma of 1/2
    DetRng r3(7);
    auto pulses = prepare_pulses(r3, make_config(100000));
    size_t x_count = 0, ones = 0;
    for (const auto& p : pulses) {
        x_count += p.basis == Basis::X;
        ones += p.bit;
    }
    double sigma = std::sqrt(100000.0 * 0.25);
    CHECK(std::abs(double(x_count) - 50000.0) < 3 * sigma);
    CHECK(std::abs(double(ones) - 50000.0) < 3 * sigma);
}

TEST_CASE("ideal channel: everything detected, matched bases agree") {
    DetRng rng(2);
    auto pulses = prepare_pulses(rng, make_config(5000));
    auto events = transmit_and_measure(pulses, make_config(5000), rng);
    REQUIRE(events.size() == pulses.size());
    for (size_t i = 0; i < events.size(); ++i) {
        CHECK(events[i].detected);
        if (events[i].basis == pulses[i].basis) CHECK(events[i].bit == pulses[i].bit);
    }
}

TEST_CASE("zero transmittance with no dark counts: silence") {
    DetRng rng(3);
    auto pulses = prepare_pulses(rng, make_config(2000, 0.0));
    auto events = transmit_and_measure(pulses, make_config(2000, 0.0), rng);
    for (const auto& e : events) CHECK_FALSE(e.detected);
}

TEST_CASE("detection rate converges to transmittance * efficiency") {
    DetRng rng(4);
    auto cfg = make_config(100000, 0.7, 0.0, 0.8);
    auto pulses = prepare_pulses(rng, cfg);
    auto events = transmit_and_measure(pulses, cfg, rng);
    size_t detected = 0;
    for (const auto& e : events) detected += e.detected;
    double p = 0.7 * 0.8;
    double sigma = std::sqrt(100000.0 * p * (1 - p));
    CHECK(std::abs(double(detected) - 100000.0 * p) < 3 * sigma);
}

TEST_CASE("matched-basis flip rate converges to flip_prob, mismatched to 1/2") {
    DetRng rng(5);
    auto cfg = make_config(100000, 1.0, 0.05);
    auto pulses = prepare_pulses(rng, cfg);
    auto events = transmit_and_measure(pulses, cfg, rng);

    size_t matched = 0, flipped = 0, mismatched = 0, mismatch_errors = 0;
    for (size_t i = 0; i < events.size(); ++i) {
        if (!events[i].detected) continue;
        if (events[i].basis == pulses[i].basis) {
            ++matched;
            flipped += events[i].bit != pulses[i].bit;
        } else {
            ++mismatched;
            mismatch_errors += events[i].bit != pulses[i].bit;
        }
    }
    double sigma_m = std::sqrt(double(matched) * 0.05 * 0.95);
    CHECK(std::abs(double(flipped) - double(matched) * 0.05) < 3 * sigma_m);
    double sigma_x = std::sqrt(double(mismatched) * 0.25);
    CHECK(std::abs(double(mismatch_errors) - double(mismatched) * 0.5) < 3 * sigma_x);
}

TEST_CASE("vacuum pulses fire only via dark counts") {
    DetRng rng(6);
    std::vector<PulseRecord> pulses(50000);
    for (size_t i = 0; i < pulses.size(); ++i) {
        pulses[i].index = uint32_t(i);
        pulses[i].intensity = Intensity::Vacuum;
    }
    auto quiet = transmit_and_measure(pulses, make_config(50000, 1.0, 0.0, 1.0, 0.0), rng);
    for (const auto& e : quiet) CHECK_FALSE(e.detected);

    auto noisy = transmit_and_measure(pulses, make_config(50000, 1.0, 0.0, 1.0, 0.01), rng);
    size_t fired = 0;
    for (const auto& e : noisy) fired += e.detected;
    double sigma = std::sqrt(50000.0 * 0.01 * 0.99);
    CHECK(std::abs(double(fired) - 500.0) < 3 * sigma);
}

TEST_CASE("same seed gives a bit-identical transmission") {
    auto cfg = make_config(3000, 0.6, 0.03, 0.9, 0.001);
    DetRng prep(8);
    auto pulses = prepare_pulses(prep, cfg);
    DetRng r1(9), r2(9);
    auto e1 = transmit_and_measure(pulses, cfg, r1);
    auto e2 = transmit_and_measure(pulses, cfg, r2);
    REQUIRE(e1.size() == e2.size());
    for (size_t i = 0; i < e1.size(); ++i) {
        CHECK(e1[i].detected == e2[i].detected);
        CHECK(e1[i].bit == e2[i].bit);
        CHECK(e1[i].basis == e2[i].basis);
    }
}

namespace {

struct PassiveTap : WireTap {
    size_t calls = 0;
    std::optional<std::vector<PulseRecord>> on_pulses(
        const std::vector<PulseRecord>&) override {
        ++calls;
        return std::nullopt;
    }
};

struct SubstitutingTap : WireTap {
    std::vector<PulseRecord> replacement;
    std::optional<std::vector<PulseRecord>> on_pulses(
        const std::vector<PulseRecord>&) override {
        return replacement;
    }
};

}  // namespace

TEST_CASE("passive tap leaves the honest outcome bit-identical") {
    auto cfg = make_config(2000, 0.8, 0.02);
    DetRng prep(10);
    auto pulses = prepare_pulses(prep, cfg);

    DetRng r1(11), r2(11);
    auto plain = transmit_with_tap(pulses, cfg, r1, nullptr);
    PassiveTap tap;
    auto tapped = transmit_with_tap(pulses, cfg, r2, &tap);
    CHECK(tap.calls == 1);
    REQUIRE(plain.size() == tapped.size());
    for (size_t i = 0; i < plain.size(); ++i) {
        CHECK(plain[i].detected == tapped[i].detected);
        CHECK(plain[i].bit == tapped[i].bit);
        CHECK(plain[i].basis == tapped[i].basis);
    }
}

TEST_CASE("substituted all-signal train is fully detected on a lossless wire") {
    auto cfg = make_config(500);
    DetRng prep(12);
    SubstitutingTap tap;
    tap.replacement = prepare_pulses(prep, cfg);

    DetRng r(13);
    std::vector<PulseRecord> original(500);  // what Alice actually sent; irrelevant
    for (size_t i = 0; i < original.size(); ++i) original[i].index = uint32_t(i);
    auto events = transmit_with_tap(original, cfg, r, &tap);
    for (const auto& e : events) CHECK(e.detected);
}

TEST_CASE("vacuum-inserted replay: detections land exactly on the signal positions") {
    // Eve pads signal states with vacuum; on a lossless wire the
    // receiver's valid positions reproduce Eve's signal positions.
    DetRng rng(14);
    std::vector<PulseRecord> train(1000);
    std::vector<uint32_t> signal_positions;
    for (size_t i = 0; i < train.size(); ++i) {
        train[i].index = uint32_t(i);
        if (rng.bernoulli(0.6)) {
            train[i].intensity = Intensity::Signal;
            train[i].basis = rng.bit() ? Basis::X : Basis::Z;
            train[i].bit = rng.bit() ? 1 : 0;
            signal_positions.push_back(uint32_t(i));
        } else {
            train[i].intensity = Intensity::Vacuum;
        }
    }
    auto events = transmit_and_measure(train, make_config(1000), rng);
    CHECK(report_valid_detections(events) == signal_positions);
}
