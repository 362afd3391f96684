#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qkdauth/rng.hpp"

namespace qkdauth {

enum class Basis : uint8_t { Z = 0, X = 1 };
enum class Intensity : uint8_t { Signal = 0, Vacuum = 1 };

/// One prepared pulse. Vacuum pulses carry no usable bit; their bit
/// field is ignored everywhere.
struct PulseRecord {
    uint32_t index = 0;
    Basis basis = Basis::Z;
    uint8_t bit = 0;
    Intensity intensity = Intensity::Signal;
};

struct ChannelConfig {
    double transmittance = 1.0;
    double flip_prob = 0.0;
    double detector_efficiency = 1.0;
    double dark_count_prob = 0.0;
    uint32_t pulse_count = 0;

    void validate() const;
};

struct DetectionEvent {
    uint32_t index = 0;
    Basis basis = Basis::Z;
    uint8_t bit = 0;
    bool detected = false;
};

/// BB84 preparation: pulse_count signal pulses with independent uniform
/// basis and bit (single-photon idealization, no decoy states).
std::vector<PulseRecord> prepare_pulses(DetRng& rng, const ChannelConfig& config);

/// Lossy, noisy transmission and measurement. Signal pulses are detected
/// with probability transmittance * detector_efficiency and measured in
/// an independent uniform basis; matched-basis outcomes flip with
/// flip_prob, mismatched-basis outcomes are uniform. Vacuum pulses fire
/// only through dark counts, with uniform outcome.
std::vector<DetectionEvent> transmit_and_measure(const std::vector<PulseRecord>& pulses,
                                                 const ChannelConfig& config, DetRng& rng);

/// Adversary hook on the quantum wire. on_pulses may substitute the
/// pulse train; a passive tap returns nullopt and leaves the honest
/// parties' distribution untouched.
class WireTap {
public:
    virtual ~WireTap() = default;
    virtual std::optional<std::vector<PulseRecord>> on_pulses(
        const std::vector<PulseRecord>& pulses) = 0;
};

/// Applies the tap (when present) and transmits. Returns the events the
/// receiver observes.
std::vector<DetectionEvent> transmit_with_tap(const std::vector<PulseRecord>& pulses,
                                              const ChannelConfig& config, DetRng& rng,
                                              WireTap* tap);

}  // namespace qkdauth
