#include "qkdauth/channel.hpp"

#include <stdexcept>

namespace qkdauth {

void ChannelConfig::validate() const {
    auto check01 = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument(std::string("channel.") + name +
                                        " must be within [0,1]");
    };
    check01(transmittance, "transmittance");
    check01(flip_prob, "flip_prob");
    check01(detector_efficiency, "detector_efficiency");
    check01(dark_count_prob, "dark_count_prob");
}

std::vector<PulseRecord> prepare_pulses(DetRng& rng, const ChannelConfig& config) {
    config.validate();
    std::vector<PulseRecord> pulses(config.pulse_count);
    for (uint32_t i = 0; i < config.pulse_count; ++i) {
        pulses[i].index = i;
        pulses[i].basis = rng.bit() ? Basis::X : Basis::Z;
        pulses[i].bit = rng.bit() ? 1 : 0;
        pulses[i].intensity = Intensity::Signal;
    }
    return pulses;
}

std::vector<DetectionEvent> transmit_and_measure(const std::vector<PulseRecord>& pulses,
                                                 const ChannelConfig& config, DetRng& rng) {
    config.validate();
    std::vector<DetectionEvent> events(pulses.size());
    const double p_detect = config.transmittance * config.detector_efficiency;
    for (size_t i = 0; i < pulses.size(); ++i) {
        const PulseRecord& p = pulses[i];
        DetectionEvent& e = events[i];
        e.index = p.index;
        if (p.intensity == Intensity::Vacuum) {
            e.detected = rng.bernoulli(config.dark_count_prob);
            if (e.detected) {
                e.basis = rng.bit() ? Basis::X : Basis::Z;
                e.bit = rng.bit() ? 1 : 0;
            }
            continue;
        }
        e.detected = rng.bernoulli(p_detect);
        if (!e.detected) continue;
        e.basis = rng.bit() ? Basis::X : Basis::Z;
        if (e.basis == p.basis) {
            bool flip = rng.bernoulli(config.flip_prob);
            e.bit = uint8_t(p.bit ^ (flip ? 1 : 0));
        } else {
            e.bit = rng.bit() ? 1 : 0;
        }
    }
    return events;
}

std::vector<DetectionEvent> transmit_with_tap(const std::vector<PulseRecord>& pulses,
                                              const ChannelConfig& config, DetRng& rng,
                                              WireTap* tap) {
    if (tap != nullptr) {
        auto substituted = tap->on_pulses(pulses);
        if (substituted.has_value()) return transmit_and_measure(*substituted, config, rng);
    }
    return transmit_and_measure(pulses, config, rng);
}

}  // namespace qkdauth
