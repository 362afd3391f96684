#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qkdauth/engine.hpp"

namespace qkdauth {

/// One attack trial. Phases count as passed when the victim's
/// verification accepted the forged/replayed envelope; success requires
/// all four phases plus matching final keys, which never happens at
/// realistic key lengths.
struct AttackOutcome {
    std::optional<Phase> deepest_phase_passed;
    std::string aborted_at;  // stage label; empty on success
    bool success = false;
    uint64_t victim_corrected_bits = 0;
};

struct AttackStats {
    std::string scenario;
    uint32_t trials = 0;
    uint32_t successes = 0;
    std::map<std::string, uint32_t> aborted_at;
    std::map<std::string, uint32_t> deepest_phase_passed;
    uint64_t min_corrected_key_bits = 0;
    bool late_forgery_model = false;
    uint64_t stored_pool_bits_transmitted = 0;  // structural: stored keys never hit the wire
};

struct MitmScenarioConfig {
    std::string scenario = "insider-ex-bob";
    uint32_t trials = 1000;
    uint64_t seed = 1;
    /// Pulses per round, recorded session and attack sessions alike.
    uint32_t pulse_count = 8192;
    /// Channel of the recorded legitimate session; loss here is what the
    /// vacuum-insertion trick compensates for.
    ChannelConfig recorded_channel{0.75, 0.0, 1.0, 0.0, 8192};
    /// Degrade the Eve->victim wire instead of giving Eve ideal
    /// conditions; basis-sift replay then dies on position mismatch.
    bool lossy_attack_wire = false;
    /// Model the PQC primitives as broken once the round is over. No
    /// extra capability inside a round; the stats record that stored
    /// pool bits were never transmitted.
    bool late_forgery = false;
};

/// Names accepted by run_full_mitm and the CLI:
///   outsider-nocert   Eve without a CA-signed certificate
///   outsider-replay   transcript-only Eve replays Alice toward Bob
///   insider-ex-bob    ex-Bob (with past keys) impersonates Alice toward Charlie
///   insider-ex-alice  ex-Alice impersonates Bob toward transmitter Charlie
std::vector<std::string> standard_attack_scenarios();

/// Environment for attack trials: CA, certified parties, and one
/// recorded legitimate round between Alice and Bob.
struct AttackLab {
    ProtocolParams params;
    std::unique_ptr<CertificateAuthority> ca;
    std::unique_ptr<Party> alice, bob, charlie;
    RoundRecord record;
    Transcript recorded_transcript;
};

AttackLab make_attack_lab(const MitmScenarioConfig& cfg);

/// Full man-in-the-middle campaign for one scenario.
AttackStats run_full_mitm(const MitmScenarioConfig& cfg);

struct PhaseReplay {
    bool passed = false;
    std::string reason;
};

/// Basis-sift replay in isolation (ex-Bob geometry): Eve resends signal
/// pulses at the recorded valid positions, pads with vacuum, replays the
/// recorded signed basis message. Passes on a lossless wire, dies on
/// position mismatch when the wire is lossy.
PhaseReplay replay_basis_sift(const AttackLab& lab, bool lossy_attack_wire, uint64_t trial_seed);

/// Random-number-transfer replay in isolation: the recorded envelope
/// verifies under Alice's public key; any tampering of the random bits
/// breaks it.
PhaseReplay replay_rand_transfer(const AttackLab& lab, bool tamper_message);

/// Digest-collision experiment behind the ECVerify replay: the victim's
/// fresh corrected key is uniform relative to the recorded one, so the
/// recorded digest verifies with probability 2^-k. The nonce context is
/// held fixed (the adversary's best case) to measure exactly that bound;
/// in the full protocol the per-round nonce only makes replay harder.
struct CollisionStats {
    size_t k_bits = 0;
    uint32_t trials = 0;
    uint32_t passes = 0;
    double expected_rate = 0.0;
    double expected_passes = 0.0;
    double sigma = 0.0;
    bool within_5_sigma = false;
};
CollisionStats replay_ec_verify_collision(size_t k_bits, uint32_t trials, uint64_t seed,
                                          bool victim_uses_recorded_key = false);

}  // namespace qkdauth
