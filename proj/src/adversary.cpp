#include "qkdauth/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qkdauth/sha256.hpp"

namespace qkdauth {

namespace {

BitString decode_bases(const AuthEnvelope& basis_env, size_t count) {
    return decode_basis_message(basis_env.message, count);
}

// Eve's forged pulse train: signal pulses with the recorded bases and
// her own random bits at the recorded valid positions, vacuum filler
// everywhere else so the victim's detection report reproduces the
// recorded one on a lossless wire.
struct ForgedTrain {
    std::vector<PulseRecord> pulses;
    BitString bits_at_positions;
};

ForgedTrain forge_pulse_train(uint32_t pulse_count, const std::vector<uint32_t>& positions,
                              const BitString& bases_at_positions, DetRng& rng) {
    ForgedTrain out;
    out.pulses.resize(pulse_count);
    for (uint32_t i = 0; i < pulse_count; ++i) {
        out.pulses[i].index = i;
        out.pulses[i].intensity = Intensity::Vacuum;
    }
    out.bits_at_positions = BitString(positions.size());
    for (size_t i = 0; i < positions.size(); ++i) {
        PulseRecord& p = out.pulses[positions[i]];
        p.intensity = Intensity::Signal;
        p.basis = bases_at_positions.bit(i) ? Basis::X : Basis::Z;
        bool bit = rng.bit();
        p.bit = bit ? 1 : 0;
        if (bit) out.bits_at_positions.set_bit(i, true);
    }
    return out;
}

// Eve measures the victim's pulses at `positions` in the given bases.
// Matched bases read the modulated bit exactly (Eve sits on an ideal
// tap); mismatched bases give a uniform outcome.
BitString measure_at(const std::vector<PulseRecord>& pulses,
                     const std::vector<uint32_t>& positions, const BitString& bases,
                     DetRng& rng) {
    BitString out(positions.size());
    for (size_t i = 0; i < positions.size(); ++i) {
        const PulseRecord& p = pulses.at(positions[i]);
        Basis b = bases.bit(i) ? Basis::X : Basis::Z;
        bool bit = (b == p.basis) ? (p.bit != 0) : rng.bit();
        if (bit) out.set_bit(i, true);
    }
    return out;
}

std::vector<uint8_t> encode_reveal(const BitString& key, const std::vector<uint32_t>& positions) {
    BitString sample(positions.size());
    for (size_t i = 0; i < positions.size(); ++i)
        if (key.bit(positions[i])) sample.set_bit(i, true);
    std::vector<uint8_t> out;
    put_u32be(out, uint32_t(sample.size()));
    auto body = sample.to_bytes();
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

uint64_t coin_from_messages(uint32_t round, std::span<const uint8_t> msg_ab,
                            std::span<const uint8_t> msg_ba) {
    std::vector<uint8_t> buf = {'c', 'o', 'i', 'n'};
    put_u32be(buf, round);
    put_field(buf, msg_ab);
    put_field(buf, msg_ba);
    auto h = sha256(buf);
    uint64_t coin = 0;
    for (int i = 0; i < 8; ++i) coin |= uint64_t(h[i]) << (8 * i);
    return coin;
}

std::vector<uint8_t> reencrypt_tag(const EncryptionKeyPair& compromised,
                                   std::span<const uint8_t> victim_enc_public,
                                   std::span<const uint8_t> recorded_ciphertext, DetRng& rng) {
    const PkeScheme& pke = pke_scheme(compromised.scheme_id);
    BitString payload = pke.decrypt(compromised.private_key, recorded_ciphertext);
    return pke.encrypt(victim_enc_public, payload, rng);
}

ChannelConfig attack_wire(const MitmScenarioConfig& cfg) {
    ChannelConfig wire;
    wire.pulse_count = cfg.pulse_count;
    wire.transmittance = cfg.lossy_attack_wire ? 0.8 : 1.0;
    wire.flip_prob = 0.0;
    wire.detector_efficiency = 1.0;
    wire.dark_count_prob = 0.0;
    return wire;
}

Certificate forge_certificate(const std::string& claimed_id, uint64_t seed, size_t l_digest) {
    // Eve runs her own CA; the resulting chain does not verify under the
    // legitimate CA key.
    DetRng rng = DetRng::derive(seed, "eve-rogue-ca");
    CertificateAuthority rogue(rng, 2, l_digest);
    auto sig_kp = signature_scheme(kLamportSchemeId).keygen(rng, SigParams{l_digest, 2});
    auto enc_kp = pke_scheme(kHybridOtpSchemeId).keygen(rng);
    return rogue.issue(claimed_id, kLamportSchemeId, sig_kp.public_key, kHybridOtpSchemeId,
                       enc_kp.public_key);
}

struct TrialSetup {
    Party* victim;
    Role victim_role;
    std::string impersonated;            // identity Eve claims
    const Party* compromised;            // insider key material, or nullptr
    const AuthEnvelope* rec_basis;       // envelope Eve replays in the basis phase
    const AuthEnvelope* rec_ec_verify;   // envelope Eve replays in the EC verification
    const AuthEnvelope* rec_final_verify;
};

// Executes one man-in-the-middle round attempt against a fresh victim
// session. The victim runs the production RoundSession; Eve supplies
// every wire input on her side.
AttackOutcome run_trial(const AttackLab& lab, const MitmScenarioConfig& cfg,
                        const TrialSetup& setup, uint32_t trial) {
    AttackOutcome out;
    const ProtocolParams& params = lab.params;
    DetRng eve_rng = DetRng::derive(cfg.seed, "eve/" + cfg.scenario, trial);

    // PKI bootstrap: Eve presents a certificate for the identity she
    // impersonates.
    Certificate presented;
    if (cfg.scenario == "outsider-nocert") {
        presented = forge_certificate(setup.impersonated, cfg.seed + trial, params.l_digest);
    } else {
        presented = setup.impersonated == lab.alice->id ? lab.alice->certificate
                                                        : lab.bob->certificate;
    }
    setup.victim->peer.reset();
    if (!accept_peer_certificate(*setup.victim, presented, setup.impersonated)) {
        out.aborted_at = "Bootstrap";
        return out;
    }
    // The victim hands over its own certificate; Eve learns the victim's
    // public keys from it.
    std::span<const uint8_t> victim_enc_public = setup.victim->certificate.enc_public;

    RoundSession victim(*setup.victim, setup.victim_role, 1, params,
                        DetRng::derive(cfg.seed, "victim/" + cfg.scenario, trial));
    DetRng wire_rng = DetRng::derive(cfg.seed, "wire/" + cfg.scenario, trial);

    const std::vector<uint32_t>& rec_positions = lab.record.valid_positions;
    BitString rec_bases = decode_bases(*setup.rec_basis, rec_positions.size());

    BitString eve_key;                 // Eve's bits at the victim's valid positions
    std::vector<uint8_t> victim_basis_msg;

    if (setup.victim_role == Role::Receiver) {
        // Eve plays the transmitter: vacuum-padded replay of the
        // recorded positions and bases, fresh random bits.
        ForgedTrain train =
            forge_pulse_train(cfg.pulse_count, rec_positions, rec_bases, eve_rng);
        auto events = transmit_and_measure(train.pulses, attack_wire(cfg), wire_rng);
        victim.observe_detections(events);
        auto report = victim.detection_report();
        (void)report;  // Eve reads it but replays regardless

        if (!victim.accept_basis_envelope(*setup.rec_basis)) {
            out.aborted_at = "BasisSift";
            return out;
        }
        AuthEnvelope victim_basis = victim.basis_envelope();
        victim_basis_msg = victim_basis.message;
        eve_key = train.bits_at_positions;
    } else {
        // Eve plays the receiver: she measures the victim's pulses in
        // the recorded bases and reports the recorded positions.
        auto pulses = victim.emit_pulses();
        if (*std::max_element(rec_positions.begin(), rec_positions.end()) >= pulses.size()) {
            out.aborted_at = "BasisSift";
            return out;
        }
        eve_key = measure_at(pulses, rec_positions, rec_bases, eve_rng);
        std::vector<uint8_t> report;
        put_u32be(report, uint32_t(rec_positions.size()));
        for (uint32_t p : rec_positions) put_u32be(report, p);
        if (!victim.accept_detection_report(report)) {
            out.aborted_at = "BasisSift";
            return out;
        }
        AuthEnvelope victim_basis = victim.basis_envelope();
        victim_basis_msg = victim_basis.message;
        if (!victim.accept_basis_envelope(*setup.rec_basis)) {
            out.aborted_at = "BasisSift";
            return out;
        }
    }
    out.deepest_phase_passed = Phase::BasisSift;

    if (!victim.complete_sift()) {
        out.aborted_at = "BasisSift";
        return out;
    }

    // Eve sifts with the same two basis strings the victim used.
    BitString victim_bases = decode_basis_message(victim_basis_msg, rec_positions.size());
    BitString eve_sifted;
    for (size_t i = 0; i < rec_positions.size(); ++i)
        if (rec_bases.bit(i) == victim_bases.bit(i)) eve_sifted.append_bit(eve_key.bit(i));

    const auto& msg_ab = setup.victim_role == Role::Receiver ? setup.rec_basis->message
                                                             : victim_basis_msg;
    const auto& msg_ba = setup.victim_role == Role::Receiver ? victim_basis_msg
                                                             : setup.rec_basis->message;
    uint64_t coin = coin_from_messages(1, msg_ab, msg_ba);

    // Error estimation: both sides reveal their sample bits.
    std::vector<uint32_t> sample;
    try {
        sample = qber_sample_positions(eve_sifted.size(), params.sample_fraction, coin);
    } catch (const std::invalid_argument&) {
        out.aborted_at = "QberEstimate";
        return out;
    }
    auto victim_reveal = victim.qber_reveal();
    (void)victim_reveal;
    auto eve_reveal = encode_reveal(eve_sifted, sample);
    if (!victim.accept_qber_reveal(eve_reveal)) {
        out.aborted_at = "QberEstimate";
        return out;
    }
    BitString eve_working = remove_positions(eve_sifted, sample);

    // Reconciliation: the A side is the reference.
    if (setup.victim_role == Role::Receiver) {
        EcTrace trace = correct_errors(eve_working, victim.working_key(), victim.qber().rate, coin);
        victim.charge_ec_leak(trace.disclosed_bits);
    } else {
        EcTrace trace = correct_errors(victim.working_key(), eve_working, victim.qber().rate, coin);
        victim.charge_ec_leak(trace.disclosed_bits);
    }
    out.victim_corrected_bits = victim.working_key().size();

    // EC verification: Eve can only replay; insiders re-wrap the
    // recorded ciphertext for the victim's key.
    AuthEnvelope forged_ecv = *setup.rec_ec_verify;
    if (setup.compromised != nullptr)
        forged_ecv.auth = reencrypt_tag(setup.compromised->enc_kp, victim_enc_public,
                                        setup.rec_ec_verify->auth, eve_rng);
    if (setup.victim_role == Role::Sender) {
        AuthEnvelope victim_ecv = victim.ec_verify_envelope();
        (void)victim_ecv;  // Eve cannot check it and does not care
    }
    if (!victim.accept_ec_verify_envelope(forged_ecv)) {
        out.aborted_at = "ECVerify";
        return out;
    }
    out.deepest_phase_passed = Phase::ECVerify;
    if (setup.victim_role == Role::Receiver) {
        AuthEnvelope victim_ecv = victim.ec_verify_envelope();
        (void)victim_ecv;
    }

    // Collision path: the replayed digest matched the victim's fresh
    // corrected key. Finish the round to test the remaining phases.
    victim.compute_ell();
    if (setup.victim_role == Role::Receiver) {
        if (!victim.accept_rand_transfer(lab.record.rand_transfer)) {
            out.aborted_at = "RandTransfer";
            return out;
        }
    } else {
        AuthEnvelope victim_rand = victim.rand_transfer_envelope();
        (void)victim_rand;  // Eve, as receiver, raises no objection
    }
    out.deepest_phase_passed = Phase::RandTransfer;

    victim.amplify();
    AuthEnvelope forged_fv = *setup.rec_final_verify;
    if (setup.compromised != nullptr)
        forged_fv.auth = reencrypt_tag(setup.compromised->enc_kp, victim_enc_public,
                                       setup.rec_final_verify->auth, eve_rng);
    if (setup.victim_role == Role::Sender) {
        AuthEnvelope victim_fv = victim.final_verify_envelope();
        (void)victim_fv;
    }
    if (!victim.accept_final_verify_envelope(forged_fv)) {
        out.aborted_at = "FinalVerify";
        return out;
    }
    out.deepest_phase_passed = Phase::FinalVerify;

    if (victim.final_key().bits == lab.record.final_key_first) {
        out.success = true;
    } else {
        out.aborted_at = "FinalVerify";
    }
    return out;
}

}  // namespace

std::vector<std::string> standard_attack_scenarios() {
    return {"outsider-nocert", "outsider-replay", "insider-ex-bob", "insider-ex-alice"};
}

AttackLab make_attack_lab(const MitmScenarioConfig& cfg) {
    AttackLab lab;
    lab.params.variant = Variant::P1;
    lab.params.rounds = 1;
    lab.params.seed = cfg.seed;
    lab.params.channel = cfg.recorded_channel;
    lab.params.channel.pulse_count = cfg.pulse_count;

    DetRng setup_rng = DetRng::derive(cfg.seed, "lab-setup");
    lab.ca = std::make_unique<CertificateAuthority>(setup_rng, 8, lab.params.l_digest);

    const uint32_t victim_slots = 2 * cfg.trials + 16;
    SigParams small{lab.params.l_digest, 16};
    SigParams large{lab.params.l_digest, victim_slots};

    const bool victim_is_bob = cfg.scenario.rfind("outsider", 0) == 0;
    lab.alice = std::make_unique<Party>(
        make_party("alice", setup_rng, *lab.ca, small));
    lab.bob = std::make_unique<Party>(
        make_party("bob", setup_rng, *lab.ca, victim_is_bob ? large : small));
    lab.charlie = std::make_unique<Party>(
        make_party("charlie", setup_rng, *lab.ca, victim_is_bob ? small : large));

    Engine engine(lab.params, *lab.alice, *lab.bob);
    if (!engine.bootstrap()) throw std::runtime_error("attack lab: bootstrap failed");
    EngineOptions opts;
    opts.recorder = &lab.record;
    RoundOutcome outcome = engine.run_round(1, opts);
    if (!outcome.success || !lab.record.complete)
        throw std::runtime_error("attack lab: recorded session failed (" + outcome.abort_stage +
                                 ": " + outcome.abort_reason + ")");
    lab.recorded_transcript = engine.transcript();
    return lab;
}

AttackStats run_full_mitm(const MitmScenarioConfig& cfg) {
    AttackLab lab = make_attack_lab(cfg);

    TrialSetup setup{};
    if (cfg.scenario == "outsider-nocert" || cfg.scenario == "outsider-replay") {
        // Transcript-only Eve impersonates Alice toward Bob himself.
        setup.victim = lab.bob.get();
        setup.victim_role = Role::Receiver;
        setup.impersonated = "alice";
        setup.compromised = nullptr;
        setup.rec_basis = &lab.record.basis_a;
        setup.rec_ec_verify = &lab.record.ec_verify_a;
        setup.rec_final_verify = &lab.record.final_verify_a;
    } else if (cfg.scenario == "insider-ex-bob") {
        // Bob turned Eve: full insider state, impersonates Alice toward
        // the receiver Charlie.
        setup.victim = lab.charlie.get();
        setup.victim_role = Role::Receiver;
        setup.impersonated = "alice";
        setup.compromised = lab.bob.get();
        setup.rec_basis = &lab.record.basis_a;
        setup.rec_ec_verify = &lab.record.ec_verify_a;
        setup.rec_final_verify = &lab.record.final_verify_a;
    } else if (cfg.scenario == "insider-ex-alice") {
        // Alice turned Eve, impersonates Bob toward the transmitter
        // Charlie.
        setup.victim = lab.charlie.get();
        setup.victim_role = Role::Sender;
        setup.impersonated = "bob";
        setup.compromised = lab.alice.get();
        setup.rec_basis = &lab.record.basis_b;
        setup.rec_ec_verify = &lab.record.ec_verify_b;
        setup.rec_final_verify = &lab.record.final_verify_b;
    } else {
        throw std::invalid_argument("unknown attack scenario: " + cfg.scenario);
    }

    AttackStats stats;
    stats.scenario = cfg.scenario;
    stats.trials = cfg.trials;
    stats.late_forgery_model = cfg.late_forgery;
    stats.min_corrected_key_bits = UINT64_MAX;
    for (uint32_t t = 0; t < cfg.trials; ++t) {
        AttackOutcome out = run_trial(lab, cfg, setup, t);
        if (out.success) {
            ++stats.successes;
        } else {
            ++stats.aborted_at[out.aborted_at];
        }
        ++stats.deepest_phase_passed[out.deepest_phase_passed.has_value()
                                         ? to_string(*out.deepest_phase_passed)
                                         : "none"];
        if (out.victim_corrected_bits > 0)
            stats.min_corrected_key_bits =
                std::min(stats.min_corrected_key_bits, out.victim_corrected_bits);
    }
    if (stats.min_corrected_key_bits == UINT64_MAX) stats.min_corrected_key_bits = 0;
    return stats;
}

PhaseReplay replay_basis_sift(const AttackLab& lab, bool lossy_attack_wire, uint64_t trial_seed) {
    PhaseReplay out;
    DetRng eve_rng = DetRng::derive(trial_seed, "eve/basis-replay");

    Party& victim_party = *lab.charlie;
    victim_party.peer.reset();
    if (!accept_peer_certificate(victim_party, lab.alice->certificate, "alice")) {
        out.reason = "bootstrap failed";
        return out;
    }
    RoundSession victim(victim_party, Role::Receiver, 1, lab.params,
                        DetRng::derive(trial_seed, "victim/basis-replay"));

    BitString rec_bases =
        decode_bases(lab.record.basis_a, lab.record.valid_positions.size());
    ForgedTrain train = forge_pulse_train(lab.record.pulse_count, lab.record.valid_positions,
                                          rec_bases, eve_rng);
    ChannelConfig wire;
    wire.pulse_count = lab.record.pulse_count;
    wire.transmittance = lossy_attack_wire ? 0.8 : 1.0;
    DetRng wire_rng = DetRng::derive(trial_seed, "wire/basis-replay");
    victim.observe_detections(transmit_and_measure(train.pulses, wire, wire_rng));

    out.passed = victim.accept_basis_envelope(lab.record.basis_a);
    out.reason = out.passed ? "replayed signature accepted" : victim.last_error();
    return out;
}

PhaseReplay replay_rand_transfer(const AttackLab& lab, bool tamper_message) {
    PhaseReplay out;
    AuthEnvelope env = lab.record.rand_transfer;
    if (tamper_message && !env.message.empty()) env.message.back() ^= 0x01;
    // Exactly the receiver-side check: signature over the message under
    // Alice's certified verification key.
    const auto& cert = lab.alice->certificate;
    out.passed = signature_scheme(cert.sig_scheme_id)
                     .verify(cert.sig_public, hash_digest(env.message, lab.params.l_digest),
                             env.auth);
    out.reason = out.passed ? "replayed signature accepted" : "signature verification failed";
    return out;
}

CollisionStats replay_ec_verify_collision(size_t k_bits, uint32_t trials, uint64_t seed,
                                          bool victim_uses_recorded_key) {
    if (k_bits == 0 || trials == 0)
        throw std::invalid_argument("replay_ec_verify_collision: k_bits and trials must be > 0");
    CollisionStats stats;
    stats.k_bits = k_bits;
    stats.trials = trials;

    DetRng rng = DetRng::derive(seed, "ec-collision");
    BitString nonce = BitString::random(rng, 256);
    BitString recorded_key = BitString::random(rng, k_bits);
    Digest recorded = verification_digest(recorded_key, nonce, "EC:A->B", 256);

    for (uint32_t t = 0; t < trials; ++t) {
        BitString victim_key =
            victim_uses_recorded_key ? recorded_key : BitString::random(rng, k_bits);
        Digest fresh = verification_digest(victim_key, nonce, "EC:A->B", 256);
        if (fresh == recorded) ++stats.passes;
    }

    stats.expected_rate = std::exp2(-double(k_bits));
    stats.expected_passes = stats.expected_rate * double(trials);
    stats.sigma = std::sqrt(double(trials) * stats.expected_rate * (1.0 - stats.expected_rate));
    stats.within_5_sigma =
        std::abs(double(stats.passes) - stats.expected_passes) <= 5.0 * stats.sigma;
    return stats;
}

}  // namespace qkdauth
