#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qkdauth/channel.hpp"
#include "qkdauth/error_correction.hpp"
#include "qkdauth/pki.hpp"
#include "qkdauth/postprocess.hpp"
#include "qkdauth/schemes.hpp"

namespace qkdauth {

enum class Variant { P1, P2 };
enum class Phase { BasisSift, ECVerify, RandTransfer, FinalVerify };
enum class AuthMode { PqcSignOnly, PqcSignEncrypt, OtpDigest, FinalKeySlice };
enum class Direction { AtoB, BtoA };
enum class Role { Sender, Receiver };  // Sender modulates pulses (the A side)

const char* to_string(Variant v);
const char* to_string(Phase p);
const char* to_string(AuthMode m);
const char* to_string(Direction d);

/// Authentication-mode dispatch. Protocol 1 signs basis sifting and the
/// random-number transfer with PQC in every round, signs-and-encrypts
/// both key verifications in round 1 and one-time-pads them with
/// key-pool slices from round 2 on. Protocol 2 signs everything except
/// the final key verification, which spends a slice of the current
/// round's final key.
AuthMode auth_mode(Variant variant, uint32_t round_index, Phase phase);

/// A classical message plus its authentication material.
struct AuthEnvelope {
    Phase phase = Phase::BasisSift;
    Direction direction = Direction::AtoB;
    std::vector<uint8_t> message;  // cleartext payload, may be empty
    AuthMode mode = AuthMode::PqcSignOnly;
    std::vector<uint8_t> auth;  // signature, ciphertext or OTP tag
};

struct TranscriptRecord {
    uint32_t round = 0;
    std::string phase;
    std::string direction;
    std::string auth_mode;
    std::string message_hash;        // sha256 hex of the message bytes
    std::string auth_material_hex;
    std::string verdict;             // "pass" | "fail" | "plain"
};

struct Transcript {
    std::vector<TranscriptRecord> records;

    void add_plain(uint32_t round, const std::string& phase, Direction dir,
                   std::span<const uint8_t> message);
    void add_envelope(uint32_t round, const AuthEnvelope& env, bool pass);
};

/// Consumption bookkeeping: which bit range of which round's final key
/// was spent, and on what. Ranges must never overlap.
struct ConsumptionEvent {
    uint32_t source_round = 0;
    uint64_t offset_begin = 0;
    uint64_t offset_end = 0;
    std::string purpose;
};

struct PoolRoundStats {
    uint32_t round = 0;
    std::string status;
    uint64_t generated_bits = 0;
    uint64_t consumed_bits = 0;
    uint64_t discarded_bits = 0;
    uint64_t stored_delta_bits = 0;
};

/// Per-link store of generated keys. The reserved slice funds the next
/// round's symmetric authentication; consumed bits are logged and never
/// handed out twice; the stored pool only grows from split remainders.
class KeyPool {
public:
    KeyPool() = default;
    explicit KeyPool(std::string link_id) : link_id_(std::move(link_id)) {}

    const std::string& link_id() const { return link_id_; }
    const BitString& stored() const { return stored_; }
    uint64_t reserved_size() const { return reserved_.size(); }

    void append_stored(const BitString& bits) { stored_.append(bits); }
    void set_reserved(const BitString& slice, uint32_t source_round);

    /// Slice [offset, offset+len) of the reserved block. Each range may
    /// be taken once; overlaps throw.
    BitString take_reserved(uint64_t offset, uint64_t len, const std::string& purpose);
    /// Drops whatever of the reserved block is still unconsumed (abort
    /// path); returns the number of discarded bits.
    uint64_t discard_reserved(const std::string& reason);

    /// Records consumption from a round's final key that never entered
    /// the reserved block (Protocol 2 slices).
    void log_direct_consumption(uint32_t source_round, uint64_t begin, uint64_t end,
                                const std::string& purpose);

    void add_round_stats(const PoolRoundStats& stats) { history_.push_back(stats); }
    const std::vector<PoolRoundStats>& history() const { return history_; }
    const std::vector<ConsumptionEvent>& consumption_log() const { return consumption_log_; }

private:
    std::string link_id_;
    BitString stored_;
    BitString reserved_;
    uint32_t reserved_source_round_ = 0;
    std::vector<std::pair<uint64_t, uint64_t>> reserved_taken_;  // offset ranges
    std::vector<PoolRoundStats> history_;
    std::vector<ConsumptionEvent> consumption_log_;
};

struct PeerInfo {
    std::string id;
    std::string sig_scheme_id;
    std::vector<uint8_t> sig_public;
    std::string enc_scheme_id;
    std::vector<uint8_t> enc_public;
};

struct CaTrust {
    std::string scheme_id;
    std::vector<uint8_t> public_key;
};

/// Long-lived party state: identity keys, certificate, key pool, and
/// the peer's verified public keys once the PKI bootstrap ran.
struct Party {
    std::string id;
    LamportSigner signer;
    EncryptionKeyPair enc_kp;
    Certificate certificate;
    CaTrust ca;
    KeyPool pool;
    std::optional<PeerInfo> peer;
};

Party make_party(const std::string& id, DetRng& rng, CertificateAuthority& ca,
                 const SigParams& sig_params);

/// Verifies the peer certificate against the CA and the expected
/// identity; on success installs the peer's public keys.
bool accept_peer_certificate(Party& self, const Certificate& peer_cert,
                             const std::string& expected_peer_id);

struct ProtocolParams {
    Variant variant = Variant::P1;
    uint32_t rounds = 1;
    size_t l_digest = 256;
    double qber_threshold = 0.11;
    double sample_fraction = 0.1;
    uint64_t margin_bits = 100;
    uint64_t slice_len = 256;  // Protocol 2 final-verification slice, per direction
    ChannelConfig channel;
    uint64_t seed = 1;

    /// Reserved-slice budget of a Protocol 1 round >= 2: two-way EC
    /// verification plus two-way final verification.
    uint64_t otp_budget() const { return 4 * uint64_t(l_digest); }
    void validate() const;  // throws std::invalid_argument naming the field
};

/// One party's state machine for a single round. All stochastic choices
/// come from the DetRng handed in, so trials and rounds are replayable.
/// The adversary harness drives the same implementation for its victims.
class RoundSession {
public:
    RoundSession(Party& party, Role role, uint32_t round_index, const ProtocolParams& params,
                 DetRng rng);

    // Step 1: quantum layer and the (unauthenticated) detection report.
    std::vector<PulseRecord> emit_pulses();
    void observe_detections(const std::vector<DetectionEvent>& events);
    std::vector<uint8_t> detection_report() const;
    bool accept_detection_report(std::span<const uint8_t> report);

    // Step 2: two-way basis sifting.
    AuthEnvelope basis_envelope();
    bool accept_basis_envelope(const AuthEnvelope& env);
    /// After both basis messages are in: sift, derive the public coin
    /// and round nonce. False when the sifted key came out empty.
    bool complete_sift();

    // Step 3: error estimation (public sample, removed from the key).
    std::vector<uint8_t> qber_reveal();
    bool accept_qber_reveal(std::span<const uint8_t> reveal);
    const QberEstimate& qber() const { return qber_; }

    // Step 3 continued: reconciliation (driver mediates; see
    // correct_errors). The reference side is the Sender.
    BitString& working_key() { return key_; }
    const BitString& working_key() const { return key_; }
    void charge_ec_leak(uint64_t bits) { ledger_.ec_leak_bits += bits; }

    // Step 4: two-way error correction verification.
    AuthEnvelope ec_verify_envelope();
    bool accept_ec_verify_envelope(const AuthEnvelope& env);

    // Step 5: random-number transfer (Sender generates the seeds).
    uint64_t compute_ell();
    AuthEnvelope rand_transfer_envelope();
    bool accept_rand_transfer(const AuthEnvelope& env);

    // Steps 6-8: privacy amplification, final verification, and the
    // round-1 second compression.
    void amplify();
    AuthEnvelope final_verify_envelope();
    bool accept_final_verify_envelope(const AuthEnvelope& env);
    void second_amplify();

    /// Success path: split the final key, update the pool, return the
    /// net stored bits.
    uint64_t settle();

    uint64_t coin() const { return coin_; }
    const BitString& round_nonce() const { return nonce_; }
    const LeakageLedger& ledger() const { return ledger_; }
    uint64_t ell() const { return ell_; }
    uint64_t ell2() const { return ell2_; }
    const FinalKey& final_key() const { return final_; }
    const std::vector<uint32_t>& valid_positions() const { return valid_; }
    size_t sifted_size() const { return sifted_size_; }
    const std::string& last_error() const { return last_error_; }

private:
    Direction own_direction() const {
        return role_ == Role::Sender ? Direction::AtoB : Direction::BtoA;
    }
    Direction peer_direction() const {
        return role_ == Role::Sender ? Direction::BtoA : Direction::AtoB;
    }
    AuthMode expected_mode(Phase phase) const;
    std::vector<uint8_t> sign_message_digest(std::span<const uint8_t> message);
    bool verify_peer_signature(std::span<const uint8_t> message,
                               std::span<const uint8_t> tag) const;
    AuthEnvelope make_key_verify_envelope(Phase phase, const Digest& digest);
    bool check_key_verify_envelope(const AuthEnvelope& env, const Digest& expected);
    uint64_t otp_slot_offset(Phase phase, Direction dir) const;
    BitString p2_slice(Direction dir) const;
    bool fail(std::string reason);

    Party& party_;
    Role role_;
    uint32_t round_;
    const ProtocolParams& params_;
    DetRng rng_;

    std::vector<PulseRecord> records_;      // Sender
    std::vector<DetectionEvent> events_;    // Receiver
    std::vector<uint32_t> valid_;
    BitString my_bits_, my_bases_, peer_bases_;
    std::vector<uint8_t> my_basis_msg_, peer_basis_msg_;

    size_t sifted_size_ = 0;
    uint64_t coin_ = 0;
    BitString nonce_;
    QberEstimate qber_;
    BitString key_;
    LeakageLedger ledger_;
    uint64_t fv_leak_ = 0;  // final-verification digests, removed by step 8
    uint64_t ell_ = 0, ell2_ = 0;
    ToeplitzSeed seed1_, seed2_;
    FinalKey final_;
    BitString p2_remainder_;
    std::string last_error_;
};

struct RoundReport {
    uint32_t round = 0;
    bool success = false;
    std::string abort_stage;   // empty on success
    std::string abort_reason;
    uint64_t detections = 0;
    uint64_t sifted_bits = 0;
    uint64_t sampled_bits = 0;
    double qber = 0.0;
    uint64_t corrected_bits = 0;
    uint64_t ec_leak_bits = 0;
    uint64_t digest_leak_bits = 0;
    uint64_t margin_bits = 0;
    uint64_t ell = 0;
    uint64_t ell2 = 0;
    uint64_t consumed_bits = 0;
    uint64_t discarded_bits = 0;
    uint64_t reserved_next_bits = 0;
    uint64_t net_key_bits = 0;
};

struct RoundOutcome {
    bool success = false;
    std::string abort_stage;
    std::string abort_reason;
    uint64_t net_key_bits = 0;
    RoundReport report;
};

/// Wire-level capture of one honest round, for the adversary harness.
/// Key material fields are only meaningful to insider scenarios.
struct RoundRecord {
    uint32_t pulse_count = 0;
    std::vector<uint32_t> valid_positions;
    AuthEnvelope basis_a, basis_b;
    AuthEnvelope ec_verify_a, ec_verify_b;
    AuthEnvelope rand_transfer;
    AuthEnvelope final_verify_a, final_verify_b;
    BitString corrected_key;
    BitString final_key_first;  // the key the final verification covers
    BitString final_key_out;
    bool complete = false;
};

struct ChainSummary {
    std::vector<RoundReport> rounds;
    uint32_t rounds_attempted = 0;
    uint32_t rounds_succeeded = 0;
    uint64_t net_key_bits = 0;
    bool chain_stopped_early = false;
};

struct EngineOptions {
    WireTap* tap = nullptr;
    RoundRecord* recorder = nullptr;
};

/// Drives both parties of one link through bootstrap and rounds,
/// recording the full classical transcript. Alice is the Sender.
class Engine {
public:
    Engine(const ProtocolParams& params, Party& alice, Party& bob);

    bool bootstrap();
    RoundOutcome run_round(uint32_t round_index, const EngineOptions& opts = {});
    /// Runs rounds 1..n. A Protocol 1 abort discards the reserved slice
    /// and stops the chain (no key left to authenticate with); Protocol
    /// 2 rounds are self-contained, so the chain keeps going.
    ChainSummary run_chain(uint32_t rounds, const EngineOptions& opts = {});

    const Transcript& transcript() const { return transcript_; }
    Transcript& transcript() { return transcript_; }
    const ProtocolParams& params() const { return params_; }
    Party& alice() { return alice_; }
    Party& bob() { return bob_; }

private:
    RoundOutcome abort_round(uint32_t round, const std::string& stage, const std::string& reason,
                             RoundReport report);

    ProtocolParams params_;
    Party& alice_;
    Party& bob_;
    Transcript transcript_;
    bool bootstrapped_ = false;
};

struct KeyRateReport {
    uint64_t rounds = 0;
    uint64_t net_key_bits = 0;
    uint64_t t_ms_per_round = 0;
    double net_key_rate_bps = 0.0;
    /// Eq.-style penalty if basis sifting and the random-number transfer
    /// were symmetric-key authenticated: one digest of keys per round.
    uint64_t delta_r_numerator_bits = 0;  // l_digest
    bool delta_r_exact = false;
    uint64_t delta_r_bps_exact = 0;
    double delta_r_bps = 0.0;
    std::map<std::string, uint64_t> consumed_by_purpose;
};

KeyRateReport key_rate_report(const KeyPool& pool, uint64_t t_ms_per_round, size_t l_digest);

/// Protocol 2 final-key check in isolation: each side one-time-pads the
/// digest of its remainder with the agreed per-direction prefix slice,
/// tags cross the wire both ways, and the result is true iff both
/// directions match. Any difference, inside the slices or the
/// remainders, flips it to false. slice_len must equal l_digest.
bool final_key_slice_verify(const BitString& final_a, const BitString& final_b,
                            uint64_t slice_len, const BitString& round_nonce, size_t l_digest);

/// Pre-shared key pairs a fully meshed n-user network would need:
/// n(n-1)/2. Throws for fewer than two users.
uint64_t preshared_pairs_required(uint64_t user_count);

}  // namespace qkdauth
