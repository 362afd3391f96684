#include "qkdauth/engine.hpp"

#include <algorithm>
#include <stdexcept>

#include "qkdauth/sha256.hpp"

namespace qkdauth {

const char* to_string(Variant v) { return v == Variant::P1 ? "P1" : "P2"; }

const char* to_string(Phase p) {
    switch (p) {
        case Phase::BasisSift: return "BasisSift";
        case Phase::ECVerify: return "ECVerify";
        case Phase::RandTransfer: return "RandTransfer";
        case Phase::FinalVerify: return "FinalVerify";
    }
    return "?";
}

const char* to_string(AuthMode m) {
    switch (m) {
        case AuthMode::PqcSignOnly: return "PqcSignOnly";
        case AuthMode::PqcSignEncrypt: return "PqcSignEncrypt";
        case AuthMode::OtpDigest: return "OtpDigest";
        case AuthMode::FinalKeySlice: return "FinalKeySlice";
    }
    return "?";
}

const char* to_string(Direction d) { return d == Direction::AtoB ? "A->B" : "B->A"; }

AuthMode auth_mode(Variant variant, uint32_t round_index, Phase phase) {
    if (round_index < 1) throw std::invalid_argument("auth_mode: round_index must be >= 1");
    if (variant == Variant::P1) {
        switch (phase) {
            case Phase::BasisSift:
            case Phase::RandTransfer:
                return AuthMode::PqcSignOnly;
            case Phase::ECVerify:
            case Phase::FinalVerify:
                return round_index == 1 ? AuthMode::PqcSignEncrypt : AuthMode::OtpDigest;
        }
    } else {
        switch (phase) {
            case Phase::BasisSift:
            case Phase::RandTransfer:
            case Phase::ECVerify:
                return AuthMode::PqcSignOnly;
            case Phase::FinalVerify:
                return AuthMode::FinalKeySlice;
        }
    }
    throw std::logic_error("auth_mode: unreachable");
}

// ---------------------------------------------------------------- transcript

void Transcript::add_plain(uint32_t round, const std::string& phase, Direction dir,
                           std::span<const uint8_t> message) {
    TranscriptRecord rec;
    rec.round = round;
    rec.phase = phase;
    rec.direction = to_string(dir);
    rec.auth_mode = "none";
    rec.message_hash = hex_encode(sha256(message));
    rec.verdict = "plain";
    records.push_back(std::move(rec));
}

void Transcript::add_envelope(uint32_t round, const AuthEnvelope& env, bool pass) {
    TranscriptRecord rec;
    rec.round = round;
    rec.phase = to_string(env.phase);
    rec.direction = to_string(env.direction);
    rec.auth_mode = to_string(env.mode);
    rec.message_hash = hex_encode(sha256(env.message));
    rec.auth_material_hex = hex_encode(env.auth);
    rec.verdict = pass ? "pass" : "fail";
    records.push_back(std::move(rec));
}

// ------------------------------------------------------------------ key pool

void KeyPool::set_reserved(const BitString& slice, uint32_t source_round) {
    uint64_t taken = 0;
    for (const auto& [b, e] : reserved_taken_) taken += e - b;
    if (taken != reserved_.size())
        throw std::logic_error("KeyPool::set_reserved: previous reserved slice not settled");
    reserved_ = slice;
    reserved_source_round_ = source_round;
    reserved_taken_.clear();
}

BitString KeyPool::take_reserved(uint64_t offset, uint64_t len, const std::string& purpose) {
    if (offset + len > reserved_.size())
        throw std::runtime_error("KeyPool::take_reserved: insufficient reserved key");
    for (const auto& [b, e] : reserved_taken_)
        if (offset < e && b < offset + len)
            throw std::logic_error("KeyPool::take_reserved: slice already consumed");
    reserved_taken_.emplace_back(offset, offset + len);
    consumption_log_.push_back(
        ConsumptionEvent{reserved_source_round_, offset, offset + len, purpose});
    return reserved_.slice(offset, len);
}

uint64_t KeyPool::discard_reserved(const std::string& reason) {
    uint64_t taken = 0;
    for (const auto& [b, e] : reserved_taken_) taken += e - b;
    uint64_t discarded = reserved_.size() - taken;
    if (discarded > 0)
        consumption_log_.push_back(ConsumptionEvent{reserved_source_round_, uint64_t(-1),
                                                    uint64_t(-1), "discarded: " + reason});
    reserved_ = BitString();
    reserved_taken_.clear();
    return discarded;
}

void KeyPool::log_direct_consumption(uint32_t source_round, uint64_t begin, uint64_t end,
                                     const std::string& purpose) {
    for (const auto& ev : consumption_log_)
        if (ev.source_round == source_round && begin < ev.offset_end && ev.offset_begin < end &&
            ev.offset_begin != uint64_t(-1))
            throw std::logic_error("KeyPool: final-key slice already consumed");
    consumption_log_.push_back(ConsumptionEvent{source_round, begin, end, purpose});
}

// ------------------------------------------------------------------- parties

Party make_party(const std::string& id, DetRng& rng, CertificateAuthority& ca,
                 const SigParams& sig_params) {
    Party p;
    p.id = id;
    p.signer = LamportSigner(signature_scheme(kLamportSchemeId).keygen(rng, sig_params));
    p.enc_kp = pke_scheme(kHybridOtpSchemeId).keygen(rng);
    p.certificate = ca.issue(id, kLamportSchemeId, p.signer.keypair().public_key,
                             kHybridOtpSchemeId, p.enc_kp.public_key);
    p.ca = CaTrust{ca.scheme_id(), ca.public_key()};
    p.pool = KeyPool(id);
    return p;
}

bool accept_peer_certificate(Party& self, const Certificate& peer_cert,
                             const std::string& expected_peer_id) {
    if (!verify_certificate(self.ca.public_key, self.ca.scheme_id, peer_cert)) return false;
    if (peer_cert.subject_id != expected_peer_id) return false;
    self.peer = PeerInfo{peer_cert.subject_id, peer_cert.sig_scheme_id, peer_cert.sig_public,
                         peer_cert.enc_scheme_id, peer_cert.enc_public};
    return true;
}

void ProtocolParams::validate() const {
    if (rounds < 1) throw std::invalid_argument("run.rounds must be >= 1");
    if (l_digest == 0 || l_digest % 8 != 0)
        throw std::invalid_argument("post.l_digest must be a positive multiple of 8");
    if (!(qber_threshold > 0.0 && qber_threshold < 0.5))
        throw std::invalid_argument("post.qber_threshold must lie in (0, 0.5)");
    if (!(sample_fraction > 0.0 && sample_fraction < 1.0))
        throw std::invalid_argument("post.sample_fraction must lie in (0, 1)");
    if (variant == Variant::P2 && slice_len != l_digest)
        throw std::invalid_argument(
            "post.slice_len must equal post.l_digest (the slice one-time-pads one digest per "
            "direction)");
    if (channel.pulse_count == 0) throw std::invalid_argument("channel.pulse_count must be > 0");
    channel.validate();
}

// ------------------------------------------------------------- round session

namespace {

std::vector<uint8_t> encode_detection_report(const std::vector<uint32_t>& positions) {
    std::vector<uint8_t> out;
    put_u32be(out, uint32_t(positions.size()));
    for (uint32_t p : positions) put_u32be(out, p);
    return out;
}

std::optional<std::vector<uint32_t>> decode_detection_report(std::span<const uint8_t> data,
                                                             uint32_t pulse_count) {
    size_t pos = 0;
    uint32_t count;
    try {
        count = get_u32be(data, pos);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
    if (data.size() != 4 + size_t(count) * 4) return std::nullopt;
    std::vector<uint32_t> out(count);
    uint32_t prev = 0;
    for (uint32_t i = 0; i < count; ++i) {
        out[i] = get_u32be(data, pos);
        if (out[i] >= pulse_count) return std::nullopt;
        if (i > 0 && out[i] <= prev) return std::nullopt;
        prev = out[i];
    }
    return out;
}

std::vector<uint8_t> encode_bits_message(const BitString& bits) {
    std::vector<uint8_t> out;
    put_u32be(out, uint32_t(bits.size()));
    auto body = bits.to_bytes();
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

std::optional<BitString> decode_bits_message(std::span<const uint8_t> data,
                                             size_t expected_bits) {
    size_t pos = 0;
    uint32_t count;
    try {
        count = get_u32be(data, pos);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
    if (count != expected_bits) return std::nullopt;
    if (data.size() != 4 + (size_t(count) + 7) / 8) return std::nullopt;
    return BitString::from_bytes(data.subspan(4), count);
}

std::vector<uint8_t> encode_seeds(const std::vector<const ToeplitzSeed*>& seeds) {
    std::vector<uint8_t> out;
    out.push_back(uint8_t(seeds.size()));
    for (const auto* s : seeds) {
        put_u32be(out, uint32_t(s->in_len));
        put_u32be(out, uint32_t(s->out_len));
        auto body = s->seed.to_bytes();
        put_u32be(out, uint32_t(s->seed.size()));
        out.insert(out.end(), body.begin(), body.end());
    }
    return out;
}

std::optional<std::vector<ToeplitzSeed>> decode_seeds(std::span<const uint8_t> data) {
    if (data.empty()) return std::nullopt;
    size_t pos = 1;
    uint8_t count = data[0];
    std::vector<ToeplitzSeed> out;
    try {
        for (uint8_t i = 0; i < count; ++i) {
            ToeplitzSeed s;
            s.in_len = get_u32be(data, pos);
            s.out_len = get_u32be(data, pos);
            uint32_t nbits = get_u32be(data, pos);
            size_t nbytes = (size_t(nbits) + 7) / 8;
            if (pos + nbytes > data.size()) return std::nullopt;
            s.seed = BitString::from_bytes(data.subspan(pos, nbytes), nbits);
            pos += nbytes;
            out.push_back(std::move(s));
        }
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
    if (pos != data.size()) return std::nullopt;
    return out;
}

std::string digest_label(Phase phase, Variant variant, Direction dir) {
    std::string tag;
    if (phase == Phase::ECVerify)
        tag = "EC";
    else
        tag = variant == Variant::P2 ? "FKR" : "FK";
    return tag + ":" + std::string(to_string(dir));
}

}  // namespace

RoundSession::RoundSession(Party& party, Role role, uint32_t round_index,
                           const ProtocolParams& params, DetRng rng)
    : party_(party), role_(role), round_(round_index), params_(params), rng_(rng) {
    if (round_index < 1) throw std::invalid_argument("RoundSession: round_index must be >= 1");
    if (!party_.peer.has_value())
        throw std::logic_error("RoundSession: peer keys missing (bootstrap first)");
}

AuthMode RoundSession::expected_mode(Phase phase) const {
    return auth_mode(params_.variant, round_, phase);
}

bool RoundSession::fail(std::string reason) {
    last_error_ = std::move(reason);
    return false;
}

std::vector<uint8_t> RoundSession::sign_message_digest(std::span<const uint8_t> message) {
    return party_.signer.sign(hash_digest(message, params_.l_digest));
}

bool RoundSession::verify_peer_signature(std::span<const uint8_t> message,
                                         std::span<const uint8_t> tag) const {
    const auto& peer = *party_.peer;
    return signature_scheme(peer.sig_scheme_id)
        .verify(peer.sig_public, hash_digest(message, params_.l_digest), tag);
}

std::vector<PulseRecord> RoundSession::emit_pulses() {
    if (role_ != Role::Sender) throw std::logic_error("emit_pulses: receiver role");
    records_ = prepare_pulses(rng_, params_.channel);
    return records_;
}

void RoundSession::observe_detections(const std::vector<DetectionEvent>& events) {
    if (role_ != Role::Receiver) throw std::logic_error("observe_detections: sender role");
    events_ = events;
    valid_ = report_valid_detections(events_);
    for (uint32_t idx : valid_) {
        my_bits_.append_bit(events_[idx].bit);
        my_bases_.append_bit(events_[idx].basis == Basis::X);
    }
}

std::vector<uint8_t> RoundSession::detection_report() const {
    return encode_detection_report(valid_);
}

bool RoundSession::accept_detection_report(std::span<const uint8_t> report) {
    if (role_ != Role::Sender) throw std::logic_error("accept_detection_report: receiver role");
    auto positions = decode_detection_report(report, uint32_t(records_.size()));
    if (!positions.has_value()) return fail("malformed detection report");
    valid_ = std::move(*positions);
    for (uint32_t idx : valid_) {
        my_bits_.append_bit(records_[idx].bit);
        my_bases_.append_bit(records_[idx].basis == Basis::X);
    }
    return true;
}

AuthEnvelope RoundSession::basis_envelope() {
    my_basis_msg_ = encode_basis_message(my_bases_);
    AuthEnvelope env;
    env.phase = Phase::BasisSift;
    env.direction = own_direction();
    env.mode = expected_mode(Phase::BasisSift);
    env.message = my_basis_msg_;
    env.auth = sign_message_digest(env.message);
    return env;
}

bool RoundSession::accept_basis_envelope(const AuthEnvelope& env) {
    if (env.phase != Phase::BasisSift || env.direction != peer_direction())
        return fail("unexpected basis envelope framing");
    if (env.mode != expected_mode(Phase::BasisSift)) return fail("unexpected authentication mode");
    if (!verify_peer_signature(env.message, env.auth))
        return fail("basis message signature verification failed");
    try {
        peer_bases_ = decode_basis_message(env.message, valid_.size());
    } catch (const std::invalid_argument& e) {
        return fail(std::string("basis message mismatch: ") + e.what());
    }
    peer_basis_msg_ = env.message;
    return true;
}

bool RoundSession::complete_sift() {
    SiftedKey sifted = sift_with_peer_bases(my_bits_, my_bases_, peer_bases_, valid_);
    key_ = std::move(sifted.bits);
    sifted_size_ = key_.size();

    const auto& msg_ab = role_ == Role::Sender ? my_basis_msg_ : peer_basis_msg_;
    const auto& msg_ba = role_ == Role::Sender ? peer_basis_msg_ : my_basis_msg_;
    std::vector<uint8_t> buf;
    put_u32be(buf, round_);
    put_field(buf, msg_ab);
    put_field(buf, msg_ba);

    std::vector<uint8_t> coin_input = {'c', 'o', 'i', 'n'};
    coin_input.insert(coin_input.end(), buf.begin(), buf.end());
    auto coin_hash = sha256(coin_input);
    coin_ = 0;
    for (int i = 0; i < 8; ++i) coin_ |= uint64_t(coin_hash[i]) << (8 * i);

    std::vector<uint8_t> nonce_input = {'n', 'o', 'n', 'c', 'e'};
    nonce_input.insert(nonce_input.end(), buf.begin(), buf.end());
    nonce_ = hash_digest(nonce_input, params_.l_digest).value;

    if (sifted_size_ == 0) return fail("empty sifted key");
    return true;
}

std::vector<uint8_t> RoundSession::qber_reveal() {
    qber_.sampled_positions =
        qber_sample_positions(sifted_size_, params_.sample_fraction, coin_);
    BitString mine(qber_.sampled_positions.size());
    for (size_t i = 0; i < qber_.sampled_positions.size(); ++i)
        if (key_.bit(qber_.sampled_positions[i])) mine.set_bit(i, true);
    return encode_bits_message(mine);
}

bool RoundSession::accept_qber_reveal(std::span<const uint8_t> reveal) {
    auto peer_bits = decode_bits_message(reveal, qber_.sampled_positions.size());
    if (!peer_bits.has_value()) return fail("malformed error-estimation reveal");
    qber_.threshold = params_.qber_threshold;
    qber_.errors = 0;
    for (size_t i = 0; i < qber_.sampled_positions.size(); ++i)
        if (key_.bit(qber_.sampled_positions[i]) != peer_bits->bit(i)) ++qber_.errors;
    qber_.rate = double(qber_.errors) / double(qber_.sampled_positions.size());
    key_ = remove_positions(key_, qber_.sampled_positions);
    if (qber_.over_threshold()) return fail("error rate above threshold");
    return true;
}

uint64_t RoundSession::otp_slot_offset(Phase phase, Direction dir) const {
    uint64_t slot = (phase == Phase::ECVerify ? 0 : 2) + (dir == Direction::BtoA ? 1 : 0);
    return slot * params_.l_digest;
}

BitString RoundSession::p2_slice(Direction dir) const {
    uint64_t offset = dir == Direction::AtoB ? 0 : params_.slice_len;
    return final_.bits.slice(offset, params_.slice_len);
}

AuthEnvelope RoundSession::make_key_verify_envelope(Phase phase, const Digest& digest) {
    AuthEnvelope env;
    env.phase = phase;
    env.direction = own_direction();
    env.mode = expected_mode(phase);
    std::string purpose = std::string(to_string(phase)) + " " + to_string(env.direction);

    switch (env.mode) {
        case AuthMode::PqcSignOnly: {
            // Protocol 2 key verification: the digest travels in clear
            // and is charged to the leakage ledger in full.
            env.message = digest.bytes();
            env.auth = sign_message_digest(env.message);
            ledger_.digest_leak_bits += params_.l_digest;
            break;
        }
        case AuthMode::PqcSignEncrypt: {
            auto sig = party_.signer.sign(digest);
            std::vector<uint8_t> payload;
            auto dbytes = digest.bytes();
            put_field(payload, dbytes);
            put_field(payload, sig);
            const auto& peer = *party_.peer;
            env.auth = pke_scheme(peer.enc_scheme_id)
                           .encrypt(peer.enc_public,
                                    BitString::from_bytes(payload, payload.size() * 8), rng_);
            // Short-term PQC security only: the encrypted digest is
            // still treated as fully leaked.
            if (phase == Phase::ECVerify)
                ledger_.digest_leak_bits += params_.l_digest;
            else
                fv_leak_ += params_.l_digest;
            break;
        }
        case AuthMode::OtpDigest: {
            BitString slice = party_.pool.take_reserved(otp_slot_offset(phase, env.direction),
                                                        params_.l_digest, purpose);
            env.auth = otp_encrypt(slice, digest.value).to_bytes();
            break;
        }
        case AuthMode::FinalKeySlice: {
            uint64_t offset = env.direction == Direction::AtoB ? 0 : params_.slice_len;
            party_.pool.log_direct_consumption(round_, offset, offset + params_.slice_len,
                                               purpose);
            env.auth = otp_encrypt(p2_slice(env.direction), digest.value).to_bytes();
            break;
        }
    }
    return env;
}

bool RoundSession::check_key_verify_envelope(const AuthEnvelope& env, const Digest& expected) {
    if (env.direction != peer_direction()) return fail("unexpected envelope direction");
    if (env.mode != expected_mode(env.phase)) return fail("unexpected authentication mode");
    std::string purpose = std::string(to_string(env.phase)) + " " + to_string(env.direction);

    switch (env.mode) {
        case AuthMode::PqcSignOnly: {
            if (env.message != expected.bytes()) return fail("verification digest mismatch");
            if (!verify_peer_signature(env.message, env.auth))
                return fail("digest signature verification failed");
            ledger_.digest_leak_bits += params_.l_digest;
            return true;
        }
        case AuthMode::PqcSignEncrypt: {
            if (env.phase == Phase::ECVerify)
                ledger_.digest_leak_bits += params_.l_digest;
            else
                fv_leak_ += params_.l_digest;
            BitString payload;
            try {
                payload = pke_scheme(party_.enc_kp.scheme_id)
                              .decrypt(party_.enc_kp.private_key, env.auth);
            } catch (const std::invalid_argument&) {
                return fail("undecryptable verification envelope");
            }
            auto bytes = payload.to_bytes();
            std::vector<uint8_t> dbytes, sig;
            try {
                size_t pos = 0;
                dbytes = get_field(bytes, pos);
                sig = get_field(bytes, pos);
                if (pos != bytes.size()) return fail("malformed verification payload");
            } catch (const std::invalid_argument&) {
                return fail("malformed verification payload");
            }
            if (dbytes != expected.bytes()) return fail("verification digest mismatch");
            const auto& peer = *party_.peer;
            if (!signature_scheme(peer.sig_scheme_id)
                     .verify(peer.sig_public, Digest{BitString::from_bytes(dbytes, params_.l_digest)},
                             sig))
                return fail("digest signature verification failed");
            return true;
        }
        case AuthMode::OtpDigest: {
            BitString slice = party_.pool.take_reserved(
                otp_slot_offset(env.phase, env.direction), params_.l_digest, purpose);
            BitString expected_tag = otp_encrypt(slice, expected.value);
            if (env.auth != expected_tag.to_bytes())
                return fail("one-time-pad authentication tag mismatch");
            return true;
        }
        case AuthMode::FinalKeySlice: {
            uint64_t offset = env.direction == Direction::AtoB ? 0 : params_.slice_len;
            party_.pool.log_direct_consumption(round_, offset, offset + params_.slice_len,
                                               purpose);
            BitString expected_tag = otp_encrypt(p2_slice(env.direction), expected.value);
            if (env.auth != expected_tag.to_bytes())
                return fail("final-key slice authentication tag mismatch");
            return true;
        }
    }
    return fail("unknown authentication mode");
}

AuthEnvelope RoundSession::ec_verify_envelope() {
    Digest d = verification_digest(key_, nonce_,
                                   digest_label(Phase::ECVerify, params_.variant, own_direction()),
                                   params_.l_digest);
    return make_key_verify_envelope(Phase::ECVerify, d);
}

bool RoundSession::accept_ec_verify_envelope(const AuthEnvelope& env) {
    if (env.phase != Phase::ECVerify) return fail("unexpected envelope phase");
    Digest expected = verification_digest(
        key_, nonce_, digest_label(Phase::ECVerify, params_.variant, env.direction),
        params_.l_digest);
    return check_key_verify_envelope(env, expected);
}

uint64_t RoundSession::compute_ell() {
    ledger_.margin_bits = params_.margin_bits;
    ell_ = compute_final_length(key_.size(), qber_.rate, ledger_);
    if (params_.variant == Variant::P1 && round_ == 1)
        ell2_ = second_amplification_length(ell_, 2 * uint64_t(params_.l_digest), 0);
    return ell_;
}

AuthEnvelope RoundSession::rand_transfer_envelope() {
    if (role_ != Role::Sender) throw std::logic_error("rand_transfer_envelope: receiver role");
    const uint64_t k = key_.size();
    seed1_ = ToeplitzSeed{BitString::random(rng_, k + ell_ - 1), size_t(k), size_t(ell_)};
    std::vector<const ToeplitzSeed*> seeds{&seed1_};
    if (params_.variant == Variant::P1 && round_ == 1) {
        seed2_ = ToeplitzSeed{BitString::random(rng_, ell_ + ell2_ - 1), size_t(ell_),
                              size_t(ell2_)};
        seeds.push_back(&seed2_);
    }
    AuthEnvelope env;
    env.phase = Phase::RandTransfer;
    env.direction = Direction::AtoB;
    env.mode = expected_mode(Phase::RandTransfer);
    env.message = encode_seeds(seeds);
    env.auth = sign_message_digest(env.message);
    return env;
}

bool RoundSession::accept_rand_transfer(const AuthEnvelope& env) {
    if (role_ != Role::Receiver) throw std::logic_error("accept_rand_transfer: sender role");
    if (env.phase != Phase::RandTransfer || env.direction != Direction::AtoB)
        return fail("unexpected envelope framing");
    if (env.mode != expected_mode(Phase::RandTransfer))
        return fail("unexpected authentication mode");
    if (!verify_peer_signature(env.message, env.auth))
        return fail("random-number signature verification failed");
    auto seeds = decode_seeds(env.message);
    if (!seeds.has_value()) return fail("malformed random-number transfer");
    const bool two_seeds = params_.variant == Variant::P1 && round_ == 1;
    if (seeds->size() != (two_seeds ? 2u : 1u)) return fail("unexpected seed count");
    if ((*seeds)[0].in_len != key_.size() || (*seeds)[0].out_len != ell_ ||
        (*seeds)[0].seed.size() != key_.size() + ell_ - 1)
        return fail("seed dimensions do not match this round");
    seed1_ = (*seeds)[0];
    if (two_seeds) {
        if ((*seeds)[1].in_len != ell_ || (*seeds)[1].out_len != ell2_ ||
            (*seeds)[1].seed.size() != ell_ + ell2_ - 1)
            return fail("second seed dimensions do not match this round");
        seed2_ = (*seeds)[1];
    }
    return true;
}

void RoundSession::amplify() {
    final_ = privacy_amplify(CorrectedKey{key_, ledger_.ec_leak_bits}, seed1_, round_);
}

AuthEnvelope RoundSession::final_verify_envelope() {
    Digest d;
    if (params_.variant == Variant::P2) {
        p2_remainder_ = final_.bits.slice(2 * params_.slice_len,
                                          final_.bits.size() - 2 * params_.slice_len);
        d = verification_digest(p2_remainder_, nonce_,
                                digest_label(Phase::FinalVerify, params_.variant, own_direction()),
                                params_.l_digest);
    } else {
        d = verification_digest(final_.bits, nonce_,
                                digest_label(Phase::FinalVerify, params_.variant, own_direction()),
                                params_.l_digest);
    }
    return make_key_verify_envelope(Phase::FinalVerify, d);
}

bool RoundSession::accept_final_verify_envelope(const AuthEnvelope& env) {
    if (env.phase != Phase::FinalVerify) return fail("unexpected envelope phase");
    Digest expected;
    if (params_.variant == Variant::P2) {
        if (p2_remainder_.empty())
            p2_remainder_ = final_.bits.slice(2 * params_.slice_len,
                                              final_.bits.size() - 2 * params_.slice_len);
        expected = verification_digest(
            p2_remainder_, nonce_,
            digest_label(Phase::FinalVerify, params_.variant, env.direction), params_.l_digest);
    } else {
        expected = verification_digest(
            final_.bits, nonce_,
            digest_label(Phase::FinalVerify, params_.variant, env.direction), params_.l_digest);
    }
    return check_key_verify_envelope(env, expected);
}

void RoundSession::second_amplify() {
    if (!(params_.variant == Variant::P1 && round_ == 1))
        throw std::logic_error("second_amplify: only Protocol 1 round 1 runs step 8");
    final_ = second_amplification(final_, seed2_, fv_leak_, 0);
}

uint64_t RoundSession::settle() {
    if (params_.variant == Variant::P2) {
        party_.pool.append_stored(p2_remainder_);
        return p2_remainder_.size();
    }
    SplitKey split = split_final_key(final_, params_.otp_budget());
    party_.pool.set_reserved(split.reserved_auth_slice, round_);
    party_.pool.append_stored(split.stored_key);
    return split.stored_key.size();
}

// -------------------------------------------------------------------- engine

Engine::Engine(const ProtocolParams& params, Party& alice, Party& bob)
    : params_(params), alice_(alice), bob_(bob) {
    params_.validate();
}

bool Engine::bootstrap() {
    auto record = [this](const Party& from, Direction dir, bool pass) {
        TranscriptRecord rec;
        rec.round = 0;
        rec.phase = "Bootstrap";
        rec.direction = to_string(dir);
        rec.auth_mode = "CaCertificate";
        auto body = from.certificate.serialize();
        rec.message_hash = hex_encode(sha256(body));
        rec.auth_material_hex = hex_encode(from.certificate.ca_signature);
        rec.verdict = pass ? "pass" : "fail";
        transcript_.records.push_back(std::move(rec));
    };

    bool bob_ok = accept_peer_certificate(bob_, alice_.certificate, alice_.id);
    record(alice_, Direction::AtoB, bob_ok);
    if (!bob_ok) return false;
    bool alice_ok = accept_peer_certificate(alice_, bob_.certificate, bob_.id);
    record(bob_, Direction::BtoA, alice_ok);
    if (!alice_ok) return false;
    bootstrapped_ = true;
    return true;
}

RoundOutcome Engine::abort_round(uint32_t round, const std::string& stage,
                                 const std::string& reason, RoundReport report) {
    report.round = round;
    report.success = false;
    report.abort_stage = stage;
    report.abort_reason = reason;
    // Reserved authentication bits of an aborted round are burned, never
    // reused.
    uint64_t discarded_a = alice_.pool.discard_reserved(stage + ": " + reason);
    uint64_t discarded_b = bob_.pool.discard_reserved(stage + ": " + reason);
    report.discarded_bits = discarded_a;
    alice_.pool.add_round_stats(
        PoolRoundStats{round, "abort:" + stage, 0, report.consumed_bits, discarded_a, 0});
    bob_.pool.add_round_stats(
        PoolRoundStats{round, "abort:" + stage, 0, report.consumed_bits, discarded_b, 0});

    RoundOutcome outcome;
    outcome.success = false;
    outcome.abort_stage = stage;
    outcome.abort_reason = reason;
    outcome.net_key_bits = 0;
    outcome.report = std::move(report);
    return outcome;
}

RoundOutcome Engine::run_round(uint32_t round_index, const EngineOptions& opts) {
    if (!bootstrapped_) throw std::logic_error("run_round: bootstrap first");

    RoundReport report;
    report.round = round_index;

    auto consumed_total = [](const KeyPool& pool) {
        uint64_t total = 0;
        for (const auto& ev : pool.consumption_log())
            if (ev.offset_begin != uint64_t(-1)) total += ev.offset_end - ev.offset_begin;
        return total;
    };
    const uint64_t consumed_before_a = consumed_total(alice_.pool);

    auto abort_here = [&](const std::string& stage, const std::string& reason) {
        report.consumed_bits = consumed_total(alice_.pool) - consumed_before_a;
        return abort_round(round_index, stage, reason, report);
    };

    // Protocol 1 rounds >= 2 must hold a full reserved slice on both
    // sides before anything is transmitted.
    if (params_.variant == Variant::P1 && round_index >= 2) {
        if (alice_.pool.reserved_size() < params_.otp_budget() ||
            bob_.pool.reserved_size() < params_.otp_budget())
            return abort_here("KeyBudget", "reserved authentication key missing or too short");
    }

    RoundSession a(alice_, Role::Sender, round_index, params_,
                   DetRng::derive(params_.seed, alice_.id + "/proto", round_index));
    RoundSession b(bob_, Role::Receiver, round_index, params_,
                   DetRng::derive(params_.seed, bob_.id + "/proto", round_index));
    DetRng channel_rng = DetRng::derive(params_.seed, "channel", round_index);

    if (opts.recorder) opts.recorder->pulse_count = params_.channel.pulse_count;

    // Step 1: quantum transmission and the detection-position report.
    auto pulses = a.emit_pulses();
    auto events = transmit_with_tap(pulses, params_.channel, channel_rng, opts.tap);
    b.observe_detections(events);
    auto detection_report_msg = b.detection_report();
    transcript_.add_plain(round_index, "DetectionReport", Direction::BtoA, detection_report_msg);
    if (opts.recorder) opts.recorder->valid_positions = b.valid_positions();
    if (!a.accept_detection_report(detection_report_msg))
        return abort_here("DetectionReport", a.last_error());
    report.detections = a.valid_positions().size();
    if (report.detections == 0)
        return abort_here("DetectionReport", "no valid detections");

    // Step 2: two-way authenticated basis sifting.
    AuthEnvelope basis_a = a.basis_envelope();
    bool ok = b.accept_basis_envelope(basis_a);
    transcript_.add_envelope(round_index, basis_a, ok);
    if (opts.recorder) opts.recorder->basis_a = basis_a;
    if (!ok) return abort_here("BasisSift", b.last_error());

    AuthEnvelope basis_b = b.basis_envelope();
    ok = a.accept_basis_envelope(basis_b);
    transcript_.add_envelope(round_index, basis_b, ok);
    if (opts.recorder) opts.recorder->basis_b = basis_b;
    if (!ok) return abort_here("BasisSift", a.last_error());

    bool sift_a = a.complete_sift();
    bool sift_b = b.complete_sift();
    report.sifted_bits = a.sifted_size();
    if (!sift_a || !sift_b)
        return abort_here("BasisSift", "empty sifted key");
    if (a.coin() != b.coin()) throw std::logic_error("public coin divergence");

    // Step 3: error estimation on a public sample.
    std::vector<uint8_t> reveal_a, reveal_b;
    try {
        reveal_a = a.qber_reveal();
        reveal_b = b.qber_reveal();
    } catch (const std::invalid_argument& e) {
        return abort_here("QberEstimate", e.what());
    }
    transcript_.add_plain(round_index, "QberEstimate", Direction::AtoB, reveal_a);
    transcript_.add_plain(round_index, "QberEstimate", Direction::BtoA, reveal_b);
    bool qber_ok_a = a.accept_qber_reveal(reveal_b);
    bool qber_ok_b = b.accept_qber_reveal(reveal_a);
    report.sampled_bits = a.qber().sampled_positions.size();
    report.qber = a.qber().rate;
    if (!qber_ok_a || !qber_ok_b)
        return abort_here("QberEstimate", a.last_error());

    // Step 3 continued: reconciliation, Alice as reference.
    EcTrace ec = correct_errors(a.working_key(), b.working_key(), a.qber().rate, a.coin());
    a.charge_ec_leak(ec.disclosed_bits);
    b.charge_ec_leak(ec.disclosed_bits);
    for (const auto& msg : ec.messages) {
        std::vector<uint8_t> body;
        put_u32be(body, msg.pass);
        put_u32be(body, msg.level);
        auto bits = encode_bits_message(msg.parities);
        body.insert(body.end(), bits.begin(), bits.end());
        transcript_.add_plain(round_index, "ErrorCorrection",
                              msg.from_reference ? Direction::AtoB : Direction::BtoA, body);
    }
    report.corrected_bits = a.working_key().size();
    report.ec_leak_bits = ec.disclosed_bits;
    if (opts.recorder) opts.recorder->corrected_key = a.working_key();

    // Step 4: two-way error correction verification.
    AuthEnvelope ecv_a = a.ec_verify_envelope();
    ok = b.accept_ec_verify_envelope(ecv_a);
    transcript_.add_envelope(round_index, ecv_a, ok);
    if (opts.recorder) opts.recorder->ec_verify_a = ecv_a;
    if (!ok) return abort_here("ECVerify", b.last_error());

    AuthEnvelope ecv_b = b.ec_verify_envelope();
    ok = a.accept_ec_verify_envelope(ecv_b);
    transcript_.add_envelope(round_index, ecv_b, ok);
    if (opts.recorder) opts.recorder->ec_verify_b = ecv_b;
    if (!ok) return abort_here("ECVerify", a.last_error());

    // Privacy-amplification factor: every disclosed bit is on the ledger
    // before the length is fixed.
    uint64_t ell_a = a.compute_ell();
    uint64_t ell_b = b.compute_ell();
    if (ell_a != ell_b) throw std::logic_error("final-length divergence");
    report.digest_leak_bits = a.ledger().digest_leak_bits;
    report.margin_bits = a.ledger().margin_bits;
    report.ell = ell_a;
    report.ell2 = a.ell2();

    const uint64_t effective_len =
        (params_.variant == Variant::P1 && round_index == 1) ? a.ell2() : ell_a;
    uint64_t needed = params_.variant == Variant::P1 ? params_.otp_budget()
                                                     : 2 * params_.slice_len + 1;
    if (effective_len == 0 || effective_len < needed)
        return abort_here("KeyBudget", "final key cannot fund the next authentication budget");

    // Step 5: random-number transfer.
    AuthEnvelope rand_env = a.rand_transfer_envelope();
    ok = b.accept_rand_transfer(rand_env);
    transcript_.add_envelope(round_index, rand_env, ok);
    if (opts.recorder) opts.recorder->rand_transfer = rand_env;
    if (!ok) return abort_here("RandTransfer", b.last_error());

    // Step 6: privacy amplification.
    a.amplify();
    b.amplify();
    if (opts.recorder) opts.recorder->final_key_first = a.final_key().bits;

    // Step 7: two-way final key verification.
    AuthEnvelope fv_a = a.final_verify_envelope();
    ok = b.accept_final_verify_envelope(fv_a);
    transcript_.add_envelope(round_index, fv_a, ok);
    if (opts.recorder) opts.recorder->final_verify_a = fv_a;
    if (!ok) return abort_here("FinalVerify", b.last_error());

    AuthEnvelope fv_b = b.final_verify_envelope();
    ok = a.accept_final_verify_envelope(fv_b);
    transcript_.add_envelope(round_index, fv_b, ok);
    if (opts.recorder) opts.recorder->final_verify_b = fv_b;
    if (!ok) return abort_here("FinalVerify", a.last_error());

    // Step 8: round-1 second amplification (Protocol 1).
    if (params_.variant == Variant::P1 && round_index == 1) {
        a.second_amplify();
        b.second_amplify();
    }

    uint64_t net_a = a.settle();
    uint64_t net_b = b.settle();
    if (net_a != net_b || alice_.pool.stored() != bob_.pool.stored())
        throw std::logic_error("stored key divergence after settlement");
    if (opts.recorder) {
        opts.recorder->final_key_out = a.final_key().bits;
        opts.recorder->complete = true;
    }

    report.consumed_bits = consumed_total(alice_.pool) - consumed_before_a;
    report.reserved_next_bits =
        params_.variant == Variant::P1 ? params_.otp_budget() : 0;
    report.net_key_bits = net_a;
    report.success = true;

    uint64_t generated = a.final_key().bits.size();
    alice_.pool.add_round_stats(PoolRoundStats{round_index, "success", generated,
                                               report.consumed_bits, 0, net_a});
    bob_.pool.add_round_stats(PoolRoundStats{round_index, "success", generated,
                                             report.consumed_bits, 0, net_b});

    RoundOutcome outcome;
    outcome.success = true;
    outcome.net_key_bits = net_a;
    outcome.report = std::move(report);
    return outcome;
}

ChainSummary Engine::run_chain(uint32_t rounds, const EngineOptions& opts) {
    ChainSummary summary;
    for (uint32_t r = 1; r <= rounds; ++r) {
        ++summary.rounds_attempted;
        RoundOutcome outcome = run_round(r, opts);
        summary.rounds.push_back(outcome.report);
        if (outcome.success) {
            ++summary.rounds_succeeded;
            summary.net_key_bits += outcome.net_key_bits;
        } else if (params_.variant == Variant::P1) {
            // The reserved slice is gone; rather than reuse keys the
            // chain stops here.
            summary.chain_stopped_early = true;
            break;
        }
    }
    return summary;
}

KeyRateReport key_rate_report(const KeyPool& pool, uint64_t t_ms_per_round, size_t l_digest) {
    if (t_ms_per_round == 0)
        throw std::invalid_argument("key_rate_report: round duration must be positive");
    KeyRateReport rep;
    rep.rounds = pool.history().size();
    for (const auto& entry : pool.history()) rep.net_key_bits += entry.stored_delta_bits;
    rep.t_ms_per_round = t_ms_per_round;
    if (rep.rounds > 0)
        rep.net_key_rate_bps =
            double(rep.net_key_bits) * 1000.0 / (double(rep.rounds) * double(t_ms_per_round));
    rep.delta_r_numerator_bits = l_digest;
    uint64_t scaled = uint64_t(l_digest) * 1000;
    rep.delta_r_exact = scaled % t_ms_per_round == 0;
    rep.delta_r_bps_exact = scaled / t_ms_per_round;
    rep.delta_r_bps = double(scaled) / double(t_ms_per_round);
    for (const auto& ev : pool.consumption_log()) {
        if (ev.offset_begin == uint64_t(-1)) continue;
        rep.consumed_by_purpose[ev.purpose] += ev.offset_end - ev.offset_begin;
    }
    return rep;
}

uint64_t preshared_pairs_required(uint64_t user_count) {
    if (user_count < 2)
        throw std::invalid_argument("preshared_pairs_required: need at least two users");
    return user_count * (user_count - 1) / 2;
}

bool final_key_slice_verify(const BitString& final_a, const BitString& final_b,
                            uint64_t slice_len, const BitString& round_nonce, size_t l_digest) {
    if (slice_len != l_digest)
        throw std::invalid_argument("final_key_slice_verify: slice_len must equal l_digest");
    if (final_a.size() < 2 * slice_len + 1 || final_b.size() < 2 * slice_len + 1)
        throw std::invalid_argument("final_key_slice_verify: final keys too short");

    auto tag = [&](const BitString& final_key, Direction dir) {
        uint64_t offset = dir == Direction::AtoB ? 0 : slice_len;
        BitString slice = final_key.slice(offset, slice_len);
        BitString remainder = final_key.slice(2 * slice_len, final_key.size() - 2 * slice_len);
        Digest d = verification_digest(remainder, round_nonce,
                                       std::string("FKR:") + to_string(dir), l_digest);
        return otp_encrypt(slice, d.value);
    };

    // lengths may differ; differing remainder lengths can never verify
    if (final_a.size() != final_b.size()) return false;
    return tag(final_a, Direction::AtoB) == tag(final_b, Direction::AtoB) &&
           tag(final_a, Direction::BtoA) == tag(final_b, Direction::BtoA);
}

}  // namespace qkdauth
