#include "qkdauth/pki.hpp"

#include <stdexcept>

namespace qkdauth {

namespace {

std::span<const uint8_t> str_span(const std::string& s) {
    return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

}  // namespace

std::vector<uint8_t> Certificate::encode_body() const {
    std::vector<uint8_t> out;
    put_field(out, str_span(subject_id));
    put_field(out, str_span(sig_scheme_id));
    put_field(out, sig_public);
    put_field(out, str_span(enc_scheme_id));
    put_field(out, enc_public);
    return out;
}

std::vector<uint8_t> Certificate::serialize() const {
    std::vector<uint8_t> out = encode_body();
    put_field(out, ca_signature);
    return out;
}

Certificate Certificate::deserialize(std::span<const uint8_t> data) {
    size_t pos = 0;
    Certificate cert;
    auto sub = get_field(data, pos);
    cert.subject_id.assign(sub.begin(), sub.end());
    auto sid = get_field(data, pos);
    cert.sig_scheme_id.assign(sid.begin(), sid.end());
    cert.sig_public = get_field(data, pos);
    auto eid = get_field(data, pos);
    cert.enc_scheme_id.assign(eid.begin(), eid.end());
    cert.enc_public = get_field(data, pos);
    cert.ca_signature = get_field(data, pos);
    if (pos != data.size()) throw std::invalid_argument("trailing bytes in certificate");
    return cert;
}

CertificateAuthority::CertificateAuthority(DetRng& rng, uint32_t max_certificates,
                                           size_t digest_bits)
    : digest_bits_(digest_bits) {
    SigParams params{digest_bits, max_certificates};
    signer_ = LamportSigner(signature_scheme(kLamportSchemeId).keygen(rng, params));
}

Certificate CertificateAuthority::issue(const std::string& subject_id,
                                        const std::string& sig_scheme_id,
                                        std::span<const uint8_t> sig_public,
                                        const std::string& enc_scheme_id,
                                        std::span<const uint8_t> enc_public) {
    Certificate cert;
    cert.subject_id = subject_id;
    cert.sig_scheme_id = sig_scheme_id;
    cert.sig_public.assign(sig_public.begin(), sig_public.end());
    cert.enc_scheme_id = enc_scheme_id;
    cert.enc_public.assign(enc_public.begin(), enc_public.end());
    cert.ca_signature = signer_.sign(hash_digest(cert.encode_body(), digest_bits_));
    return cert;
}

bool verify_certificate(std::span<const uint8_t> ca_public, const std::string& ca_scheme_id,
                        const Certificate& cert, size_t digest_bits) {
    try {
        return signature_scheme(ca_scheme_id)
            .verify(ca_public, hash_digest(cert.encode_body(), digest_bits), cert.ca_signature);
    } catch (const std::invalid_argument&) {
        return false;
    }
}

}  // namespace qkdauth
