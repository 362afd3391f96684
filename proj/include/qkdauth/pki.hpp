#pragma once

#include <string>
#include <vector>

#include "qkdauth/schemes.hpp"

namespace qkdauth {

/// Binding of one subject id to its verification and encryption public
/// keys, signed by the certificate authority.
struct Certificate {
    std::string subject_id;
    std::string sig_scheme_id;
    std::vector<uint8_t> sig_public;
    std::string enc_scheme_id;
    std::vector<uint8_t> enc_public;
    std::vector<uint8_t> ca_signature;

    /// Canonical body encoding (everything except ca_signature),
    /// length-prefixed fields with big-endian 32-bit lengths.
    std::vector<uint8_t> encode_body() const;
    std::vector<uint8_t> serialize() const;
    static Certificate deserialize(std::span<const uint8_t> data);
};

class CertificateAuthority {
public:
    CertificateAuthority(DetRng& rng, uint32_t max_certificates, size_t digest_bits = 256);

    Certificate issue(const std::string& subject_id, const std::string& sig_scheme_id,
                      std::span<const uint8_t> sig_public, const std::string& enc_scheme_id,
                      std::span<const uint8_t> enc_public);

    const std::vector<uint8_t>& public_key() const { return signer_.keypair().public_key; }
    std::string scheme_id() const { return signer_.keypair().scheme_id; }

private:
    LamportSigner signer_;
    size_t digest_bits_;
};

/// True iff cert.ca_signature verifies over the certificate body under
/// the CA verification key. Any change to the body flips this to false.
bool verify_certificate(std::span<const uint8_t> ca_public, const std::string& ca_scheme_id,
                        const Certificate& cert, size_t digest_bits = 256);

}  // namespace qkdauth
