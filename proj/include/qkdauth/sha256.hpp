#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qkdauth {

/// Incremental SHA-256 (FIPS 180-4).
class Sha256 {
public:
    Sha256();

    void update(std::span<const uint8_t> data);
    void update(const void* data, size_t len);

    /// Finalizes and returns the 32-byte digest. The object must not be
    /// updated afterwards.
    std::array<uint8_t, 32> finish();

private:
    void process_block(const uint8_t* block);

    std::array<uint32_t, 8> state_;
    std::array<uint8_t, 64> buffer_;
    uint64_t total_len_ = 0;
    size_t buffer_len_ = 0;
};

std::array<uint8_t, 32> sha256(std::span<const uint8_t> data);
std::array<uint8_t, 32> sha256(const std::string& data);

std::string hex_encode(std::span<const uint8_t> data);

}  // namespace qkdauth
