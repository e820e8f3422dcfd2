#pragma once

#include "dsac/crypto.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace dsac {

/// Seconds since the Unix epoch.
using Timestamp = std::int64_t;

/// Fixed-length bitstring. Bit 0 is the most significant bit of byte 0.
class Bitstring {
public:
    Bitstring() = default;
    explicit Bitstring(std::size_t bit_count) : bit_count_(bit_count), bytes_((bit_count + 7) / 8, 0) {}

    [[nodiscard]] std::size_t size() const noexcept { return bit_count_; }
    [[nodiscard]] const Bytes& bytes() const noexcept { return bytes_; }

    [[nodiscard]] bool test(std::size_t i) const;
    void set(std::size_t i, bool value = true);
    [[nodiscard]] std::size_t count() const noexcept;

    static Bitstring from_bytes(Bytes bytes, std::size_t bit_count);

    friend bool operator==(const Bitstring&, const Bitstring&) = default;

private:
    std::size_t bit_count_ = 0;
    Bytes bytes_;
};

/// gzip container, best compression.
Bytes compress_list(const Bitstring& bits);
/// Throws Error(corrupt) if the payload is not valid gzip or does not
/// decompress to exactly ceil(bit_count / 8) bytes.
Bitstring decompress_list(std::span<const std::uint8_t> payload, std::size_t bit_count);

/// Signed wrapper credential carrying a compressed status list.
struct StatusListCredential {
    std::string id;  // the URL the list is published at
    std::string issuer;
    Timestamp issued_at = 0;
    std::size_t bit_count = 0;
    std::string encoded_list;  // base64url(gzip(bits))
    std::string signature;     // base64url Ed25519 over canonical unsigned JSON

    [[nodiscard]] nlohmann::json unsigned_json() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static StatusListCredential from_json(const nlohmann::json& j);

    /// Decoded bits; throws Error(corrupt).
    [[nodiscard]] Bitstring bits() const;
};

StatusListCredential sign_status_list(std::string id, const Bitstring& bits, std::string issuer,
                                      Timestamp issued_at, const KeyPair& key);

/// Signature check plus the bit-count consistency of the payload.
bool verify_status_list(const StatusListCredential& list, std::span<const std::uint8_t> issuer_public_key);

/// Sets bit \p index and re-signs. Idempotent. Throws Error(out_of_range).
StatusListCredential revoke(const StatusListCredential& list, std::size_t index, const KeyPair& key,
                            Timestamp now);

} // namespace dsac
