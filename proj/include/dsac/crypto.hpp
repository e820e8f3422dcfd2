#pragma once

#include "dsac/error.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dsac {

using Bytes = std::vector<std::uint8_t>;

std::string base64url_encode(std::span<const std::uint8_t> data);
/// Throws Error(corrupt) on malformed input.
Bytes base64url_decode(std::string_view text);

/// Canonical form for signing: sorted keys, no insignificant whitespace, UTF-8.
std::string canonical_json(const nlohmann::json& j);

/// Base64url of \p n_bytes random bytes.
std::string random_token(std::size_t n_bytes = 16);

/// Ed25519 key material.
struct KeyPair {
    Bytes public_key;   // 32 bytes
    Bytes private_key;  // 64 bytes (libsodium seed||pk form)
    std::string key_id;

    static KeyPair generate(std::string key_id);
    /// Deterministic key from a 32-byte seed; used by tests and fixtures.
    static KeyPair from_seed(std::span<const std::uint8_t> seed, std::string key_id);

    [[nodiscard]] std::string public_key_b64() const { return base64url_encode(public_key); }

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] nlohmann::json public_json() const;
    static KeyPair from_json(const nlohmann::json& j);
};

Bytes sign_bytes(std::string_view message, const KeyPair& key);
bool verify_bytes(std::string_view message, std::span<const std::uint8_t> signature,
                  std::span<const std::uint8_t> public_key);

/// Short stable identifier of a public key (base64url of a BLAKE2b-128 digest).
std::string key_fingerprint(std::span<const std::uint8_t> public_key);

/// Salted keyed hash for stored secrets, and a constant-time check against it.
struct SecretHash {
    std::string salt;
    std::string digest;
};
SecretHash hash_secret(std::string_view secret);
bool check_secret(std::string_view secret, const SecretHash& stored);

/// Constant-time comparison of two strings of possibly different length.
bool constant_time_equal(std::string_view a, std::string_view b);

} // namespace dsac
