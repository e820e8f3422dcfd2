#include "dsac/crypto.hpp"

#include "dsac/error.hpp"

#include <sodium.h>

#include <stdexcept>

namespace dsac {

namespace {

void ensure_sodium() {
    static const bool ok = sodium_init() >= 0;
    if (!ok) throw std::runtime_error("libsodium initialisation failed");
}

} // namespace

std::string base64url_encode(std::span<const std::uint8_t> data) {
    ensure_sodium();
    const int variant = sodium_base64_VARIANT_URLSAFE_NO_PADDING;
    std::string out(sodium_base64_ENCODED_LEN(data.size(), variant), '\0');
    sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), variant);
    out.resize(std::char_traits<char>::length(out.c_str()));
    return out;
}

Bytes base64url_decode(std::string_view text) {
    ensure_sodium();
    Bytes out(text.size() * 3 / 4 + 3);
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, &end,
                          sodium_base64_VARIANT_URLSAFE_NO_PADDING) != 0 ||
        end != text.data() + text.size())
        throw Error(ErrorKind::corrupt, "malformed base64url");
    out.resize(len);
    return out;
}

std::string canonical_json(const nlohmann::json& j) {
    // nlohmann::json objects are std::map-backed: keys come out sorted bytewise.
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

std::string random_token(std::size_t n_bytes) {
    ensure_sodium();
    Bytes buf(n_bytes);
    randombytes_buf(buf.data(), buf.size());
    return base64url_encode(buf);
}

KeyPair KeyPair::generate(std::string key_id) {
    ensure_sodium();
    KeyPair k;
    k.public_key.resize(crypto_sign_PUBLICKEYBYTES);
    k.private_key.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_keypair(k.public_key.data(), k.private_key.data());
    k.key_id = std::move(key_id);
    return k;
}

KeyPair KeyPair::from_seed(std::span<const std::uint8_t> seed, std::string key_id) {
    ensure_sodium();
    if (seed.size() != crypto_sign_SEEDBYTES) throw Error(ErrorKind::validation, "seed must be 32 bytes");
    KeyPair k;
    k.public_key.resize(crypto_sign_PUBLICKEYBYTES);
    k.private_key.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_seed_keypair(k.public_key.data(), k.private_key.data(), seed.data());
    k.key_id = std::move(key_id);
    return k;
}

nlohmann::json KeyPair::to_json() const {
    return {{"key_id", key_id},
            {"public_key", base64url_encode(public_key)},
            {"private_key", base64url_encode(private_key)}};
}

nlohmann::json KeyPair::public_json() const {
    return {{"key_id", key_id}, {"public_key", base64url_encode(public_key)}};
}

KeyPair KeyPair::from_json(const nlohmann::json& j) {
    KeyPair k;
    try {
        k.key_id = j.at("key_id").get<std::string>();
        k.public_key = base64url_decode(j.at("public_key").get<std::string>());
        if (j.contains("private_key")) k.private_key = base64url_decode(j.at("private_key").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::validation, std::string("bad key file: ") + e.what());
    }
    if (k.public_key.size() != crypto_sign_PUBLICKEYBYTES ||
        (!k.private_key.empty() && k.private_key.size() != crypto_sign_SECRETKEYBYTES))
        throw Error(ErrorKind::validation, "bad key length");
    return k;
}

Bytes sign_bytes(std::string_view message, const KeyPair& key) {
    ensure_sodium();
    if (key.private_key.size() != crypto_sign_SECRETKEYBYTES)
        throw Error(ErrorKind::validation, "key pair has no private key");
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, reinterpret_cast<const unsigned char*>(message.data()),
                         message.size(), key.private_key.data());
    return sig;
}

bool verify_bytes(std::string_view message, std::span<const std::uint8_t> signature,
                  std::span<const std::uint8_t> public_key) {
    ensure_sodium();
    if (signature.size() != crypto_sign_BYTES || public_key.size() != crypto_sign_PUBLICKEYBYTES) return false;
    return crypto_sign_verify_detached(signature.data(), reinterpret_cast<const unsigned char*>(message.data()),
                                       message.size(), public_key.data()) == 0;
}

std::string key_fingerprint(std::span<const std::uint8_t> public_key) {
    ensure_sodium();
    Bytes digest(16);
    crypto_generichash(digest.data(), digest.size(), public_key.data(), public_key.size(), nullptr, 0);
    return base64url_encode(digest);
}

SecretHash hash_secret(std::string_view secret) {
    ensure_sodium();
    Bytes salt(crypto_generichash_KEYBYTES);
    randombytes_buf(salt.data(), salt.size());
    Bytes digest(crypto_generichash_BYTES);
    crypto_generichash(digest.data(), digest.size(), reinterpret_cast<const unsigned char*>(secret.data()),
                       secret.size(), salt.data(), salt.size());
    return {base64url_encode(salt), base64url_encode(digest)};
}

bool check_secret(std::string_view secret, const SecretHash& stored) {
    ensure_sodium();
    Bytes salt = base64url_decode(stored.salt);
    Bytes expected = base64url_decode(stored.digest);
    Bytes digest(crypto_generichash_BYTES);
    crypto_generichash(digest.data(), digest.size(), reinterpret_cast<const unsigned char*>(secret.data()),
                       secret.size(), salt.data(), salt.size());
    return expected.size() == digest.size() && sodium_memcmp(expected.data(), digest.data(), digest.size()) == 0;
}

bool constant_time_equal(std::string_view a, std::string_view b) {
    ensure_sodium();
    // Compare digests so the running time does not depend on where the inputs differ.
    unsigned char da[32];
    unsigned char db[32];
    crypto_generichash(da, sizeof da, reinterpret_cast<const unsigned char*>(a.data()), a.size(), nullptr, 0);
    crypto_generichash(db, sizeof db, reinterpret_cast<const unsigned char*>(b.data()), b.size(), nullptr, 0);
    return sodium_memcmp(da, db, sizeof da) == 0;
}

} // namespace dsac
