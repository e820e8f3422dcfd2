#include "dsac/status_list.hpp"

#include "dsac/error.hpp"

#include <zlib.h>

#include <bit>

namespace dsac {

bool Bitstring::test(std::size_t i) const {
    if (i >= bit_count_) throw Error(ErrorKind::out_of_range, "bit index out of range");
    return (bytes_[i / 8] >> (7 - i % 8)) & 1U;
}

void Bitstring::set(std::size_t i, bool value) {
    if (i >= bit_count_) throw Error(ErrorKind::out_of_range, "bit index out of range");
    auto mask = static_cast<std::uint8_t>(1U << (7 - i % 8));
    if (value) bytes_[i / 8] |= mask;
    else bytes_[i / 8] &= static_cast<std::uint8_t>(~mask);
}

std::size_t Bitstring::count() const noexcept {
    std::size_t n = 0;
    for (auto b : bytes_) n += static_cast<std::size_t>(std::popcount(b));
    return n;
}

Bitstring Bitstring::from_bytes(Bytes bytes, std::size_t bit_count) {
    if (bytes.size() != (bit_count + 7) / 8)
        throw Error(ErrorKind::corrupt, "status list length does not match bit count");
    Bitstring b;
    b.bit_count_ = bit_count;
    b.bytes_ = std::move(bytes);
    return b;
}

Bytes compress_list(const Bitstring& bits) {
    z_stream zs{};
    // windowBits 15 + 16 selects the gzip container.
    if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, 15 + 16, 9, Z_DEFAULT_STRATEGY) != Z_OK)
        throw std::runtime_error("deflateInit2 failed");
    Bytes out(deflateBound(&zs, static_cast<uLong>(bits.bytes().size())) + 32);
    zs.next_in = const_cast<Bytef*>(bits.bytes().data());
    zs.avail_in = static_cast<uInt>(bits.bytes().size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw std::runtime_error("deflate did not finish");
    return out;
}

Bitstring decompress_list(std::span<const std::uint8_t> payload, std::size_t bit_count) {
    const std::size_t expected = (bit_count + 7) / 8;
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) throw std::runtime_error("inflateInit2 failed");
    // One spare byte so an over-long payload is detected instead of truncated.
    Bytes out(expected + 1);
    zs.next_in = const_cast<Bytef*>(payload.data());
    zs.avail_in = static_cast<uInt>(payload.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = inflate(&zs, Z_FINISH);
    std::size_t produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error(ErrorKind::corrupt, "status list payload is not a complete gzip stream");
    if (produced != expected) throw Error(ErrorKind::corrupt, "status list length does not match bit count");
    out.resize(produced);
    return Bitstring::from_bytes(std::move(out), bit_count);
}

nlohmann::json StatusListCredential::unsigned_json() const {
    return {{"id", id},
            {"issuer", issuer},
            {"issued_at", issued_at},
            {"bit_count", bit_count},
            {"encoded_list", encoded_list}};
}

nlohmann::json StatusListCredential::to_json() const {
    auto j = unsigned_json();
    j["signature"] = signature;
    return j;
}

StatusListCredential StatusListCredential::from_json(const nlohmann::json& j) {
    StatusListCredential s;
    try {
        s.id = j.at("id").get<std::string>();
        s.issuer = j.at("issuer").get<std::string>();
        s.issued_at = j.at("issued_at").get<Timestamp>();
        s.bit_count = j.at("bit_count").get<std::size_t>();
        s.encoded_list = j.at("encoded_list").get<std::string>();
        s.signature = j.at("signature").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::validation, std::string("malformed status list credential: ") + e.what());
    }
    return s;
}

Bitstring StatusListCredential::bits() const {
    return decompress_list(base64url_decode(encoded_list), bit_count);
}

StatusListCredential sign_status_list(std::string id, const Bitstring& bits, std::string issuer,
                                      Timestamp issued_at, const KeyPair& key) {
    StatusListCredential s;
    s.id = std::move(id);
    s.issuer = std::move(issuer);
    s.issued_at = issued_at;
    s.bit_count = bits.size();
    s.encoded_list = base64url_encode(compress_list(bits));
    s.signature = base64url_encode(sign_bytes(canonical_json(s.unsigned_json()), key));
    return s;
}

bool verify_status_list(const StatusListCredential& list, std::span<const std::uint8_t> issuer_public_key) {
    try {
        Bytes sig = base64url_decode(list.signature);
        if (!verify_bytes(canonical_json(list.unsigned_json()), sig, issuer_public_key)) return false;
        (void)list.bits();
        return true;
    } catch (const Error&) {
        return false;
    }
}

StatusListCredential revoke(const StatusListCredential& list, std::size_t index, const KeyPair& key,
                            Timestamp now) {
    if (index >= list.bit_count) throw Error(ErrorKind::out_of_range, "status index out of range");
    Bitstring bits = list.bits();
    bits.set(index);
    return sign_status_list(list.id, bits, list.issuer, now, key);
}

} // namespace dsac
