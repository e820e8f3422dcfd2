#include "dsac/credential.hpp"

#include "dsac/error.hpp"

#include <algorithm>

namespace dsac {

namespace {

template <class F>
auto parse_or_throw(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::validation, std::string("malformed ") + what + ": " + e.what());
    }
}

bool signature_ok(const nlohmann::json& unsigned_part, const std::string& signature_b64,
                  std::span<const std::uint8_t> public_key) {
    try {
        Bytes sig = base64url_decode(signature_b64);
        return verify_bytes(canonical_json(unsigned_part), sig, public_key);
    } catch (const Error&) {
        return false;
    }
}

std::string sign_json(const nlohmann::json& unsigned_part, const KeyPair& key) {
    return base64url_encode(sign_bytes(canonical_json(unsigned_part), key));
}

} // namespace

// ---------------------------------------------------------------- identity token

nlohmann::json IdentityToken::unsigned_json() const {
    return {{"type", "IdentityToken"},
            {"consumer_id", consumer_id},
            {"issuer", issuer},
            {"issued_at", issued_at},
            {"expires_at", expires_at}};
}

nlohmann::json IdentityToken::to_json() const {
    auto j = unsigned_json();
    j["signature"] = signature;
    return j;
}

IdentityToken IdentityToken::from_json(const nlohmann::json& j) {
    return parse_or_throw("identity token", [&] {
        if (j.at("type") != "IdentityToken") throw Error(ErrorKind::validation, "not an identity token");
        IdentityToken t;
        t.consumer_id = j.at("consumer_id").get<std::string>();
        t.issuer = j.at("issuer").get<std::string>();
        t.issued_at = j.at("issued_at").get<Timestamp>();
        t.expires_at = j.at("expires_at").get<Timestamp>();
        t.signature = j.at("signature").get<std::string>();
        return t;
    });
}

std::string IdentityToken::encode() const {
    auto text = canonical_json(to_json());
    return base64url_encode(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

IdentityToken IdentityToken::decode(std::string_view bearer) {
    Bytes raw = base64url_decode(bearer);
    auto j = nlohmann::json::parse(raw.begin(), raw.end(), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::validation, "identity token is not JSON");
    return from_json(j);
}

IdentityToken sign_identity_token(IdentityToken token, const KeyPair& idp_key) {
    if (token.consumer_id.empty()) throw Error(ErrorKind::validation, "identity token needs a consumer id");
    if (token.expires_at <= token.issued_at) throw Error(ErrorKind::validation, "token expires before issuance");
    token.signature = sign_json(token.unsigned_json(), idp_key);
    return token;
}

std::string_view to_string(TokenVerdict v) {
    switch (v) {
        case TokenVerdict::ok:               return "ok";
        case TokenVerdict::untrusted_issuer: return "untrusted_issuer";
        case TokenVerdict::bad_signature:    return "bad_signature";
        case TokenVerdict::expired:          return "expired";
        case TokenVerdict::not_yet_valid:    return "not_yet_valid";
    }
    return "unknown";
}

TokenVerdict verify_identity_token(const IdentityToken& token, std::string_view expected_issuer,
                                   std::span<const std::uint8_t> idp_public_key, Timestamp now) {
    if (token.issuer != expected_issuer) return TokenVerdict::untrusted_issuer;
    if (!signature_ok(token.unsigned_json(), token.signature, idp_public_key)) return TokenVerdict::bad_signature;
    if (now + kClockSkew < token.issued_at) return TokenVerdict::not_yet_valid;
    if (now >= token.expires_at) return TokenVerdict::expired;
    return TokenVerdict::ok;
}

// ---------------------------------------------------------- capability credential

nlohmann::json CapabilityCredential::unsigned_json() const {
    auto caps = nlohmann::json::array();
    for (const auto& c : capabilities)
        caps.push_back({{"operation", to_string(c.operation)}, {"resource", resource_to_json(c.resource)}});
    return {{"type", "CapabilityCredential"},
            {"issuer", {{"id", issuer}, {"key_id", issuer_key_id}}},
            {"issued_at", issued_at},
            {"expires_at", expires_at},
            {"credential_subject", {{"public_key", base64url_encode(subject_public_key)}, {"capabilities", caps}}},
            {"credential_status",
             {{"status_list_url", credential_status.status_list_url},
              {"status_index", credential_status.status_index}}}};
}

nlohmann::json CapabilityCredential::to_json() const {
    auto j = unsigned_json();
    j["signature"] = signature;
    return j;
}

CapabilityCredential CapabilityCredential::from_json(const nlohmann::json& j) {
    return parse_or_throw("capability credential", [&] {
        if (j.at("type") != "CapabilityCredential") throw Error(ErrorKind::validation, "not a capability credential");
        CapabilityCredential vc;
        vc.issuer = j.at("issuer").at("id").get<std::string>();
        vc.issuer_key_id = j.at("issuer").at("key_id").get<std::string>();
        vc.issued_at = j.at("issued_at").get<Timestamp>();
        vc.expires_at = j.at("expires_at").get<Timestamp>();
        const auto& subject = j.at("credential_subject");
        vc.subject_public_key = base64url_decode(subject.at("public_key").get<std::string>());
        for (const auto& c : subject.at("capabilities"))
            vc.capabilities.push_back({c.at("operation").get<Operation>(), resource_from_json(c.at("resource"))});
        const auto& status = j.at("credential_status");
        vc.credential_status.status_list_url = status.at("status_list_url").get<std::string>();
        vc.credential_status.status_index = status.at("status_index").get<std::size_t>();
        vc.signature = j.at("signature").get<std::string>();
        return vc;
    });
}

std::vector<Policy> CapabilityCredential::policies_for(const std::string& consumer_id) const {
    std::vector<Policy> out;
    out.reserve(capabilities.size());
    for (const auto& c : capabilities) out.push_back({consumer_id, c.operation, c.resource});
    return out;
}

CapabilityCredential sign_credential(CapabilityCredential vc, const KeyPair& pap_key) {
    if (vc.issuer.empty()) throw Error(ErrorKind::validation, "credential needs an issuer");
    if (vc.expires_at <= vc.issued_at) throw Error(ErrorKind::validation, "credential expires before issuance");
    if (vc.subject_public_key.size() != 32) throw Error(ErrorKind::validation, "subject key must be Ed25519");
    if (vc.credential_status.status_list_url.empty())
        throw Error(ErrorKind::validation, "credential needs a status list URL");
    vc.issuer_key_id = pap_key.key_id;
    vc.signature = sign_json(vc.unsigned_json(), pap_key);
    return vc;
}

std::optional<StatusSnapshot> open_status_list(const StatusListCredential& list, const TrustedIssuers& trusted) {
    auto it = trusted.find(list.issuer);
    if (it == trusted.end()) return std::nullopt;
    if (!signature_ok(list.unsigned_json(), list.signature, it->second)) return std::nullopt;
    try {
        return StatusSnapshot{list.id, list.issuer, list.issued_at, list.bits()};
    } catch (const Error&) {
        return std::nullopt;
    }
}

std::string_view to_string(VcVerdict v) {
    switch (v) {
        case VcVerdict::ok:               return "ok";
        case VcVerdict::untrusted_issuer: return "untrusted_issuer";
        case VcVerdict::bad_signature:    return "bad_signature";
        case VcVerdict::expired:          return "expired";
        case VcVerdict::not_yet_valid:    return "not_yet_valid";
        case VcVerdict::revoked:          return "revoked";
        case VcVerdict::status_unknown:   return "status_unknown";
    }
    return "unknown";
}

VcVerdict verify_credential(const CapabilityCredential& vc, const TrustedIssuers& trusted, Timestamp now,
                            const StatusSnapshot* list) {
    auto it = trusted.find(vc.issuer);
    if (it == trusted.end()) return VcVerdict::untrusted_issuer;
    if (!signature_ok(vc.unsigned_json(), vc.signature, it->second)) return VcVerdict::bad_signature;
    if (now + kClockSkew < vc.issued_at) return VcVerdict::not_yet_valid;
    if (now >= vc.expires_at) return VcVerdict::expired;
    if (list == nullptr || list->id != vc.credential_status.status_list_url || list->issuer != vc.issuer ||
        vc.credential_status.status_index >= list->bits.size())
        return VcVerdict::status_unknown;
    if (list->bits.test(vc.credential_status.status_index)) return VcVerdict::revoked;
    return VcVerdict::ok;
}

// ------------------------------------------------------------------ presentation

nlohmann::json Presentation::unsigned_json() const {
    auto creds = nlohmann::json::array();
    for (const auto& vc : credentials) creds.push_back(vc.to_json());
    return {{"type", "Presentation"},
            {"credentials", creds},
            {"nonce", nonce},
            {"audience", audience},
            {"created_at", created_at}};
}

nlohmann::json Presentation::to_json() const {
    auto j = unsigned_json();
    j["signature"] = signature;
    return j;
}

Presentation Presentation::from_json(const nlohmann::json& j) {
    return parse_or_throw("presentation", [&] {
        if (j.at("type") != "Presentation") throw Error(ErrorKind::validation, "not a presentation");
        Presentation vp;
        for (const auto& c : j.at("credentials")) vp.credentials.push_back(CapabilityCredential::from_json(c));
        vp.nonce = j.at("nonce").get<std::string>();
        vp.audience = j.at("audience").get<std::string>();
        vp.created_at = j.at("created_at").get<Timestamp>();
        vp.signature = j.at("signature").get<std::string>();
        return vp;
    });
}

Presentation Presentation::decode(std::string_view text) {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::validation, "presentation is not JSON");
    return from_json(j);
}

Presentation create_presentation(std::vector<CapabilityCredential> vcs, std::string nonce, std::string audience,
                                 const KeyPair& subject_key, Timestamp now) {
    if (vcs.empty()) throw Error(ErrorKind::validation, "presentation needs at least one credential");
    for (const auto& vc : vcs)
        if (vc.subject_public_key != subject_key.public_key)
            throw Error(ErrorKind::key_mismatch, "signing key does not match credential subject");
    Presentation vp;
    vp.credentials = std::move(vcs);
    vp.nonce = std::move(nonce);
    vp.audience = std::move(audience);
    vp.created_at = now;
    vp.signature = sign_json(vp.unsigned_json(), subject_key);
    return vp;
}

std::string_view to_string(VpVerdictKind v) {
    switch (v) {
        case VpVerdictKind::ok:             return "ok";
        case VpVerdictKind::bad_proof:      return "bad_proof";
        case VpVerdictKind::wrong_nonce:    return "wrong_nonce";
        case VpVerdictKind::wrong_audience: return "wrong_audience";
        case VpVerdictKind::vc_failure:     return "vc_failure";
    }
    return "unknown";
}

std::string VpVerdict::reason() const {
    if (kind == VpVerdictKind::vc_failure) return std::string(to_string(credential));
    return std::string(to_string(kind));
}

VpVerdict verify_presentation(const Presentation& vp, std::string_view expected_nonce,
                              std::string_view expected_audience, const TrustedIssuers& trusted, Timestamp now,
                              const StatusLists& lists) {
    if (vp.credentials.empty()) return {VpVerdictKind::bad_proof};
    const Bytes& subject = vp.credentials.front().subject_public_key;
    bool same_subject = std::ranges::all_of(
        vp.credentials, [&](const CapabilityCredential& vc) { return vc.subject_public_key == subject; });
    if (!same_subject || !signature_ok(vp.unsigned_json(), vp.signature, subject)) return {VpVerdictKind::bad_proof};
    if (expected_nonce.empty() || !constant_time_equal(vp.nonce, expected_nonce)) return {VpVerdictKind::wrong_nonce};
    if (detail::normalize_url(vp.audience) != detail::normalize_url(expected_audience))
        return {VpVerdictKind::wrong_audience};
    for (std::size_t i = 0; i < vp.credentials.size(); ++i) {
        const auto& vc = vp.credentials[i];
        auto it = lists.find(vc.credential_status.status_list_url);
        VcVerdict v = verify_credential(vc, trusted, now, it == lists.end() ? nullptr : &it->second);
        if (v != VcVerdict::ok) return {VpVerdictKind::vc_failure, v, i};
    }
    return {};
}

} // namespace dsac
