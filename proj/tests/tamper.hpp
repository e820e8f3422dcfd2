#pragma once

// Single-field mutations of signed credentials and presentations, each paired
// with the verdict the verifier must return.

#include "dsac/credential.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dsac::testing {

struct TamperCase {
    std::string name;
    std::string expected;
    std::string actual;
    [[nodiscard]] bool pass() const { return expected == actual; }
};

inline std::vector<TamperCase> run_tamper_suite() {
    const Timestamp now = 10'000;
    const std::string list_url = "http://pap.example/status-list";
    const std::string audience = "http://pep.example";
    const std::string nonce = "nonce-123";

    Bytes s1(32, 21), s2(32, 22), s3(32, 23), s4(32, 24);
    auto pap = KeyPair::from_seed(s1, "pap-key");
    auto other_pap = KeyPair::from_seed(s2, "other-key");
    auto holder = KeyPair::from_seed(s3, "holder");
    auto stranger = KeyPair::from_seed(s4, "stranger");
    TrustedIssuers trusted{{"pap", pap.public_key}, {"other", other_pap.public_key}};

    auto snapshot = *open_status_list(sign_status_list(list_url, Bitstring(64), "pap", now, pap), trusted);
    StatusLists lists{{list_url, snapshot}};

    CapabilityCredential base;
    base.issuer = "pap";
    base.subject_public_key = holder.public_key;
    base.capabilities = {{Operation::Read, ResourceUrl::type("https://example.org/types/SmartLamp")}};
    base.issued_at = now - 100;
    base.expires_at = now + 1000;
    base.credential_status = {list_url, 3};
    auto vc = sign_credential(base, pap);

    std::vector<TamperCase> out;
    auto vc_case = [&](std::string name, VcVerdict expected, const std::function<void(CapabilityCredential&)>& mutate) {
        auto copy = vc;
        mutate(copy);
        out.push_back({"vc." + name, std::string(to_string(expected)),
                       std::string(to_string(verify_credential(copy, trusted, now, &snapshot)))});
    };
    vc_case("untouched", VcVerdict::ok, [](auto&) {});
    vc_case("issuer_untrusted", VcVerdict::untrusted_issuer, [](auto& v) { v.issuer = "mallory"; });
    vc_case("issuer_other_trusted", VcVerdict::bad_signature, [](auto& v) { v.issuer = "other"; });
    vc_case("capability_resource", VcVerdict::bad_signature, [](auto& v) {
        v.capabilities[0].resource = ResourceUrl::type("https://example.org/types/Other");
    });
    vc_case("capability_operation", VcVerdict::bad_signature,
            [](auto& v) { v.capabilities[0].operation = Operation::Write; });
    vc_case("capability_added", VcVerdict::bad_signature, [](auto& v) {
        v.capabilities.push_back({Operation::Subscribe, ResourceUrl::object("urn:x:1")});
    });
    vc_case("capability_removed", VcVerdict::bad_signature, [](auto& v) { v.capabilities.clear(); });
    vc_case("expiry_extended", VcVerdict::bad_signature, [](auto& v) { v.expires_at += 100'000; });
    vc_case("issued_at_moved", VcVerdict::bad_signature, [](auto& v) { v.issued_at -= 1; });
    vc_case("status_index", VcVerdict::bad_signature, [](auto& v) { v.credential_status.status_index = 4; });
    vc_case("status_list_url", VcVerdict::bad_signature,
            [](auto& v) { v.credential_status.status_list_url = "http://pap.example/status-list/2"; });
    vc_case("subject_key", VcVerdict::bad_signature, [&](auto& v) { v.subject_public_key = stranger.public_key; });
    vc_case("signature_bytes", VcVerdict::bad_signature, [](auto& v) {
        auto sig = base64url_decode(v.signature);
        sig[0] ^= 1;
        v.signature = base64url_encode(sig);
    });

    // Honestly signed but outside its window or revoked.
    auto expired = base;
    expired.expires_at = now;
    out.push_back({"vc.expired", "expired",
                   std::string(to_string(verify_credential(sign_credential(expired, pap), trusted, now, &snapshot)))});
    auto revoked_snapshot = *open_status_list(
        revoke(sign_status_list(list_url, Bitstring(64), "pap", now, pap), 3, pap, now), trusted);
    out.push_back({"vc.revoked", "revoked",
                   std::string(to_string(verify_credential(vc, trusted, now, &revoked_snapshot)))});

    auto vp = create_presentation({vc}, nonce, audience, holder, now);
    auto vp_case = [&](std::string name, const std::string& expected, const std::function<void(Presentation&)>& mutate) {
        auto copy = vp;
        mutate(copy);
        out.push_back({"vp." + name, expected,
                       verify_presentation(copy, nonce, audience, trusted, now, lists).reason()});
    };
    vp_case("untouched", "ok", [](auto&) {});
    vp_case("nonce_field", "bad_proof", [](auto& p) { p.nonce = "nonce-124"; });
    vp_case("audience_field", "bad_proof", [](auto& p) { p.audience = "http://mal.example"; });
    vp_case("created_at", "bad_proof", [](auto& p) { p.created_at += 1; });
    vp_case("embedded_vc_expiry", "bad_proof", [](auto& p) { p.credentials[0].expires_at += 1; });
    vp_case("embedded_vc_status_index", "bad_proof", [](auto& p) { p.credentials[0].credential_status.status_index = 9; });
    vp_case("resigned_other_nonce", "wrong_nonce",
            [&](auto& p) { p = create_presentation({vc}, "other-nonce", audience, holder, now); });
    vp_case("resigned_other_audience", "wrong_audience",
            [&](auto& p) { p = create_presentation({vc}, nonce, "http://mal.example", holder, now); });
    vp_case("resigned_tampered_vc", "bad_signature", [&](auto& p) {
        auto v = vc;
        v.credential_status.status_index = 4;
        p = create_presentation({v}, nonce, audience, holder, now);
    });
    vp_case("signed_by_stranger", "bad_proof", [&](auto& p) {
        p.signature = base64url_encode(sign_bytes(canonical_json(p.unsigned_json()), stranger));
    });
    return out;
}

} // namespace dsac::testing
