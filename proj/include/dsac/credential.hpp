#pragma once

/*! \file
 * \brief Identity tokens, capability credentials and presentations.
 *
 * Every signed structure is signed over the canonical JSON of all of its
 * fields except "signature". Verification functions never throw on bad
 * input; they return a verdict. Callers inject "now".
 */

#include "dsac/crypto.hpp"
#include "dsac/policy.hpp"
#include "dsac/status_list.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dsac {

/// Accepted clock difference between components, applied to not-before checks.
inline constexpr Timestamp kClockSkew = 30;

// ---------------------------------------------------------------- identity token

struct IdentityToken {
    std::string consumer_id;
    std::string issuer;
    Timestamp issued_at = 0;
    Timestamp expires_at = 0;
    std::string signature;

    [[nodiscard]] nlohmann::json unsigned_json() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static IdentityToken from_json(const nlohmann::json& j);

    /// Bearer form: base64url of the canonical JSON.
    [[nodiscard]] std::string encode() const;
    static IdentityToken decode(std::string_view bearer);
};

IdentityToken sign_identity_token(IdentityToken token, const KeyPair& idp_key);

enum class TokenVerdict { ok, untrusted_issuer, bad_signature, expired, not_yet_valid };
std::string_view to_string(TokenVerdict v);

TokenVerdict verify_identity_token(const IdentityToken& token, std::string_view expected_issuer,
                                   std::span<const std::uint8_t> idp_public_key, Timestamp now);

// ---------------------------------------------------------- capability credential

/// One granted (operation, resource) pair; the consumer is the credential subject.
struct Capability {
    Operation operation;
    ResourceUrl resource;

    friend bool operator==(const Capability&, const Capability&) = default;
};

struct CredentialStatus {
    std::string status_list_url;
    std::size_t status_index = 0;

    friend bool operator==(const CredentialStatus&, const CredentialStatus&) = default;
};

struct CapabilityCredential {
    std::string issuer;
    std::string issuer_key_id;
    Bytes subject_public_key;
    std::vector<Capability> capabilities;
    Timestamp issued_at = 0;
    Timestamp expires_at = 0;
    CredentialStatus credential_status;
    std::string signature;

    [[nodiscard]] nlohmann::json unsigned_json() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static CapabilityCredential from_json(const nlohmann::json& j);

    [[nodiscard]] std::string subject_fingerprint() const { return key_fingerprint(subject_public_key); }

    /// Capabilities as policies for \p consumer_id.
    [[nodiscard]] std::vector<Policy> policies_for(const std::string& consumer_id) const;
};

/// Signs every field but the signature. Throws Error(validation) on broken invariants.
CapabilityCredential sign_credential(CapabilityCredential vc, const KeyPair& pap_key);

/// Issuer identifier -> public key.
using TrustedIssuers = std::map<std::string, Bytes>;

/// A status list whose wrapper signature has already been checked.
struct StatusSnapshot {
    std::string id;
    std::string issuer;
    Timestamp issued_at = 0;
    Bitstring bits;
};

/// Verifies the wrapper against the trusted issuers and decodes it.
std::optional<StatusSnapshot> open_status_list(const StatusListCredential& list, const TrustedIssuers& trusted);

enum class VcVerdict { ok, untrusted_issuer, bad_signature, expired, not_yet_valid, revoked, status_unknown };
std::string_view to_string(VcVerdict v);

/// Checks, first failure wins: issuer trust, signature, validity window,
/// revocation bit. A missing or mismatched list gives status_unknown.
VcVerdict verify_credential(const CapabilityCredential& vc, const TrustedIssuers& trusted, Timestamp now,
                            const StatusSnapshot* list);

// ------------------------------------------------------------------ presentation

struct Presentation {
    std::vector<CapabilityCredential> credentials;
    std::string nonce;
    std::string audience;
    Timestamp created_at = 0;
    std::string signature;

    [[nodiscard]] nlohmann::json unsigned_json() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static Presentation from_json(const nlohmann::json& j);

    /// Compact JSON, as carried in the presentation header.
    [[nodiscard]] std::string encode() const { return canonical_json(to_json()); }
    static Presentation decode(std::string_view text);
};

/// Throws Error(key_mismatch) if \p subject_key does not match every credential's subject.
Presentation create_presentation(std::vector<CapabilityCredential> vcs, std::string nonce, std::string audience,
                                 const KeyPair& subject_key, Timestamp now);

enum class VpVerdictKind { ok, bad_proof, wrong_nonce, wrong_audience, vc_failure };
std::string_view to_string(VpVerdictKind v);

struct VpVerdict {
    VpVerdictKind kind = VpVerdictKind::ok;
    VcVerdict credential = VcVerdict::ok;  // meaningful for vc_failure
    std::size_t credential_index = 0;      // which credential failed

    [[nodiscard]] bool ok() const noexcept { return kind == VpVerdictKind::ok; }
    /// "ok", "bad_proof", ..., or the inner verdict for credential failures.
    [[nodiscard]] std::string reason() const;
};

/// status_list_url -> verified snapshot
using StatusLists = std::map<std::string, StatusSnapshot>;

/// Proof, then nonce, then audience, then each credential. Needs no network.
VpVerdict verify_presentation(const Presentation& vp, std::string_view expected_nonce,
                              std::string_view expected_audience, const TrustedIssuers& trusted, Timestamp now,
                              const StatusLists& lists);

} // namespace dsac
