#pragma once

/*! \file
 * \brief Policy Administration Point.
 *
 * Owners store policies here. In centralized mode the PDP pulls a consumer's
 * policies on every decision; in distributed mode the PAP snapshots them into
 * a capability credential and tracks revocation in a status list.
 *
 * Status lists are numbered. List 0 is published at <base>/status-list and
 * list k > 0 at <base>/status-list/k. A new list is started when the current
 * one fills up or every credential in it has expired; a non-current list is
 * retired once all of its credentials have expired.
 */

#include "dsac/credential.hpp"
#include "dsac/http_util.hpp"
#include "dsac/wire.hpp"

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dsac {

struct PolicyRecord {
    std::string id;
    std::string owner;
    Policy policy;
};

struct IssuanceRecord {
    std::size_t list_number = 0;
    std::size_t status_index = 0;
    std::string consumer_id;
    Timestamp expires_at = 0;
};

/// Who is asking for a consumer's policies.
struct PdpSecret {
    std::string secret;
};
struct OwnerKey {
    std::string key;
};
using PolicyReader = std::variant<PdpSecret, OwnerKey, IdentityToken>;

/// What to revoke: every live credential of a consumer, or one slot.
struct RevokeConsumer {
    std::string consumer_id;
};
struct RevokeSlot {
    std::string status_list_url;
    std::size_t status_index = 0;
};
using RevocationTarget = std::variant<RevokeConsumer, RevokeSlot>;

class PolicyAdministrationPoint {
public:
    using Clock = std::function<Timestamp()>;

    struct Config {
        std::string issuer = "pap";
        /// Public base URL, used to build status list URLs.
        std::string base_url = "http://127.0.0.1";
        /// API key -> owner name.
        std::map<std::string, std::string> owner_keys;
        std::string pdp_secret;
        std::string idp_issuer = "idp";
        Bytes idp_public_key;
        std::size_t status_list_capacity = std::size_t{1} << 17;
        Timestamp credential_lifetime = 24 * 3600;
        /// Persisted after every mutation when non-empty.
        std::string snapshot_path;
    };

    PolicyAdministrationPoint(Config config, KeyPair key, Clock clock = {});

    std::string put_policy(const std::string& owner_key, Policy p);
    void delete_policy(const std::string& owner_key, const std::string& policy_id);

    /// Policies of \p consumer_id. Owners only see their own; consumers only themselves.
    [[nodiscard]] std::vector<Policy> get_policies(const std::string& consumer_id, const PolicyReader& reader) const;
    [[nodiscard]] std::vector<PolicyRecord> list_policies(const std::string& owner_key) const;

    CapabilityCredential issue_capability_vc(const IdentityToken& token, const Bytes& subject_public_key);

    /// Returns how many status bits were newly set. Throws Error(not_found)
    /// when the target matches no live credential.
    std::size_t revoke_vc(const std::string& owner_key, const RevocationTarget& target);

    /// Signed wrapper of list \p list_number with a fresh issued_at.
    [[nodiscard]] StatusListCredential publish_status_list(std::size_t list_number = 0) const;
    [[nodiscard]] std::string status_list_url(std::size_t list_number) const;
    /// Maps a status list URL path ("/status-list", "/status-list/3") to its number.
    [[nodiscard]] std::optional<std::size_t> list_number_for_path(const std::string& path) const;

    [[nodiscard]] const std::string& issuer() const noexcept { return config_.issuer; }
    [[nodiscard]] const Bytes& public_key() const noexcept { return key_.public_key; }
    [[nodiscard]] std::vector<IssuanceRecord> issuances() const;
    [[nodiscard]] std::size_t current_list_number() const;

    [[nodiscard]] nlohmann::json snapshot() const;

private:
    struct ListState {
        Bitstring bits;
        std::size_t next_index = 0;
    };

    std::string authenticate_owner(const std::string& owner_key) const;
    ListState& current_list_locked();
    void retire_lists_locked(Timestamp now);
    void persist_locked() const;
    [[nodiscard]] nlohmann::json snapshot_locked() const;
    void restore_locked(const nlohmann::json& j);

    Config config_;
    KeyPair key_;
    Clock clock_;

    mutable std::mutex mu_;
    std::map<std::string, PolicyRecord> policies_;
    std::uint64_t next_policy_ = 1;
    std::map<std::size_t, ListState> lists_;
    std::size_t current_list_ = 0;
    std::vector<IssuanceRecord> issuances_;
};

/// PUT/DELETE /policies, GET /policies?consumer_id=, POST /credentials,
/// POST /revocations, GET /status-list[/k]
///
/// Owners authenticate with "X-Owner-Key", the PDP with "X-PDP-Secret",
/// consumers with "Authorization: Bearer <identity token>".
class PapServer : public HttpService {
public:
    explicit PapServer(PolicyAdministrationPoint& pap);
    ~PapServer() override;

private:
    PolicyAdministrationPoint& pap_;
};

} // namespace dsac
