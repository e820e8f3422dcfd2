#pragma once

/*! \file
 * \brief Policy Decision Point with its Policy Information Point.
 *
 * Two proof styles are accepted. An identity token (centralized mode) makes
 * the PDP pull the consumer's policies from the PAP on every decision. A
 * presentation (distributed mode) carries capability credentials that are
 * checked locally against cached status lists; no PAP is contacted unless a
 * needed list is missing or stale.
 *
 * State owned here: the nonce store, the status-list cache, the capability
 * cache, and the registry of subscriptions created through the PEP. The
 * background loop refreshes status lists and then sweeps subscriptions whose
 * authorization has lapsed, deleting them at the broker.
 */

#include "dsac/credential.hpp"
#include "dsac/http_util.hpp"
#include "dsac/policy.hpp"
#include "dsac/wire.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace dsac {

// ------------------------------------------------------------------------ seams

/// Centralized-mode policy lookup. nullopt means the PAP could not be reached.
class PolicySource {
public:
    virtual ~PolicySource() = default;
    virtual std::optional<std::vector<Policy>> get_policies(const std::string& consumer_id) = 0;
};

/// Fetches a status list wrapper credential by URL. nullopt on any failure.
class StatusListFetcher {
public:
    virtual ~StatusListFetcher() = default;
    virtual std::optional<nlohmann::json> fetch(const std::string& url) = 0;
};

enum class DeleteOutcome { deleted, not_found, unreachable };

/// The two broker calls the PDP makes on its own behalf.
class BrokerClient {
public:
    virtual ~BrokerClient() = default;
    /// Type URL of an entity, nullopt if unknown or the broker is unreachable.
    virtual std::optional<std::string> entity_type(const std::string& object_url) = 0;
    virtual DeleteOutcome delete_subscription(const std::string& subscription_id) = 0;
};

class HttpPolicySource : public PolicySource {
public:
    HttpPolicySource(std::string pap_url, std::string pdp_secret);
    std::optional<std::vector<Policy>> get_policies(const std::string& consumer_id) override;

private:
    std::string pap_url_;
    std::string secret_;
};

class HttpStatusListFetcher : public StatusListFetcher {
public:
    std::optional<nlohmann::json> fetch(const std::string& url) override;
    [[nodiscard]] std::size_t fetch_count() const noexcept { return fetches_.load(); }

private:
    std::atomic<std::size_t> fetches_{0};
};

class HttpBrokerClient : public BrokerClient {
public:
    explicit HttpBrokerClient(std::string broker_url);
    std::optional<std::string> entity_type(const std::string& object_url) override;
    DeleteOutcome delete_subscription(const std::string& subscription_id) override;

private:
    std::string broker_url_;
};

// ------------------------------------------------------------------- data types

struct AccessRequest {
    /// monostate = no proof at all.
    std::variant<std::monostate, IdentityToken, Presentation> proof;
    Operation operation = Operation::Read;
    std::vector<ResourceUrl> targets;
    std::string method;
    std::string path;
    /// Set for subscription deletion; targets are then resolved from the registry.
    std::optional<std::string> subscription_id;

    [[nodiscard]] nlohmann::json to_json() const;
    static AccessRequest from_json(const nlohmann::json& j);
};

/// Where a credential's revocation bit lives.
struct CredentialRef {
    std::string issuer;
    std::string status_list_url;
    std::size_t status_index = 0;
    Timestamp expires_at = 0;
};

struct CachedCapability {
    std::string fingerprint;
    std::vector<Capability> capabilities;
    std::vector<CredentialRef> sources;
    Timestamp expires_at = 0;
};

enum class ProofMode { centralized, distributed };

struct SubscriptionRecord {
    std::string subscription_id;
    ProofMode mode = ProofMode::distributed;
    /// consumer id (centralized) or subject key fingerprint (distributed)
    std::string consumer;
    std::vector<CredentialRef> credentials;
    ResourceUrl filter = ResourceUrl::type("urn:unset");
    Timestamp created_at = 0;
};

struct Decision {
    bool permit = false;
    std::string reason;       // empty on permit
    std::string decision_id;  // set on permit; lets the PEP register a subscription

    static Decision deny(std::string why) { return {false, std::move(why), {}}; }
    [[nodiscard]] nlohmann::json to_json() const;
};

struct ListFreshness {
    bool fetched = false;   // this cycle's fetch succeeded and verified
    bool fresh = false;     // cached list is within the freshness window
    Timestamp issued_at = 0;
};

class PolicyDecisionPoint {
public:
    using Clock = std::function<Timestamp()>;

    struct Config {
        /// This deployment's PEP URL; presentations must be addressed to it.
        std::string audience;
        TrustedIssuers trusted_paps;
        std::string idp_issuer = "idp";
        Bytes idp_public_key;
        Timestamp nonce_ttl = 120;
        Timestamp pip_ttl = 30;
        Timestamp freshness_window = 300;
        Timestamp decision_ttl = 60;
        std::chrono::milliseconds refresh_period{60'000};
        std::chrono::milliseconds sweep_period{30'000};
    };

    struct Seams {
        std::shared_ptr<PolicySource> policies;  // may be null when only distributed mode is used
        std::shared_ptr<StatusListFetcher> fetcher;
        std::shared_ptr<BrokerClient> broker;
    };

    PolicyDecisionPoint(Config config, Seams seams, Clock clock = {});
    ~PolicyDecisionPoint();
    PolicyDecisionPoint(const PolicyDecisionPoint&) = delete;
    PolicyDecisionPoint& operator=(const PolicyDecisionPoint&) = delete;

    Decision authorize(const AccessRequest& req, Timestamp now);

    /// The PIP. Positive answers are cached for pip_ttl seconds.
    std::optional<std::string> infer_type(const std::string& object_url, Timestamp now);

    std::string issue_nonce(Timestamp now);

    /// Turns a permitted Subscribe decision into a registry entry.
    void register_subscription(const std::string& subscription_id, const std::string& decision_id, Timestamp now);
    /// Throws Error(conflict) on a duplicate broker id.
    void register_subscription(SubscriptionRecord record);
    void unregister_subscription(const std::string& subscription_id);
    [[nodiscard]] std::optional<SubscriptionRecord> subscription(const std::string& subscription_id) const;
    [[nodiscard]] std::vector<SubscriptionRecord> subscriptions() const;

    /// Deletes subscriptions whose authorization lapsed; returns their ids.
    std::vector<std::string> sweep_subscriptions(Timestamp now);

    /// One fetch per distinct status list referenced by cached capabilities or subscriptions.
    std::map<std::string, ListFreshness> refresh_status_lists(Timestamp now);

    /// Accepts a list from any source if it is signed by a trusted PAP and fresh.
    bool accept_status_list(const StatusListCredential& list, Timestamp now);

    [[nodiscard]] std::vector<CachedCapability> cached_capabilities() const;
    [[nodiscard]] nlohmann::json metrics(Timestamp now) const;

    /// Background refresh + sweep loop; periods from Config.
    void start_background();
    void stop_background();

private:
    struct PendingDecision {
        ProofMode mode;
        std::string consumer;
        std::vector<CredentialRef> credentials;
        Operation operation;
        std::vector<ResourceUrl> targets;
        Timestamp expires_at;
    };

    Decision authorize_centralized(const IdentityToken& token, const AccessRequest& req,
                                   const std::vector<ResourceUrl>& targets, Timestamp now);
    Decision authorize_distributed(const Presentation& vp, const AccessRequest& req,
                                   const std::vector<ResourceUrl>& targets, Timestamp now);
    Decision permit(PendingDecision pending, Timestamp now);

    bool nonce_live(const std::string& nonce, Timestamp now) const;
    bool consume_nonce(const std::string& nonce, Timestamp now);

    StatusLists fresh_lists(Timestamp now) const;
    bool fetch_and_store(const std::string& url, Timestamp now);
    bool store_list(const StatusListCredential& list, Timestamp now, const std::string* expected_url);
    bool credential_still_valid(const CredentialRef& ref, Timestamp now) const;

    void background_loop(std::stop_token st);

    Config config_;
    Seams seams_;
    Clock clock_;

    mutable std::mutex nonce_mu_;
    std::map<std::string, Timestamp> nonces_;  // nonce -> expires_at

    mutable std::mutex pip_mu_;
    std::map<std::string, std::pair<std::string, Timestamp>> pip_cache_;  // object -> (type, fetched_at)

    mutable std::shared_mutex lists_mu_;
    StatusLists lists_;

    mutable std::mutex state_mu_;
    std::map<std::string, CachedCapability> capabilities_;
    std::map<std::string, SubscriptionRecord> subscriptions_;
    std::map<std::string, PendingDecision> pending_;

    std::atomic<std::size_t> list_fetches_{0};

    std::mutex bg_mu_;
    std::condition_variable_any bg_cv_;
    std::jthread background_;
};

/// POST /decide, POST /nonces, POST /subscriptions, GET|DELETE /subscriptions/{id},
/// POST /status-lists, GET /metrics
class PdpServer : public HttpService {
public:
    explicit PdpServer(PolicyDecisionPoint& pdp, std::function<Timestamp()> clock = {});
    ~PdpServer() override;

private:
    PolicyDecisionPoint& pdp_;
    std::function<Timestamp()> clock_;
};

} // namespace dsac
