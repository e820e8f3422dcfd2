#include "dsac/pdp.hpp"

#include "dsac/clock.hpp"

#include <algorithm>
#include <iostream>
#include <set>

namespace dsac {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<CredentialRef> refs_of(const std::vector<CapabilityCredential>& vcs) {
    std::vector<CredentialRef> out;
    for (const auto& vc : vcs)
        out.push_back({vc.issuer, vc.credential_status.status_list_url, vc.credential_status.status_index, vc.expires_at});
    return out;
}

} // namespace

// ------------------------------------------------------------------------ seams

HttpPolicySource::HttpPolicySource(std::string pap_url, std::string pdp_secret)
    : pap_url_(std::move(pap_url)), secret_(std::move(pdp_secret)) {}

std::optional<std::vector<Policy>> HttpPolicySource::get_policies(const std::string& consumer_id) {
    try {
        auto client = make_client(pap_url_);
        auto res = client->Get("/policies?consumer_id=" + url_encode(consumer_id), {{kPdpSecretHeader, secret_}});
        if (!res || res->status != 200) return std::nullopt;
        return policies_from_json(nlohmann::json::parse(res->body));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::optional<nlohmann::json> HttpStatusListFetcher::fetch(const std::string& url) {
    ++fetches_;
    try {
        auto [base, path] = split_url(url);
        auto res = make_client(base)->Get(path);
        if (!res || res->status != 200) return std::nullopt;
        return nlohmann::json::parse(res->body);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

HttpBrokerClient::HttpBrokerClient(std::string broker_url) : broker_url_(std::move(broker_url)) {}

std::optional<std::string> HttpBrokerClient::entity_type(const std::string& object_url) {
    try {
        auto res = make_client(broker_url_, std::chrono::seconds(2))->Get("/ngsi-ld/v1/entities/" + url_encode(object_url));
        if (!res || res->status != 200) return std::nullopt;
        auto j = nlohmann::json::parse(res->body);
        if (!j.contains("type") || !j["type"].is_string()) return std::nullopt;
        return j["type"].get<std::string>();
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

DeleteOutcome HttpBrokerClient::delete_subscription(const std::string& subscription_id) {
    auto res = make_client(broker_url_, std::chrono::seconds(2))->Delete("/ngsi-ld/v1/subscriptions/" + subscription_id);
    if (!res) return DeleteOutcome::unreachable;
    if (res->status == 204 || res->status == 200) return DeleteOutcome::deleted;
    if (res->status == 404) return DeleteOutcome::not_found;
    return DeleteOutcome::unreachable;
}

// ------------------------------------------------------------------- data types

nlohmann::json AccessRequest::to_json() const {
    auto ts = nlohmann::json::array();
    for (const auto& t : targets) ts.push_back(resource_to_json(t));
    nlohmann::json j = {{"operation", to_string(operation)},
                        {"targets", ts},
                        {"request", {{"method", method}, {"path", path}}}};
    if (subscription_id) j["subscription_id"] = *subscription_id;
    if (const auto* token = std::get_if<IdentityToken>(&proof)) j["identity_token"] = token->encode();
    if (const auto* vp = std::get_if<Presentation>(&proof)) j["presentation"] = vp->to_json();
    return j;
}

AccessRequest AccessRequest::from_json(const nlohmann::json& j) {
    AccessRequest r;
    try {
        r.operation = j.at("operation").get<Operation>();
        for (const auto& t : j.at("targets")) r.targets.push_back(resource_from_json(t));
        if (j.contains("request")) {
            r.method = j["request"].value("method", "");
            r.path = j["request"].value("path", "");
        }
        if (j.contains("subscription_id")) r.subscription_id = j["subscription_id"].get<std::string>();
        if (j.contains("identity_token")) r.proof = IdentityToken::decode(j["identity_token"].get<std::string>());
        else if (j.contains("presentation")) r.proof = Presentation::from_json(j["presentation"]);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::validation, std::string("malformed access request: ") + e.what());
    }
    return r;
}

nlohmann::json Decision::to_json() const {
    nlohmann::json j = {{"decision", permit ? "permit" : "deny"}, {"reason", reason}};
    if (permit) j["decision_id"] = decision_id;
    return j;
}

// ------------------------------------------------------------------------- PDP

PolicyDecisionPoint::PolicyDecisionPoint(Config config, Seams seams, Clock clock)
    : config_(std::move(config)), seams_(std::move(seams)), clock_(clock ? std::move(clock) : Clock(system_now)) {
    if (!seams_.fetcher) seams_.fetcher = std::make_shared<HttpStatusListFetcher>();
    if (!seams_.broker) throw Error(ErrorKind::validation, "the PDP needs a broker client");
}

PolicyDecisionPoint::~PolicyDecisionPoint() { stop_background(); }

Decision PolicyDecisionPoint::authorize(const AccessRequest& req, Timestamp now) {
    std::vector<ResourceUrl> targets = req.targets;
    if (req.subscription_id) {
        auto record = subscription(*req.subscription_id);
        if (!record) return Decision::deny("unknown_subscription");
        if (req.operation != Operation::Subscribe) return Decision::deny("operation_mismatch");
        targets = {record->filter};
    }
    if (targets.empty()) return Decision::deny("no_targets");
    return std::visit(overloaded{
                          [](std::monostate) { return Decision::deny("missing_credentials"); },
                          [&](const IdentityToken& t) { return authorize_centralized(t, req, targets, now); },
                          [&](const Presentation& vp) { return authorize_distributed(vp, req, targets, now); },
                      },
                      req.proof);
}

Decision PolicyDecisionPoint::authorize_centralized(const IdentityToken& token, const AccessRequest& req,
                                                    const std::vector<ResourceUrl>& targets, Timestamp now) {
    auto verdict = verify_identity_token(token, config_.idp_issuer, config_.idp_public_key, now);
    if (verdict != TokenVerdict::ok) return Decision::deny("token_" + std::string(to_string(verdict)));
    if (req.subscription_id) {
        auto record = subscription(*req.subscription_id);
        if (!record || record->mode != ProofMode::centralized || record->consumer != token.consumer_id)
            return Decision::deny("not_subscription_owner");
    }
    if (!seams_.policies) return Decision::deny("centralized_mode_disabled");
    auto policies = seams_.policies->get_policies(token.consumer_id);
    if (!policies) return Decision::deny("pap_unreachable");
    auto oracle = [&](const std::string& object) { return infer_type(object, now); };
    if (!decide_all(*policies, token.consumer_id, req.operation, targets, oracle))
        return Decision::deny("not_authorized");
    return permit({ProofMode::centralized, token.consumer_id, {}, req.operation, targets, now + config_.decision_ttl},
                  now);
}

Decision PolicyDecisionPoint::authorize_distributed(const Presentation& vp, const AccessRequest& req,
                                                    const std::vector<ResourceUrl>& targets, Timestamp now) {
    const std::string expected_nonce = nonce_live(vp.nonce, now) ? vp.nonce : std::string{};

    auto lists_for = [&] {
        StatusLists out;
        std::shared_lock lock(lists_mu_);
        for (const auto& vc : vp.credentials) {
            auto it = lists_.find(vc.credential_status.status_list_url);
            if (it != lists_.end() && now - it->second.issued_at <= config_.freshness_window) out.insert(*it);
        }
        return out;
    };

    auto lists = lists_for();
    auto verdict = verify_presentation(vp, expected_nonce, config_.audience, config_.trusted_paps, now, lists);
    if (verdict.kind == VpVerdictKind::vc_failure && verdict.credential == VcVerdict::status_unknown) {
        // First contact, or the cached list went stale: fetch before deciding.
        std::set<std::string> missing;
        for (const auto& vc : vp.credentials)
            if (!lists.contains(vc.credential_status.status_list_url) && config_.trusted_paps.contains(vc.issuer))
                missing.insert(vc.credential_status.status_list_url);
        for (const auto& url : missing) fetch_and_store(url, now);
        lists = lists_for();
        verdict = verify_presentation(vp, expected_nonce, config_.audience, config_.trusted_paps, now, lists);
    }
    if (verdict.kind != VpVerdictKind::bad_proof && verdict.kind != VpVerdictKind::wrong_nonce &&
        !consume_nonce(vp.nonce, now))
        return Decision::deny("wrong_nonce");
    if (!verdict.ok()) return Decision::deny(verdict.reason());

    const std::string fingerprint = vp.credentials.front().subject_fingerprint();
    CachedCapability cached{fingerprint, {}, refs_of(vp.credentials), vp.credentials.front().expires_at};
    std::vector<Policy> policies;
    for (const auto& vc : vp.credentials) {
        cached.capabilities.insert(cached.capabilities.end(), vc.capabilities.begin(), vc.capabilities.end());
        cached.expires_at = std::min(cached.expires_at, vc.expires_at);
        auto ps = vc.policies_for(fingerprint);
        policies.insert(policies.end(), ps.begin(), ps.end());
    }
    {
        std::lock_guard lock(state_mu_);
        capabilities_[fingerprint] = cached;
    }

    if (req.subscription_id) {
        auto record = subscription(*req.subscription_id);
        if (!record || record->mode != ProofMode::distributed || record->consumer != fingerprint)
            return Decision::deny("not_subscription_owner");
    }
    auto oracle = [&](const std::string& object) { return infer_type(object, now); };
    if (!decide_all(policies, fingerprint, req.operation, targets, oracle)) return Decision::deny("not_authorized");
    return permit({ProofMode::distributed, fingerprint, cached.sources, req.operation, targets,
                   now + config_.decision_ttl},
                  now);
}

Decision PolicyDecisionPoint::permit(PendingDecision pending, Timestamp now) {
    std::string id = random_token(12);
    std::lock_guard lock(state_mu_);
    std::erase_if(pending_, [&](const auto& kv) { return kv.second.expires_at <= now; });
    pending_.emplace(id, std::move(pending));
    return {true, {}, id};
}

std::optional<std::string> PolicyDecisionPoint::infer_type(const std::string& object_url, Timestamp now) {
    {
        std::lock_guard lock(pip_mu_);
        auto it = pip_cache_.find(object_url);
        if (it != pip_cache_.end() && now - it->second.second < config_.pip_ttl) return it->second.first;
    }
    auto type = seams_.broker->entity_type(object_url);
    if (type) {
        std::lock_guard lock(pip_mu_);
        pip_cache_[object_url] = {*type, now};
    }
    return type;
}

std::string PolicyDecisionPoint::issue_nonce(Timestamp now) {
    std::string nonce = random_token(16);
    std::lock_guard lock(nonce_mu_);
    std::erase_if(nonces_, [&](const auto& kv) { return kv.second <= now; });
    nonces_.emplace(nonce, now + config_.nonce_ttl);
    return nonce;
}

bool PolicyDecisionPoint::nonce_live(const std::string& nonce, Timestamp now) const {
    std::lock_guard lock(nonce_mu_);
    auto it = nonces_.find(nonce);
    return it != nonces_.end() && now < it->second;
}

bool PolicyDecisionPoint::consume_nonce(const std::string& nonce, Timestamp now) {
    std::lock_guard lock(nonce_mu_);
    auto it = nonces_.find(nonce);
    if (it == nonces_.end() || now >= it->second) return false;
    nonces_.erase(it);
    return true;
}

void PolicyDecisionPoint::register_subscription(const std::string& subscription_id, const std::string& decision_id,
                                                Timestamp now) {
    SubscriptionRecord record;
    {
        std::lock_guard lock(state_mu_);
        auto it = pending_.find(decision_id);
        if (it == pending_.end() || it->second.expires_at <= now)
            throw Error(ErrorKind::not_found, "no pending decision " + decision_id);
        const auto& p = it->second;
        if (p.operation != Operation::Subscribe || p.targets.size() != 1)
            throw Error(ErrorKind::validation, "decision was not for a single-filter subscription");
        record = {subscription_id, p.mode, p.consumer, p.credentials, p.targets.front(), now};
        pending_.erase(it);
    }
    register_subscription(std::move(record));
}

void PolicyDecisionPoint::register_subscription(SubscriptionRecord record) {
    std::lock_guard lock(state_mu_);
    auto id = record.subscription_id;
    if (!subscriptions_.try_emplace(id, std::move(record)).second)
        throw Error(ErrorKind::conflict, "subscription already registered: " + id);
}

void PolicyDecisionPoint::unregister_subscription(const std::string& subscription_id) {
    std::lock_guard lock(state_mu_);
    subscriptions_.erase(subscription_id);
}

std::optional<SubscriptionRecord> PolicyDecisionPoint::subscription(const std::string& subscription_id) const {
    std::lock_guard lock(state_mu_);
    auto it = subscriptions_.find(subscription_id);
    if (it == subscriptions_.end()) return std::nullopt;
    return it->second;
}

std::vector<SubscriptionRecord> PolicyDecisionPoint::subscriptions() const {
    std::lock_guard lock(state_mu_);
    std::vector<SubscriptionRecord> out;
    for (const auto& [id, r] : subscriptions_) out.push_back(r);
    return out;
}

bool PolicyDecisionPoint::credential_still_valid(const CredentialRef& ref, Timestamp now) const {
    if (now >= ref.expires_at) return false;
    std::shared_lock lock(lists_mu_);
    auto it = lists_.find(ref.status_list_url);
    if (it == lists_.end() || now - it->second.issued_at > config_.freshness_window) return false;
    if (it->second.issuer != ref.issuer || ref.status_index >= it->second.bits.size()) return false;
    return !it->second.bits.test(ref.status_index);
}

std::vector<std::string> PolicyDecisionPoint::sweep_subscriptions(Timestamp now) {
    {
        // Revoked or expired credentials take every capability they conveyed with them.
        std::vector<std::string> drop;
        std::vector<CachedCapability> snapshot = cached_capabilities();
        for (const auto& c : snapshot)
            if (std::ranges::any_of(c.sources, [&](const CredentialRef& r) { return !credential_still_valid(r, now); }))
                drop.push_back(c.fingerprint);
        std::lock_guard lock(state_mu_);
        for (const auto& f : drop) capabilities_.erase(f);
    }

    std::vector<std::string> removed;
    for (const auto& record : subscriptions()) {
        bool authorized = false;
        if (record.mode == ProofMode::distributed) {
            authorized = !record.credentials.empty() &&
                         std::ranges::all_of(record.credentials,
                                             [&](const CredentialRef& r) { return credential_still_valid(r, now); });
        } else {
            if (!seams_.policies) continue;
            auto policies = seams_.policies->get_policies(record.consumer);
            if (!policies) continue;  // PAP unreachable: try again next sweep
            auto oracle = [&](const std::string& object) { return infer_type(object, now); };
            authorized = decide(*policies, record.consumer, Operation::Subscribe, record.filter, oracle);
        }
        if (authorized) continue;
        auto outcome = seams_.broker->delete_subscription(record.subscription_id);
        if (outcome == DeleteOutcome::unreachable) continue;
        unregister_subscription(record.subscription_id);
        removed.push_back(record.subscription_id);
    }
    return removed;
}

bool PolicyDecisionPoint::store_list(const StatusListCredential& list, Timestamp now, const std::string* expected_url) {
    if (expected_url && detail::normalize_url(list.id) != detail::normalize_url(*expected_url)) return false;
    if (now - list.issued_at > config_.freshness_window || list.issued_at > now + kClockSkew) return false;
    auto snapshot = open_status_list(list, config_.trusted_paps);
    if (!snapshot) return false;
    std::unique_lock lock(lists_mu_);
    auto it = lists_.find(snapshot->id);
    if (it != lists_.end() && it->second.issued_at > snapshot->issued_at) return true;  // keep the newer one
    lists_[snapshot->id] = std::move(*snapshot);
    return true;
}

bool PolicyDecisionPoint::fetch_and_store(const std::string& url, Timestamp now) {
    ++list_fetches_;
    auto j = seams_.fetcher->fetch(url);
    if (!j) return false;
    try {
        return store_list(StatusListCredential::from_json(*j), now, &url);
    } catch (const Error&) {
        return false;
    }
}

bool PolicyDecisionPoint::accept_status_list(const StatusListCredential& list, Timestamp now) {
    return store_list(list, now, nullptr);
}

std::map<std::string, ListFreshness> PolicyDecisionPoint::refresh_status_lists(Timestamp now) {
    std::set<std::string> urls;
    {
        std::lock_guard lock(state_mu_);
        std::erase_if(capabilities_, [&](const auto& kv) { return kv.second.expires_at <= now; });
        for (const auto& [f, c] : capabilities_)
            for (const auto& r : c.sources) urls.insert(r.status_list_url);
        for (const auto& [id, s] : subscriptions_)
            for (const auto& r : s.credentials) urls.insert(r.status_list_url);
    }
    std::map<std::string, ListFreshness> report;
    for (const auto& url : urls) {
        ListFreshness f;
        f.fetched = fetch_and_store(url, now);
        std::shared_lock lock(lists_mu_);
        if (auto it = lists_.find(url); it != lists_.end()) {
            f.issued_at = it->second.issued_at;
            f.fresh = now - it->second.issued_at <= config_.freshness_window;
        }
        report.emplace(url, f);
    }
    return report;
}

std::vector<CachedCapability> PolicyDecisionPoint::cached_capabilities() const {
    std::lock_guard lock(state_mu_);
    std::vector<CachedCapability> out;
    for (const auto& [f, c] : capabilities_) out.push_back(c);
    return out;
}

nlohmann::json PolicyDecisionPoint::metrics(Timestamp now) const {
    nlohmann::json lists = nlohmann::json::object();
    {
        std::shared_lock lock(lists_mu_);
        for (const auto& [url, s] : lists_)
            lists[url] = {{"issuer", s.issuer}, {"issued_at", s.issued_at}, {"age_s", now - s.issued_at}};
    }
    std::lock_guard lock(state_mu_);
    return {{"status_list_fetches", list_fetches_.load()},
            {"status_lists", lists},
            {"subscriptions", subscriptions_.size()},
            {"cached_capabilities", capabilities_.size()},
            // Revocation becomes visible at most one refresh period after the PAP flips the bit.
            {"revocation_visibility_bound_ms", config_.refresh_period.count()}};
}

void PolicyDecisionPoint::start_background() {
    if (background_.joinable()) return;
    background_ = std::jthread([this](std::stop_token st) { background_loop(st); });
}

void PolicyDecisionPoint::stop_background() {
    if (!background_.joinable()) return;
    background_.request_stop();
    bg_cv_.notify_all();
    background_.join();
}

void PolicyDecisionPoint::background_loop(std::stop_token st) {
    using steady = std::chrono::steady_clock;
    auto next_refresh = steady::now() + config_.refresh_period;
    auto next_sweep = steady::now() + config_.sweep_period;
    std::unique_lock lock(bg_mu_);
    while (!st.stop_requested()) {
        bg_cv_.wait_until(lock, st, std::min(next_refresh, next_sweep), [] { return false; });
        if (st.stop_requested()) break;
        lock.unlock();
        auto t = steady::now();
        try {
            if (t >= next_refresh) {
                refresh_status_lists(clock_());
                sweep_subscriptions(clock_());
                next_refresh = t + config_.refresh_period;
                next_sweep = t + config_.sweep_period;
            } else if (t >= next_sweep) {
                sweep_subscriptions(clock_());
                next_sweep = t + config_.sweep_period;
            }
        } catch (const std::exception& e) {
            std::cerr << "pdp background task failed: " << e.what() << '\n';
        }
        lock.lock();
    }
}

} // namespace dsac
