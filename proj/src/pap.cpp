#include "dsac/pap.hpp"

#include "dsac/clock.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace dsac {

PolicyAdministrationPoint::PolicyAdministrationPoint(Config config, KeyPair key, Clock clock)
    : config_(std::move(config)), key_(std::move(key)), clock_(clock ? std::move(clock) : Clock(system_now)) {
    if (config_.status_list_capacity == 0) throw Error(ErrorKind::validation, "status list capacity must be positive");
    while (!config_.base_url.empty() && config_.base_url.back() == '/') config_.base_url.pop_back();
    std::lock_guard lock(mu_);
    if (!config_.snapshot_path.empty() && std::filesystem::exists(config_.snapshot_path)) {
        std::ifstream in(config_.snapshot_path);
        restore_locked(nlohmann::json::parse(in));
    }
    if (lists_.empty()) lists_.emplace(0, ListState{Bitstring(config_.status_list_capacity), 0});
}

std::string PolicyAdministrationPoint::authenticate_owner(const std::string& owner_key) const {
    for (const auto& [key, owner] : config_.owner_keys)
        if (constant_time_equal(key, owner_key)) return owner;
    throw Error(ErrorKind::auth, "unknown owner key");
}

std::string PolicyAdministrationPoint::put_policy(const std::string& owner_key, Policy p) {
    auto owner = authenticate_owner(owner_key);
    if (p.consumer_id.empty()) throw Error(ErrorKind::validation, "policy consumer_id is empty");
    std::lock_guard lock(mu_);
    std::string id = "policy-" + std::to_string(next_policy_++);
    policies_.emplace(id, PolicyRecord{id, owner, std::move(p)});
    persist_locked();
    return id;
}

void PolicyAdministrationPoint::delete_policy(const std::string& owner_key, const std::string& policy_id) {
    auto owner = authenticate_owner(owner_key);
    std::lock_guard lock(mu_);
    auto it = policies_.find(policy_id);
    if (it == policies_.end() || it->second.owner != owner) throw Error(ErrorKind::not_found, "no such policy: " + policy_id);
    policies_.erase(it);
    persist_locked();
}

std::vector<Policy> PolicyAdministrationPoint::get_policies(const std::string& consumer_id,
                                                            const PolicyReader& reader) const {
    std::optional<std::string> owner_filter;
    if (const auto* pdp = std::get_if<PdpSecret>(&reader)) {
        if (config_.pdp_secret.empty() || !constant_time_equal(pdp->secret, config_.pdp_secret))
            throw Error(ErrorKind::auth, "bad PDP secret");
    } else if (const auto* owner = std::get_if<OwnerKey>(&reader)) {
        owner_filter = authenticate_owner(owner->key);
    } else {
        const auto& token = std::get<IdentityToken>(reader);
        if (verify_identity_token(token, config_.idp_issuer, config_.idp_public_key, clock_()) != TokenVerdict::ok ||
            token.consumer_id != consumer_id)
            throw Error(ErrorKind::auth, "identity token does not authorize this query");
    }
    std::lock_guard lock(mu_);
    std::vector<Policy> out;
    for (const auto& [id, rec] : policies_)
        if (rec.policy.consumer_id == consumer_id && (!owner_filter || rec.owner == *owner_filter))
            out.push_back(rec.policy);
    return out;
}

std::vector<PolicyRecord> PolicyAdministrationPoint::list_policies(const std::string& owner_key) const {
    auto owner = authenticate_owner(owner_key);
    std::lock_guard lock(mu_);
    std::vector<PolicyRecord> out;
    for (const auto& [id, rec] : policies_)
        if (rec.owner == owner) out.push_back(rec);
    return out;
}

PolicyAdministrationPoint::ListState& PolicyAdministrationPoint::current_list_locked() {
    const Timestamp now = clock_();
    auto& current = lists_.at(current_list_);
    bool full = current.next_index >= current.bits.size();
    bool all_expired = current.next_index > 0 && std::ranges::none_of(issuances_, [&](const IssuanceRecord& r) {
        return r.list_number == current_list_ && r.expires_at > now;
    });
    if (full || all_expired) {
        current_list_ = lists_.rbegin()->first + 1;
        lists_.emplace(current_list_, ListState{Bitstring(config_.status_list_capacity), 0});
    }
    return lists_.at(current_list_);
}

void PolicyAdministrationPoint::retire_lists_locked(Timestamp now) {
    for (auto it = lists_.begin(); it != lists_.end();) {
        std::size_t n = it->first;
        bool live = std::ranges::any_of(issuances_, [&](const IssuanceRecord& r) {
            return r.list_number == n && r.expires_at > now;
        });
        if (n != current_list_ && !live) {
            std::erase_if(issuances_, [&](const IssuanceRecord& r) { return r.list_number == n; });
            it = lists_.erase(it);
        } else {
            ++it;
        }
    }
}

CapabilityCredential PolicyAdministrationPoint::issue_capability_vc(const IdentityToken& token,
                                                                    const Bytes& subject_public_key) {
    const Timestamp now = clock_();
    auto verdict = verify_identity_token(token, config_.idp_issuer, config_.idp_public_key, now);
    if (verdict != TokenVerdict::ok)
        throw Error(ErrorKind::auth, "invalid identity token: " + std::string(to_string(verdict)));
    if (subject_public_key.size() != 32) throw Error(ErrorKind::validation, "subject key must be an Ed25519 key");

    std::lock_guard lock(mu_);
    CapabilityCredential vc;
    vc.issuer = config_.issuer;
    vc.subject_public_key = subject_public_key;
    for (const auto& [id, rec] : policies_)
        if (rec.policy.consumer_id == token.consumer_id)
            vc.capabilities.push_back({rec.policy.operation, rec.policy.resource});
    if (vc.capabilities.empty()) throw Error(ErrorKind::not_found, "no policies for " + token.consumer_id);

    retire_lists_locked(now);
    auto& list = current_list_locked();
    if (list.next_index >= list.bits.size()) throw Error(ErrorKind::list_full, "status list is full");
    const std::size_t index = list.next_index++;
    vc.issued_at = now;
    vc.expires_at = now + config_.credential_lifetime;
    vc.credential_status = {status_list_url(current_list_), index};
    issuances_.push_back({current_list_, index, token.consumer_id, vc.expires_at});
    persist_locked();
    return sign_credential(std::move(vc), key_);
}

std::size_t PolicyAdministrationPoint::revoke_vc(const std::string& owner_key, const RevocationTarget& target) {
    (void)authenticate_owner(owner_key);
    const Timestamp now = clock_();
    std::lock_guard lock(mu_);
    std::vector<std::pair<std::size_t, std::size_t>> slots;
    if (const auto* c = std::get_if<RevokeConsumer>(&target)) {
        for (const auto& r : issuances_)
            if (r.consumer_id == c->consumer_id && r.expires_at > now) slots.emplace_back(r.list_number, r.status_index);
    } else {
        const auto& s = std::get<RevokeSlot>(target);
        auto [base, path] = split_url(s.status_list_url);
        auto number = list_number_for_path(path);
        if (number && status_list_url(*number) == detail::normalize_url(s.status_list_url)) {
            for (const auto& r : issuances_)
                if (r.list_number == *number && r.status_index == s.status_index && r.expires_at > now)
                    slots.emplace_back(r.list_number, r.status_index);
        }
    }
    if (slots.empty()) throw Error(ErrorKind::not_found, "no live credential matches the revocation target");
    std::size_t newly = 0;
    for (auto [n, idx] : slots) {
        auto& bits = lists_.at(n).bits;
        if (!bits.test(idx)) {
            bits.set(idx);
            ++newly;
        }
    }
    persist_locked();
    return newly;
}

std::string PolicyAdministrationPoint::status_list_url(std::size_t list_number) const {
    if (list_number == 0) return config_.base_url + "/status-list";
    return config_.base_url + "/status-list/" + std::to_string(list_number);
}

std::optional<std::size_t> PolicyAdministrationPoint::list_number_for_path(const std::string& path) const {
    constexpr std::string_view root = "/status-list";
    std::string_view p = path;
    if (p == root) return 0;
    if (p.substr(0, root.size() + 1) != "/status-list/") return std::nullopt;
    auto digits = p.substr(root.size() + 1);
    if (digits.empty() || digits.size() > 18 || !std::ranges::all_of(digits, [](char c) { return c >= '0' && c <= '9'; }))
        return std::nullopt;
    std::size_t n = std::stoull(std::string(digits));
    if (n == 0) return std::nullopt;  // list 0 lives at the bare path only
    return n;
}

StatusListCredential PolicyAdministrationPoint::publish_status_list(std::size_t list_number) const {
    Bitstring bits;
    {
        std::lock_guard lock(mu_);
        auto it = lists_.find(list_number);
        if (it == lists_.end()) throw Error(ErrorKind::not_found, "no such status list");
        bits = it->second.bits;
    }
    return sign_status_list(status_list_url(list_number), bits, config_.issuer, clock_(), key_);
}

std::vector<IssuanceRecord> PolicyAdministrationPoint::issuances() const {
    std::lock_guard lock(mu_);
    return issuances_;
}

std::size_t PolicyAdministrationPoint::current_list_number() const {
    std::lock_guard lock(mu_);
    return current_list_;
}

nlohmann::json PolicyAdministrationPoint::snapshot() const {
    std::lock_guard lock(mu_);
    return snapshot_locked();
}

nlohmann::json PolicyAdministrationPoint::snapshot_locked() const {
    auto policies = nlohmann::json::array();
    for (const auto& [id, rec] : policies_)
        policies.push_back({{"id", id}, {"owner", rec.owner}, {"policy", policy_to_json(rec.policy)}});
    auto lists = nlohmann::json::array();
    for (const auto& [n, l] : lists_)
        lists.push_back({{"number", n},
                         {"bit_count", l.bits.size()},
                         {"next_index", l.next_index},
                         {"encoded_list", base64url_encode(compress_list(l.bits))}});
    auto issued = nlohmann::json::array();
    for (const auto& r : issuances_)
        issued.push_back({{"list", r.list_number},
                          {"index", r.status_index},
                          {"consumer_id", r.consumer_id},
                          {"expires_at", r.expires_at}});
    return {{"policies", policies},
            {"next_policy", next_policy_},
            {"lists", lists},
            {"current_list", current_list_},
            {"issuances", issued}};
}

void PolicyAdministrationPoint::restore_locked(const nlohmann::json& j) {
    for (const auto& p : j.at("policies")) {
        auto id = p.at("id").get<std::string>();
        policies_.emplace(id, PolicyRecord{id, p.at("owner").get<std::string>(), policy_from_json(p.at("policy"))});
    }
    next_policy_ = j.at("next_policy").get<std::uint64_t>();
    for (const auto& l : j.at("lists")) {
        auto bit_count = l.at("bit_count").get<std::size_t>();
        lists_.emplace(l.at("number").get<std::size_t>(),
                       ListState{decompress_list(base64url_decode(l.at("encoded_list").get<std::string>()), bit_count),
                                 l.at("next_index").get<std::size_t>()});
    }
    current_list_ = j.at("current_list").get<std::size_t>();
    for (const auto& r : j.at("issuances"))
        issuances_.push_back({r.at("list").get<std::size_t>(), r.at("index").get<std::size_t>(),
                              r.at("consumer_id").get<std::string>(), r.at("expires_at").get<Timestamp>()});
}

void PolicyAdministrationPoint::persist_locked() const {
    if (config_.snapshot_path.empty()) return;
    auto tmp = config_.snapshot_path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << snapshot_locked().dump(2);
        if (!out) throw Error(ErrorKind::unavailable, "cannot write PAP snapshot " + tmp);
    }
    std::filesystem::rename(tmp, config_.snapshot_path);
}

// ------------------------------------------------------------------------ server

PapServer::PapServer(PolicyAdministrationPoint& pap) : pap_(pap) {
    server_.Put("/policies", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto id = pap_.put_policy(req.get_header_value(kOwnerKeyHeader), policy_from_json(parse_json_body(req)));
            reply_json(res, 201, {{"id", id}});
        });
    });

    server_.Delete(R"(/policies/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            pap_.delete_policy(req.get_header_value(kOwnerKeyHeader), req.matches[1]);
            res.status = 204;
        });
    });

    server_.Get("/policies", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto consumer = req.get_param_value("consumer_id");
            if (req.has_header(kPdpSecretHeader)) {
                reply_json(res, 200, policies_to_json(pap_.get_policies(consumer, PdpSecret{req.get_header_value(kPdpSecretHeader)})));
            } else if (req.has_header(kOwnerKeyHeader)) {
                auto body = nlohmann::json::array();
                for (const auto& rec : pap_.list_policies(req.get_header_value(kOwnerKeyHeader))) {
                    if (!consumer.empty() && rec.policy.consumer_id != consumer) continue;
                    auto j = policy_to_json(rec.policy);
                    j["id"] = rec.id;
                    body.push_back(j);
                }
                reply_json(res, 200, body);
            } else {
                auto token = bearer_token(req);
                if (token.empty()) throw Error(ErrorKind::auth, "missing credentials");
                reply_json(res, 200, policies_to_json(pap_.get_policies(consumer, IdentityToken::decode(token))));
            }
        });
    });

    server_.Post("/credentials", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto token = bearer_token(req);
            if (token.empty()) throw Error(ErrorKind::auth, "missing identity token");
            auto body = parse_json_body(req);
            auto vc = pap_.issue_capability_vc(IdentityToken::decode(token),
                                               base64url_decode(body.at("public_key").get<std::string>()));
            reply_json(res, 201, vc.to_json());
        });
    });

    server_.Post("/revocations", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto body = parse_json_body(req);
            RevocationTarget target;
            if (body.contains("consumer_id")) target = RevokeConsumer{body["consumer_id"].get<std::string>()};
            else target = RevokeSlot{body.at("status_list_url").get<std::string>(), body.at("status_index").get<std::size_t>()};
            auto n = pap_.revoke_vc(req.get_header_value(kOwnerKeyHeader), target);
            reply_json(res, 200, {{"revoked", n}});
        });
    });

    server_.Get(R"(/status-list(/[0-9]+)?)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto number = pap_.list_number_for_path(req.path);
            if (!number) throw Error(ErrorKind::not_found, "no such status list");
            reply_json(res, 200, pap_.publish_status_list(*number).to_json());
        });
    });
}

PapServer::~PapServer() { stop(); }

} // namespace dsac
