#include "dsac/broker.hpp"

#include "dsac/clock.hpp"
#include "dsac/crypto.hpp"

#include <iostream>

namespace dsac {

nlohmann::json Entity::to_json() const {
    nlohmann::json j = attributes;
    j["id"] = id;
    j["type"] = type;
    return j;
}

Entity Entity::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorKind::validation, "entity must be a JSON object");
    if (!j.contains("id") || !j["id"].is_string() || !j.contains("type") || !j["type"].is_string())
        throw Error(ErrorKind::validation, "entity needs string id and type");
    Entity e;
    e.id = j["id"].get<std::string>();
    e.type = j["type"].get<std::string>();
    for (const auto& [k, v] : j.items()) {
        if (k == "id" || k == "type" || k == "@context") continue;
        ResourceUrl::validate_attribute_name(k);
        e.attributes[k] = v;
    }
    // Both must be usable as policy resources.
    (void)ResourceUrl::object(e.id);
    (void)ResourceUrl::type(e.type);
    e.id = detail::normalize_url(e.id);
    e.type = detail::normalize_url(e.type);
    return e;
}

nlohmann::json SubscriptionSpec::to_json() const {
    nlohmann::json selector;
    if (entity_filter.kind() == ResourceKind::Type) selector["type"] = entity_filter.value();
    else selector["id"] = entity_filter.value();
    nlohmann::json j = {{"type", "Subscription"},
                        {"entities", nlohmann::json::array({selector})},
                        {"notification", {{"endpoint", {{"uri", notification_endpoint}}}}}};
    if (!watched_attributes.empty()) j["watchedAttributes"] = watched_attributes;
    return j;
}

SubscriptionSpec SubscriptionSpec::from_json(const nlohmann::json& j) {
    try {
        const auto& entities = j.at("entities");
        if (!entities.is_array() || entities.size() != 1)
            throw Error(ErrorKind::validation, "subscription needs exactly one entity selector");
        const auto& sel = entities[0];
        std::optional<ResourceUrl> filter;
        if (sel.contains("id")) filter = ResourceUrl::object(sel.at("id").get<std::string>());
        else if (sel.contains("type")) filter = ResourceUrl::type(sel.at("type").get<std::string>());
        else throw Error(ErrorKind::validation, "entity selector needs id or type");

        std::vector<std::string> watched;
        if (j.contains("watchedAttributes")) {
            watched = j.at("watchedAttributes").get<std::vector<std::string>>();
            for (const auto& a : watched) ResourceUrl::validate_attribute_name(a);
        }
        std::string endpoint = j.at("notification").at("endpoint").at("uri").get<std::string>();
        if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0)
            throw Error(ErrorKind::validation, "notification endpoint must be an http(s) URL");
        if (!detail::is_absolute_url(endpoint) || endpoint.find("://") + 3 >= endpoint.size())
            throw Error(ErrorKind::validation, "notification endpoint is not a valid URL");
        return {*filter, std::move(watched), std::move(endpoint)};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::validation, std::string("malformed subscription: ") + e.what());
    }
}

bool Subscription::matches(const Entity& e, const std::string& attr) const {
    if (!active) return false;
    const auto& f = spec.entity_filter;
    bool entity_ok = f.kind() == ResourceKind::Type ? e.type == f.value() : e.id == f.value();
    if (!entity_ok) return false;
    if (spec.watched_attributes.empty()) return true;
    return std::ranges::find(spec.watched_attributes, attr) != spec.watched_attributes.end();
}

void HttpNotificationSink::deliver(const std::string& endpoint, const nlohmann::json& body) {
    try {
        auto [base, path] = split_url(endpoint);
        auto client = make_client(base, std::chrono::seconds(2));
        auto res = client->Post(path, body.dump(), "application/json");
        if (!res) std::cerr << "notification to " << endpoint << " failed: " << httplib::to_string(res.error()) << '\n';
    } catch (const std::exception& e) {
        std::cerr << "notification to " << endpoint << " failed: " << e.what() << '\n';
    }
}

Broker::Broker(std::shared_ptr<NotificationSink> sink, Clock clock)
    : sink_(std::move(sink)), clock_(clock ? std::move(clock) : Clock(system_now)) {
    dispatcher_ = std::jthread([this](std::stop_token st) { dispatch_loop(st); });
}

Broker::~Broker() {
    dispatcher_.request_stop();
    queue_cv_.notify_all();
}

std::string Broker::create_entity(Entity e) {
    if (e.id.empty() || e.type.empty()) throw Error(ErrorKind::validation, "entity needs id and type");
    e.id = ResourceUrl::object(e.id).value();
    e.type = ResourceUrl::type(e.type).value();
    if (e.attributes.is_null()) e.attributes = nlohmann::json::object();
    if (!e.attributes.is_object()) throw Error(ErrorKind::validation, "attributes must be an object");
    for (const auto& [k, v] : e.attributes.items()) ResourceUrl::validate_attribute_name(k);
    std::unique_lock lock(mu_);
    auto [it, inserted] = entities_.try_emplace(e.id, e);
    if (!inserted) throw Error(ErrorKind::conflict, "entity already exists: " + e.id);
    return it->first;
}

Entity Broker::get_entity(const std::string& id, const std::set<std::string>& attrs) const {
    std::shared_lock lock(mu_);
    auto it = entities_.find(detail::normalize_url(id));
    if (it == entities_.end()) throw Error(ErrorKind::not_found, "no such entity: " + id);
    if (attrs.empty()) return it->second;
    Entity projected{it->second.id, it->second.type, nlohmann::json::object()};
    for (const auto& a : attrs)
        if (it->second.attributes.contains(a)) projected.attributes[a] = it->second.attributes[a];
    return projected;
}

std::vector<Entity> Broker::query_by_type(const std::string& type) const {
    auto wanted = detail::normalize_url(type);
    std::shared_lock lock(mu_);
    std::vector<Entity> out;
    for (const auto& [id, e] : entities_)
        if (e.type == wanted) out.push_back(e);
    return out;
}

void Broker::update_attribute(const std::string& id, const std::string& attr, nlohmann::json value) {
    ResourceUrl::validate_attribute_name(attr);
    std::vector<std::pair<std::string, nlohmann::json>> pending;
    {
        std::unique_lock lock(mu_);
        auto it = entities_.find(detail::normalize_url(id));
        if (it == entities_.end()) throw Error(ErrorKind::not_found, "no such entity: " + id);
        it->second.attributes[attr] = value;
        const Timestamp now = clock_();
        for (const auto& [sid, sub] : subscriptions_) {
            if (!sub.matches(it->second, attr)) continue;
            pending.emplace_back(sub.spec.notification_endpoint,
                                 nlohmann::json{{"subscription_id", sid},
                                                {"entity_id", it->second.id},
                                                {"attr", attr},
                                                {"value", value},
                                                {"timestamp", now}});
        }
    }
    for (auto& [endpoint, body] : pending) enqueue(std::move(endpoint), std::move(body));
}

void Broker::delete_entity(const std::string& id) {
    std::unique_lock lock(mu_);
    if (entities_.erase(detail::normalize_url(id)) == 0) throw Error(ErrorKind::not_found, "no such entity: " + id);
}

std::string Broker::create_subscription(SubscriptionSpec spec) {
    std::unique_lock lock(mu_);
    std::string id = "urn:ngsi-ld:Subscription:" + std::to_string(next_subscription_++) + "-" + random_token(6);
    subscriptions_.emplace(id, Subscription{id, std::move(spec), true});
    return id;
}

Subscription Broker::get_subscription(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = subscriptions_.find(id);
    if (it == subscriptions_.end()) throw Error(ErrorKind::not_found, "no such subscription: " + id);
    return it->second;
}

void Broker::delete_subscription(const std::string& id) {
    std::unique_lock lock(mu_);
    if (subscriptions_.erase(id) == 0) throw Error(ErrorKind::not_found, "no such subscription: " + id);
}

std::size_t Broker::subscription_count() const {
    std::shared_lock lock(mu_);
    return subscriptions_.size();
}

void Broker::enqueue(std::string endpoint, nlohmann::json body) {
    {
        std::lock_guard lock(queue_mu_);
        queue_.emplace_back(std::move(endpoint), std::move(body));
    }
    queue_cv_.notify_one();
}

void Broker::dispatch_loop(std::stop_token st) {
    std::unique_lock lock(queue_mu_);
    while (true) {
        if (!queue_cv_.wait(lock, st, [this] { return !queue_.empty(); })) return;
        auto [endpoint, body] = std::move(queue_.front());
        queue_.pop_front();
        delivering_ = true;
        lock.unlock();
        sink_->deliver(endpoint, body);
        lock.lock();
        delivering_ = false;
        if (queue_.empty()) idle_cv_.notify_all();
    }
}

void Broker::flush_notifications() {
    std::unique_lock lock(queue_mu_);
    idle_cv_.wait(lock, [this] { return queue_.empty() && !delivering_; });
}

nlohmann::json Broker::snapshot() const {
    std::shared_lock lock(mu_);
    auto entities = nlohmann::json::array();
    for (const auto& [id, e] : entities_) entities.push_back(e.to_json());
    auto subs = nlohmann::json::array();
    for (const auto& [id, s] : subscriptions_) {
        auto j = s.spec.to_json();
        j["id"] = id;
        subs.push_back(j);
    }
    return {{"entities", entities}, {"subscriptions", subs}, {"next_subscription", next_subscription_}};
}

void Broker::restore(const nlohmann::json& snapshot) {
    std::map<std::string, Entity> entities;
    std::map<std::string, Subscription> subs;
    for (const auto& e : snapshot.at("entities")) {
        auto entity = Entity::from_json(e);
        entities.emplace(entity.id, entity);
    }
    for (const auto& s : snapshot.at("subscriptions")) {
        auto id = s.at("id").get<std::string>();
        subs.emplace(id, Subscription{id, SubscriptionSpec::from_json(s), true});
    }
    std::unique_lock lock(mu_);
    entities_ = std::move(entities);
    subscriptions_ = std::move(subs);
    next_subscription_ = snapshot.value("next_subscription", std::uint64_t{1});
}

} // namespace dsac
