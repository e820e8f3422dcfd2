#pragma once

/*! \file
 * \brief Minimal NGSI-LD-style context broker.
 *
 * Entities are plain JSON objects with "id", "type" and attributes. The
 * broker knows nothing about access control; it is only ever reached through
 * the PEP.
 */

#include "dsac/http_util.hpp"
#include "dsac/policy.hpp"
#include "dsac/status_list.hpp"

#include <json.hpp>

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

namespace dsac {

struct Entity {
    std::string id;
    std::string type;
    nlohmann::json attributes = nlohmann::json::object();

    /// Flat form: {"id": ..., "type": ..., "<attr>": value, ...}
    [[nodiscard]] nlohmann::json to_json() const;
    static Entity from_json(const nlohmann::json& j);
};

struct SubscriptionSpec {
    ResourceUrl entity_filter;  // Type or Object
    std::vector<std::string> watched_attributes;  // empty = all
    std::string notification_endpoint;

    /// NGSI-LD shaped: {"type":"Subscription","entities":[{"type":T}|{"id":I}],
    /// "watchedAttributes":[...],"notification":{"endpoint":{"uri":U}}}
    [[nodiscard]] nlohmann::json to_json() const;
    static SubscriptionSpec from_json(const nlohmann::json& j);
};

struct Subscription {
    std::string id;
    SubscriptionSpec spec;
    bool active = true;

    [[nodiscard]] bool matches(const Entity& e, const std::string& attr) const;
};

/// Delivers notification bodies. Implementations must not throw.
class NotificationSink {
public:
    virtual ~NotificationSink() = default;
    virtual void deliver(const std::string& endpoint, const nlohmann::json& body) = 0;
};

/// POSTs the body to the endpoint; failures are logged to stderr and dropped.
class HttpNotificationSink : public NotificationSink {
public:
    void deliver(const std::string& endpoint, const nlohmann::json& body) override;
};

class Broker {
public:
    using Clock = std::function<Timestamp()>;

    explicit Broker(std::shared_ptr<NotificationSink> sink = std::make_shared<HttpNotificationSink>(),
                    Clock clock = {});
    ~Broker();
    Broker(const Broker&) = delete;
    Broker& operator=(const Broker&) = delete;

    std::string create_entity(Entity e);
    /// \p attrs empty = all attributes.
    [[nodiscard]] Entity get_entity(const std::string& id, const std::set<std::string>& attrs = {}) const;
    [[nodiscard]] std::vector<Entity> query_by_type(const std::string& type) const;
    void update_attribute(const std::string& id, const std::string& attr, nlohmann::json value);
    void delete_entity(const std::string& id);

    std::string create_subscription(SubscriptionSpec spec);
    [[nodiscard]] Subscription get_subscription(const std::string& id) const;
    void delete_subscription(const std::string& id);
    [[nodiscard]] std::size_t subscription_count() const;

    /// Blocks until every queued notification has been handed to the sink.
    void flush_notifications();

    [[nodiscard]] nlohmann::json snapshot() const;
    void restore(const nlohmann::json& snapshot);

private:
    void enqueue(std::string endpoint, nlohmann::json body);
    void dispatch_loop(std::stop_token st);

    std::shared_ptr<NotificationSink> sink_;
    Clock clock_;

    mutable std::shared_mutex mu_;
    std::map<std::string, Entity> entities_;
    std::map<std::string, Subscription> subscriptions_;
    std::uint64_t next_subscription_ = 1;

    std::mutex queue_mu_;
    std::condition_variable_any queue_cv_;
    std::condition_variable idle_cv_;
    std::deque<std::pair<std::string, nlohmann::json>> queue_;
    bool delivering_ = false;
    std::jthread dispatcher_;
};

/// HTTP front end for a Broker under /ngsi-ld/v1.
class BrokerServer : public HttpService {
public:
    explicit BrokerServer(Broker& broker);
    ~BrokerServer() override;

private:
    Broker& broker_;
};

} // namespace dsac
