#pragma once

/*! \file
 * \brief Policy Enforcement Point: a reverse proxy in front of the broker.
 *
 * Request mapping (paths under /ngsi-ld/v1):
 *
 *   GET    /entities?type=T                 Read      [type T]
 *   GET    /entities/{id}                   Read      [object id]
 *   GET    /entities/{id}?attrs=a,b         Read      [attribute id/a, attribute id/b]
 *   PATCH  /entities/{id}/attrs/{a}         Write     [attribute id/a]
 *   POST   /entities                        Write     [type of the posted entity]
 *   DELETE /entities/{id}                   Write     [object id]
 *   POST   /subscriptions                   Subscribe [entity filter, type or object]
 *   DELETE /subscriptions/{id}              Subscribe [filter of the original subscription]
 *
 * Anything else is rejected with 400 and never reaches the broker.
 */

#include "dsac/http_util.hpp"
#include "dsac/policy.hpp"
#include "dsac/wire.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dsac {

struct RequestView {
    std::string method;
    std::string path;  // decoded
    std::multimap<std::string, std::string> params;
    std::string body;
};

struct Classification {
    Operation operation = Operation::Read;
    std::vector<ResourceUrl> targets;
    std::optional<std::string> subscription_id;
};

/// Filter of a subscription created through the proxy, if known.
using SubscriptionLookup = std::function<std::optional<ResourceUrl>(const std::string& subscription_id)>;

/// Throws Error(validation) for anything outside the mapping table.
Classification classify(const RequestView& req, const SubscriptionLookup& lookup = {});

class PepServer : public HttpService {
public:
    struct Config {
        std::string broker_url;
        std::string pdp_url;
        /// URL consumers must bind their presentations to.
        std::string audience;
    };

    explicit PepServer(Config config);
    ~PepServer() override;

private:
    void handle(const httplib::Request& req, httplib::Response& res);
    void challenge(httplib::Response& res);
    std::optional<ResourceUrl> lookup_subscription(const std::string& id);

    Config config_;
};

} // namespace dsac
