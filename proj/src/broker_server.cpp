#include "dsac/broker.hpp"

#include <sstream>

namespace dsac {

namespace {

std::set<std::string> split_attrs(const std::string& csv) {
    std::set<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.insert(item);
    return out;
}

} // namespace

BrokerServer::BrokerServer(Broker& broker) : broker_(broker) {
    server_.Post("/ngsi-ld/v1/entities", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto id = broker_.create_entity(Entity::from_json(parse_json_body(req)));
            res.status = 201;
            res.set_header("Location", "/ngsi-ld/v1/entities/" + url_encode(id));
        });
    });

    server_.Get("/ngsi-ld/v1/entities", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            if (!req.has_param("type")) throw Error(ErrorKind::validation, "entity queries need a type parameter");
            auto body = nlohmann::json::array();
            for (const auto& e : broker_.query_by_type(req.get_param_value("type"))) body.push_back(e.to_json());
            reply_json(res, 200, body);
        });
    });

    server_.Get(R"(/ngsi-ld/v1/entities/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            std::set<std::string> attrs;
            if (req.has_param("attrs")) attrs = split_attrs(req.get_param_value("attrs"));
            reply_json(res, 200, broker_.get_entity(req.matches[1], attrs).to_json());
        });
    });

    server_.Patch(R"(/ngsi-ld/v1/entities/(.+)/attrs/([^/]+))",
                  [this](const httplib::Request& req, httplib::Response& res) {
                      guarded(res, [&] {
                          auto body = parse_json_body(req);
                          if (!body.is_object() || !body.contains("value"))
                              throw Error(ErrorKind::validation, "attribute update body must be {\"value\": ...}");
                          broker_.update_attribute(req.matches[1], req.matches[2], body["value"]);
                          res.status = 204;
                      });
                  });

    server_.Delete(R"(/ngsi-ld/v1/entities/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            broker_.delete_entity(req.matches[1]);
            res.status = 204;
        });
    });

    server_.Post("/ngsi-ld/v1/subscriptions", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto id = broker_.create_subscription(SubscriptionSpec::from_json(parse_json_body(req)));
            res.set_header("Location", "/ngsi-ld/v1/subscriptions/" + id);
            reply_json(res, 201, {{"id", id}});
        });
    });

    server_.Get(R"(/ngsi-ld/v1/subscriptions/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto sub = broker_.get_subscription(req.matches[1]);
            auto j = sub.spec.to_json();
            j["id"] = sub.id;
            reply_json(res, 200, j);
        });
    });

    server_.Delete(R"(/ngsi-ld/v1/subscriptions/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            broker_.delete_subscription(req.matches[1]);
            res.status = 204;
        });
    });
}

BrokerServer::~BrokerServer() { stop(); }

} // namespace dsac
