#include "dsac/clock.hpp"
#include "dsac/pdp.hpp"

namespace dsac {

PdpServer::PdpServer(PolicyDecisionPoint& pdp, std::function<Timestamp()> clock)
    : pdp_(pdp), clock_(clock ? std::move(clock) : std::function<Timestamp()>(system_now)) {
    server_.Post("/decide", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto request = AccessRequest::from_json(parse_json_body(req));
            reply_json(res, 200, pdp_.authorize(request, clock_()).to_json());
        });
    });

    server_.Post("/nonces", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            std::string audience;
            if (!req.body.empty()) audience = parse_json_body(req).value("audience", "");
            reply_json(res, 201, {{"nonce", pdp_.issue_nonce(clock_())}, {"audience", audience}});
        });
    });

    server_.Post("/subscriptions", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto body = parse_json_body(req);
            pdp_.register_subscription(body.at("subscription_id").get<std::string>(),
                                       body.at("decision_id").get<std::string>(), clock_());
            res.status = 201;
        });
    });

    server_.Get(R"(/subscriptions/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto record = pdp_.subscription(req.matches[1]);
            if (!record) throw Error(ErrorKind::not_found, "no such subscription");
            reply_json(res, 200,
                       {{"subscription_id", record->subscription_id},
                        {"mode", record->mode == ProofMode::centralized ? "centralized" : "distributed"},
                        {"filter", resource_to_json(record->filter)},
                        {"created_at", record->created_at}});
        });
    });

    server_.Delete(R"(/subscriptions/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            pdp_.unregister_subscription(req.matches[1]);
            res.status = 204;
        });
    });

    server_.Post("/status-lists", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto list = StatusListCredential::from_json(parse_json_body(req));
            if (!pdp_.accept_status_list(list, clock_()))
                throw Error(ErrorKind::validation, "status list rejected: untrusted, badly signed or stale");
            reply_json(res, 202, {{"accepted", list.id}});
        });
    });

    server_.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
        reply_json(res, 200, pdp_.metrics(clock_()));
    });
}

PdpServer::~PdpServer() { stop(); }

} // namespace dsac
