#include "dsac/pep.hpp"

#include <algorithm>
#include <array>
#include <iostream>
#include <regex>
#include <sstream>

namespace dsac {

namespace {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

// Headers that belong to one connection, or that this proxy owns.
bool strip_header(std::string_view name) {
    static constexpr std::array<std::string_view, 16> names = {
        "Connection",   "Keep-Alive",  "Proxy-Authenticate", "Proxy-Authorization", "TE",
        "Trailer",      "Transfer-Encoding", "Upgrade",      "Content-Length",      "Host",
        "Authorization", kPresentationHeader, "REMOTE_ADDR", "REMOTE_PORT",         "LOCAL_ADDR",
        "LOCAL_PORT"};
    return std::ranges::any_of(names, [&](std::string_view n) { return iequals(n, name); });
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

nlohmann::json body_json(const std::string& body) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorKind::validation, "request body is not a JSON object");
    return j;
}

} // namespace

Classification classify(const RequestView& req, const SubscriptionLookup& lookup) {
    const std::string prefix = kNgsiPrefix;
    if (req.path.rfind(prefix + "/", 0) != 0) throw Error(ErrorKind::validation, "not an NGSI-LD path: " + req.path);
    const std::string rest = req.path.substr(prefix.size());

    static const std::regex entity_re(R"(^/entities/(.+)$)");
    static const std::regex attr_re(R"(^/entities/(.+)/attrs/([^/]+)$)");
    static const std::regex sub_re(R"(^/subscriptions/(.+)$)");
    std::smatch m;

    auto param = [&](const std::string& key) -> std::optional<std::string> {
        auto it = req.params.find(key);
        if (it == req.params.end()) return std::nullopt;
        return it->second;
    };

    if (req.method == "GET") {
        if (rest == "/entities") {
            auto type = param("type");
            if (!type || type->empty()) throw Error(ErrorKind::validation, "entity listing requires a type");
            return {Operation::Read, {ResourceUrl::type(*type)}, {}};
        }
        if (std::regex_match(rest, m, entity_re)) {
            const std::string id = m[1];
            auto attrs = param("attrs");
            if (!attrs) return {Operation::Read, {ResourceUrl::object(id)}, {}};
            std::vector<ResourceUrl> targets;
            for (const auto& a : split_csv(*attrs)) targets.push_back(ResourceUrl::attribute(id, a));
            if (targets.empty()) throw Error(ErrorKind::validation, "empty attrs filter");
            return {Operation::Read, std::move(targets), {}};
        }
    } else if (req.method == "PATCH") {
        if (std::regex_match(rest, m, attr_re)) return {Operation::Write, {ResourceUrl::attribute(m[1].str(), m[2].str())}, {}};
    } else if (req.method == "POST") {
        if (rest == "/entities") {
            auto j = body_json(req.body);
            if (!j.contains("type") || !j["type"].is_string()) throw Error(ErrorKind::validation, "entity has no type");
            return {Operation::Write, {ResourceUrl::type(j["type"].get<std::string>())}, {}};
        }
        if (rest == "/subscriptions") {
            auto j = body_json(req.body);
            const auto& entities = j.value("entities", nlohmann::json::array());
            if (!entities.is_array() || entities.size() != 1 || !entities[0].is_object())
                throw Error(ErrorKind::validation, "subscription needs exactly one entity selector");
            const auto& sel = entities[0];
            if (sel.contains("id") && sel["id"].is_string())
                return {Operation::Subscribe, {ResourceUrl::object(sel["id"].get<std::string>())}, {}};
            if (sel.contains("type") && sel["type"].is_string())
                return {Operation::Subscribe, {ResourceUrl::type(sel["type"].get<std::string>())}, {}};
            throw Error(ErrorKind::validation, "entity selector needs id or type");
        }
    } else if (req.method == "DELETE") {
        if (std::regex_match(rest, m, sub_re)) {
            const std::string id = m[1];
            auto filter = lookup ? lookup(id) : std::nullopt;
            if (!filter) throw Error(ErrorKind::validation, "subscription was not created through this proxy: " + id);
            return {Operation::Subscribe, {*filter}, id};
        }
        if (std::regex_match(rest, m, entity_re)) return {Operation::Write, {ResourceUrl::object(m[1].str())}, {}};
    }
    throw Error(ErrorKind::validation, "unsupported request: " + req.method + " " + req.path);
}

PepServer::PepServer(Config config) : config_(std::move(config)) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); };
    server_.Get(".*", handler);
    server_.Post(".*", handler);
    server_.Patch(".*", handler);
    server_.Put(".*", handler);
    server_.Delete(".*", handler);
}

PepServer::~PepServer() { stop(); }

std::optional<ResourceUrl> PepServer::lookup_subscription(const std::string& id) {
    auto res = make_client(config_.pdp_url)->Get("/subscriptions/" + url_encode(id));
    if (!res || res->status != 200) return std::nullopt;
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("filter")) return std::nullopt;
    return resource_from_json(j["filter"]);
}

void PepServer::challenge(httplib::Response& res) {
    auto pdp = make_client(config_.pdp_url);
    auto r = pdp->Post("/nonces", nlohmann::json{{"audience", config_.audience}}.dump(), "application/json");
    if (!r || r->status != 201) {
        reply_error(res, 503, "pdp_unavailable", "cannot obtain a nonce");
        return;
    }
    auto j = nlohmann::json::parse(r->body);
    reply_json(res, 401, {{"nonce", j.at("nonce")}, {"audience", config_.audience}});
}

void PepServer::handle(const httplib::Request& req, httplib::Response& res) {
    Classification c;
    try {
        c = classify({req.method, req.path, {req.params.begin(), req.params.end()}, req.body},
                     [this](const std::string& id) { return lookup_subscription(id); });
    } catch (const Error& e) {
        reply_error(res, 400, "unclassifiable", e.what());
        return;
    }

    const std::string token = bearer_token(req);
    const std::string vp = req.get_header_value(kPresentationHeader);
    if (token.empty() && vp.empty()) {
        challenge(res);
        return;
    }

    nlohmann::json decide_req = {{"operation", to_string(c.operation)},
                                 {"targets", nlohmann::json::array()},
                                 {"request", {{"method", req.method}, {"path", req.target}}}};
    for (const auto& t : c.targets) decide_req["targets"].push_back(resource_to_json(t));
    if (c.subscription_id) decide_req["subscription_id"] = *c.subscription_id;
    if (!token.empty()) {
        decide_req["identity_token"] = token;
    } else {
        auto vp_json = nlohmann::json::parse(vp, nullptr, false);
        if (vp_json.is_discarded()) {
            reply_json(res, 403, {{"error", "forbidden"}, {"reason", "malformed_presentation"}});
            return;
        }
        decide_req["presentation"] = std::move(vp_json);
    }

    auto pdp = make_client(config_.pdp_url);
    auto decision = pdp->Post("/decide", decide_req.dump(), "application/json");
    if (!decision || decision->status >= 500) {
        reply_error(res, 503, "pdp_unavailable", "no decision available");
        return;
    }
    auto d = nlohmann::json::parse(decision->body, nullptr, false);
    if (decision->status != 200 || d.is_discarded() || d.value("decision", "") != "permit") {
        std::string reason = "malformed_proof";
        if (!d.is_discarded() && d.contains("reason")) reason = d["reason"].get<std::string>();
        reply_json(res, 403, {{"error", "forbidden"}, {"reason", reason}});
        return;
    }

    httplib::Request up;
    up.method = req.method;
    up.path = req.target;
    up.body = req.body;
    for (const auto& [k, v] : req.headers)
        if (!strip_header(k)) up.headers.emplace(k, v);

    auto broker = make_client(config_.broker_url);
    auto upstream = broker->send(up);
    if (!upstream) {
        reply_error(res, 502, "broker_unavailable", httplib::to_string(upstream.error()));
        return;
    }

    if (c.operation == Operation::Subscribe && req.method == "POST" && upstream->status == 201) {
        auto created = nlohmann::json::parse(upstream->body, nullptr, false);
        bool registered = false;
        if (!created.is_discarded() && created.contains("id")) {
            auto r = pdp->Post("/subscriptions",
                               nlohmann::json{{"subscription_id", created["id"]}, {"decision_id", d["decision_id"]}}.dump(),
                               "application/json");
            registered = r && r->status == 201;
        }
        if (!registered) {
            // An untracked subscription could outlive its authorization; take it back.
            if (!created.is_discarded() && created.contains("id"))
                broker->Delete("/ngsi-ld/v1/subscriptions/" + created["id"].get<std::string>());
            reply_error(res, 503, "pdp_unavailable", "subscription could not be registered");
            return;
        }
    }
    if (c.subscription_id && (upstream->status == 204 || upstream->status == 404))
        pdp->Delete("/subscriptions/" + url_encode(*c.subscription_id));

    res.status = upstream->status;
    for (const auto& [k, v] : upstream->headers)
        if (!strip_header(k)) res.set_header(k, v);
    res.body = upstream->body;
}

} // namespace dsac
