#include "dsac/client.hpp"

#include "dsac/clock.hpp"
#include "dsac/wire.hpp"

namespace dsac {

nlohmann::json HttpReply::json() const {
    auto j = nlohmann::json::parse(body, nullptr, false);
    return j.is_discarded() ? nlohmann::json() : j;
}

std::string HttpReply::header(const std::string& name) const {
    auto it = headers.find(name);
    return it == headers.end() ? std::string{} : it->second;
}

HttpReply http_call(const std::string& base_url, const std::string& method, const std::string& target,
                    const std::string& body, const httplib::Headers& headers) {
    httplib::Request req;
    req.method = method;
    req.path = target;
    req.headers = headers;
    if (!body.empty()) {
        req.body = body;
        if (!req.has_header("Content-Type")) req.headers.emplace("Content-Type", "application/json");
    }
    auto client = make_client(base_url);
    auto res = client->send(req);
    if (!res) throw Error(ErrorKind::unavailable, base_url + " unreachable: " + httplib::to_string(res.error()));
    return {res->status, res->body, res->headers};
}

namespace {

[[noreturn]] void fail(const HttpReply& r, const std::string& what) {
    auto j = r.json();
    std::string detail = j.is_object() && j.contains("message") ? j["message"].get<std::string>() : r.body;
    ErrorKind kind = r.status == 401 || r.status == 403 ? ErrorKind::auth
                     : r.status == 404                  ? ErrorKind::not_found
                     : r.status == 409                  ? ErrorKind::conflict
                     : r.status >= 500                  ? ErrorKind::unavailable
                                                        : ErrorKind::validation;
    throw Error(kind, what + " failed (" + std::to_string(r.status) + "): " + detail);
}

} // namespace

ConsumerClient::ConsumerClient(Endpoints endpoints, KeyPair key)
    : endpoints_(std::move(endpoints)), key_(std::move(key)) {}

void ConsumerClient::register_consumer(const std::string& consumer_id, const std::string& secret) {
    auto r = http_call(endpoints_.idp_url, "POST", "/register",
                       nlohmann::json{{"consumer_id", consumer_id}, {"secret", secret}}.dump());
    if (r.status != 201) fail(r, "registration");
}

const IdentityToken& ConsumerClient::fetch_token(const std::string& consumer_id, const std::string& secret) {
    auto r = http_call(endpoints_.idp_url, "POST", "/token",
                       nlohmann::json{{"consumer_id", consumer_id}, {"secret", secret}}.dump());
    if (r.status != 200) fail(r, "token request");
    token_ = IdentityToken::decode(r.json().at("access_token").get<std::string>());
    return *token_;
}

const CapabilityCredential& ConsumerClient::fetch_credential() {
    if (!token_) throw Error(ErrorKind::auth, "no identity token; fetch one first");
    auto r = http_call(endpoints_.pap_url, "POST", "/credentials",
                       nlohmann::json{{"public_key", key_.public_key_b64()}}.dump(),
                       {{"Authorization", "Bearer " + token_->encode()}});
    if (r.status != 201) fail(r, "credential request");
    credentials_.push_back(CapabilityCredential::from_json(r.json()));
    return credentials_.back();
}

HttpReply ConsumerClient::send(const std::string& method, const std::string& target, const std::string& body,
                               const httplib::Headers& headers) const {
    return http_call(endpoints_.pep_url, method, target, body, headers);
}

std::string ConsumerClient::obtain_nonce(const std::string& method, const std::string& target,
                                         const std::string& body) {
    auto r = send(method, target, body, {});
    if (r.status != 401) fail(r, "nonce challenge");
    return r.json().at("nonce").get<std::string>();
}

Presentation ConsumerClient::present(const std::string& nonce, const std::string& audience, Timestamp now) const {
    return create_presentation(credentials_, nonce, audience, key_, now);
}

HttpReply ConsumerClient::request(const std::string& method, const std::string& target, const std::string& body,
                                  ProofChoice proof) {
    if (proof == ProofChoice::automatic)
        proof = !credentials_.empty() ? ProofChoice::presentation
                : token_              ? ProofChoice::identity_token
                                      : ProofChoice::none;
    switch (proof) {
        case ProofChoice::none:
            return send(method, target, body, {});
        case ProofChoice::identity_token:
            if (!token_) throw Error(ErrorKind::auth, "no identity token");
            return send(method, target, body, {{"Authorization", "Bearer " + token_->encode()}});
        case ProofChoice::presentation: {
            if (credentials_.empty()) throw Error(ErrorKind::auth, "no capability credential");
            auto challenge = send(method, target, body, {});
            if (challenge.status != 401) return challenge;
            auto nonce = challenge.json().at("nonce").get<std::string>();
            auto vp = present(nonce, endpoints_.pep_url, system_now());
            return send(method, target, body, {{kPresentationHeader, vp.encode()}});
        }
        case ProofChoice::automatic:
            break;
    }
    throw Error(ErrorKind::validation, "unreachable proof choice");
}

} // namespace dsac
