#include "dsac/idp.hpp"

#include "dsac/clock.hpp"

namespace dsac {

IdentityProvider::IdentityProvider(Config config, KeyPair key, Clock clock)
    : config_(std::move(config)), key_(std::move(key)), clock_(clock ? std::move(clock) : Clock(system_now)) {}

void IdentityProvider::register_consumer(const std::string& consumer_id, const std::string& secret) {
    if (consumer_id.empty()) throw Error(ErrorKind::validation, "consumer id must not be empty");
    if (secret.empty()) throw Error(ErrorKind::validation, "secret must not be empty");
    ConsumerRecord record{consumer_id, hash_secret(secret), clock_()};
    std::unique_lock lock(mu_);
    if (!consumers_.try_emplace(consumer_id, std::move(record)).second)
        throw Error(ErrorKind::conflict, "consumer already registered: " + consumer_id);
}

IdentityToken IdentityProvider::issue_identity_token(const std::string& consumer_id,
                                                     const std::string& secret) const {
    bool ok = false;
    {
        std::shared_lock lock(mu_);
        auto it = consumers_.find(consumer_id);
        // Hash even for unknown ids so both failures cost the same.
        static const SecretHash dummy = hash_secret("dummy");
        ok = check_secret(secret, it == consumers_.end() ? dummy : it->second.secret) && it != consumers_.end();
    }
    if (!ok) throw Error(ErrorKind::auth, "authentication failed");
    IdentityToken t;
    t.consumer_id = consumer_id;
    t.issuer = config_.issuer;
    t.issued_at = clock_();
    t.expires_at = t.issued_at + config_.token_lifetime;
    return sign_identity_token(std::move(t), key_);
}

nlohmann::json IdentityProvider::jwks() const {
    return {{"keys", nlohmann::json::array({{{"issuer", config_.issuer},
                                             {"key_id", key_.key_id},
                                             {"public_key", key_.public_key_b64()}}})}};
}

IdpServer::IdpServer(IdentityProvider& idp) : idp_(idp) {
    server_.Post("/register", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto body = parse_json_body(req);
            idp_.register_consumer(body.at("consumer_id").get<std::string>(), body.at("secret").get<std::string>());
            reply_json(res, 201, {{"consumer_id", body["consumer_id"]}});
        });
    });
    server_.Post("/token", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto body = parse_json_body(req);
            auto token = idp_.issue_identity_token(body.at("consumer_id").get<std::string>(),
                                                   body.at("secret").get<std::string>());
            reply_json(res, 200,
                       {{"access_token", token.encode()}, {"token", token.to_json()}, {"expires_at", token.expires_at}});
        });
    });
    server_.Get("/jwks", [this](const httplib::Request&, httplib::Response& res) { reply_json(res, 200, idp_.jwks()); });
}

IdpServer::~IdpServer() { stop(); }

} // namespace dsac
