#pragma once

#include "dsac/credential.hpp"
#include "dsac/http_util.hpp"

#include <functional>
#include <map>
#include <shared_mutex>
#include <string>

namespace dsac {

struct ConsumerRecord {
    std::string consumer_id;
    SecretHash secret;
    Timestamp registered_at = 0;
};

/// Consumer registry and identity-token issuer.
class IdentityProvider {
public:
    using Clock = std::function<Timestamp()>;

    struct Config {
        std::string issuer = "idp";
        Timestamp token_lifetime = 3600;
    };

    IdentityProvider(Config config, KeyPair key, Clock clock = {});

    void register_consumer(const std::string& consumer_id, const std::string& secret);
    /// Throws Error(auth) for unknown consumers and wrong secrets alike.
    [[nodiscard]] IdentityToken issue_identity_token(const std::string& consumer_id, const std::string& secret) const;

    [[nodiscard]] const std::string& issuer() const noexcept { return config_.issuer; }
    [[nodiscard]] const Bytes& public_key() const noexcept { return key_.public_key; }
    /// {"keys": [{"issuer", "key_id", "public_key"}]}
    [[nodiscard]] nlohmann::json jwks() const;

private:
    Config config_;
    KeyPair key_;
    Clock clock_;
    mutable std::shared_mutex mu_;
    std::map<std::string, ConsumerRecord> consumers_;
};

/// POST /register, POST /token, GET /jwks
class IdpServer : public HttpService {
public:
    explicit IdpServer(IdentityProvider& idp);
    ~IdpServer() override;

private:
    IdentityProvider& idp_;
};

} // namespace dsac
