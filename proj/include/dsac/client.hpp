#pragma once

/*! \file
 * \brief Consumer-side protocol client: IdP registration, token and
 * credential retrieval, and requests through the PEP.
 *
 * In presentation mode a request is sent once without proof to obtain a
 * nonce, then retried with a presentation bound to that nonce and to the PEP
 * URL this client was configured with. The audience is never taken from the
 * challenge, so a relayed challenge cannot redirect the presentation.
 */

#include "dsac/credential.hpp"
#include "dsac/http_util.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dsac {

struct HttpReply {
    int status = 0;
    std::string body;
    httplib::Headers headers;

    /// Parsed body, or null when it is not JSON.
    [[nodiscard]] nlohmann::json json() const;
    [[nodiscard]] std::string header(const std::string& name) const;
};

enum class ProofChoice { automatic, identity_token, presentation, none };

class ConsumerClient {
public:
    struct Endpoints {
        std::string idp_url;
        std::string pap_url;
        std::string pep_url;
    };

    ConsumerClient(Endpoints endpoints, KeyPair key);

    void register_consumer(const std::string& consumer_id, const std::string& secret);
    const IdentityToken& fetch_token(const std::string& consumer_id, const std::string& secret);
    /// Needs a token. Stores and returns the issued credential.
    const CapabilityCredential& fetch_credential();

    void set_token(IdentityToken token) { token_ = std::move(token); }
    void add_credential(CapabilityCredential vc) { credentials_.push_back(std::move(vc)); }
    [[nodiscard]] const std::optional<IdentityToken>& token() const noexcept { return token_; }
    [[nodiscard]] const std::vector<CapabilityCredential>& credentials() const noexcept { return credentials_; }
    [[nodiscard]] const KeyPair& key() const noexcept { return key_; }
    [[nodiscard]] const Endpoints& endpoints() const noexcept { return endpoints_; }

    /// A request through the PEP; \p target is path plus query, already encoded.
    /// Throws Error(unavailable) when the PEP cannot be reached.
    HttpReply request(const std::string& method, const std::string& target, const std::string& body = {},
                      ProofChoice proof = ProofChoice::automatic);

    /// Asks the PEP for a nonce (an unauthenticated request to \p target).
    std::string obtain_nonce(const std::string& method, const std::string& target, const std::string& body = {});

    [[nodiscard]] Presentation present(const std::string& nonce, const std::string& audience, Timestamp now) const;

    /// Raw send to the PEP with extra headers.
    HttpReply send(const std::string& method, const std::string& target, const std::string& body,
                   const httplib::Headers& headers) const;

private:
    Endpoints endpoints_;
    KeyPair key_;
    std::optional<IdentityToken> token_;
    std::vector<CapabilityCredential> credentials_;
};

/// Sends one request to any service. Throws Error(unavailable) on transport failure.
HttpReply http_call(const std::string& base_url, const std::string& method, const std::string& target,
                    const std::string& body = {}, const httplib::Headers& headers = {});

} // namespace dsac
