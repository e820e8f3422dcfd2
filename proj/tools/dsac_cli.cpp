// dsac: run the services and act as consumer, resource owner or operator.

#include "dsac/bench.hpp"
#include "dsac/broker.hpp"
#include "dsac/client.hpp"
#include "dsac/idp.hpp"
#include "dsac/pap.hpp"
#include "dsac/pdp.hpp"
#include "dsac/pep.hpp"
#include "dsac/wire.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dsac;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kDenied = 3;
constexpr int kNotFound = 4;
constexpr int kConflict = 5;
constexpr int kUnavailable = 6;
constexpr int kFailed = 7;
constexpr int kCheckFailed = 8;

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::auth: return kDenied;
        case ErrorKind::not_found: return kNotFound;
        case ErrorKind::conflict: return kConflict;
        case ErrorKind::unavailable: return kUnavailable;
        default: return kFailed;
    }
}

int exit_code_for_status(int status) {
    if (status < 400) return kOk;
    if (status == 401 || status == 403) return kDenied;
    if (status == 404) return kNotFound;
    if (status == 409) return kConflict;
    if (status >= 500) return kUnavailable;
    return kFailed;
}

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorKind::not_found, "cannot open " + p.string());
    auto j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::validation, p.string() + " is not valid JSON");
    return j;
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    auto tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error(ErrorKind::unavailable, "cannot write " + p.string());
        out << text;
    }
    fs::rename(tmp, p);
}

// ---------------------------------------------------------------- client config

struct Settings {
    std::string idp_url = "http://127.0.0.1:8081";
    std::string pap_url = "http://127.0.0.1:8082";
    std::string pdp_url = "http://127.0.0.1:8083";
    std::string pep_url = "http://127.0.0.1:8080";
    std::string broker_url = "http://127.0.0.1:1026";
    std::string owner_key;
    std::string wallet = ".dsac-wallet";
    std::string entity_prefix = "urn:ngsi-ld:Entity:";
    std::string type_prefix = "https://example.org/types/";

    // JSON file first, then DSAC_<KEY> environment variables.
    void load(const std::string& path) {
        if (!path.empty()) {
            auto j = read_json_file(path);
            for (auto& [key, field] : fields())
                if (j.contains(key)) *field = j[key].get<std::string>();
        }
        for (auto& [key, field] : fields()) {
            std::string var = "DSAC_" + key;
            std::ranges::transform(var, var.begin(), [](unsigned char c) { return std::toupper(c); });
            if (const char* v = std::getenv(var.c_str())) *field = v;
        }
    }

    std::vector<std::pair<std::string, std::string*>> fields() {
        return {{"idp_url", &idp_url},       {"pap_url", &pap_url},       {"pdp_url", &pdp_url},
                {"pep_url", &pep_url},       {"broker_url", &broker_url}, {"owner_key", &owner_key},
                {"wallet", &wallet},         {"entity_prefix", &entity_prefix},
                {"type_prefix", &type_prefix}};
    }

    [[nodiscard]] std::string entity(const std::string& name) const {
        return detail::is_absolute_url(name) ? name : entity_prefix + name;
    }
    [[nodiscard]] std::string type(const std::string& name) const {
        return detail::is_absolute_url(name) ? name : type_prefix + name;
    }

    /// "type:SmartLamp", "object:lamp1", "attribute:lamp1/status" (short or absolute names).
    [[nodiscard]] ResourceUrl resource(const std::string& spec) const {
        auto colon = spec.find(':');
        if (colon == std::string::npos) throw Error(ErrorKind::validation, "resource must be <kind>:<name>");
        auto kind = parse_resource_kind(spec.substr(0, colon));
        auto name = spec.substr(colon + 1);
        if (!kind) throw Error(ErrorKind::validation, "unknown resource kind in " + spec);
        switch (*kind) {
            case ResourceKind::Type: return ResourceUrl::type(type(name));
            case ResourceKind::Object: return ResourceUrl::object(entity(name));
            case ResourceKind::Attribute: {
                if (detail::is_absolute_url(name)) return ResourceUrl::attribute(name);
                auto slash = name.rfind('/');
                if (slash == std::string::npos) throw Error(ErrorKind::validation, "attribute must be <entity>/<attr>");
                return ResourceUrl::attribute(entity(name.substr(0, slash)), name.substr(slash + 1));
            }
        }
        throw Error(ErrorKind::validation, "bad resource " + spec);
    }
};

// ---------------------------------------------------------------- wallet

struct Wallet {
    fs::path dir;

    [[nodiscard]] fs::path key_path() const { return dir / "key.json"; }
    [[nodiscard]] fs::path token_path() const { return dir / "token"; }
    [[nodiscard]] fs::path credentials_path() const { return dir / "credentials.json"; }

    [[nodiscard]] KeyPair key() const {
        if (!fs::exists(key_path())) throw Error(ErrorKind::not_found, "no key in wallet; run `dsac keygen` first");
        return KeyPair::from_json(read_json_file(key_path()));
    }

    ConsumerClient client(const Settings& s) const {
        ConsumerClient c({s.idp_url, s.pap_url, s.pep_url}, key());
        if (fs::exists(token_path())) {
            std::ifstream in(token_path());
            std::string t;
            std::getline(in, t);
            if (!t.empty()) c.set_token(IdentityToken::decode(t));
        }
        if (fs::exists(credentials_path()))
            for (const auto& vc : read_json_file(credentials_path())) c.add_credential(CapabilityCredential::from_json(vc));
        return c;
    }

    void save_credentials(const ConsumerClient& c) const {
        auto arr = json::array();
        for (const auto& vc : c.credentials()) arr.push_back(vc.to_json());
        write_file(credentials_path(), arr.dump(2) + "\n");
    }
};

// ---------------------------------------------------------------- output

bool g_json = false;

void emit(const json& j, const std::string& text) {
    if (g_json) std::cout << j.dump() << "\n";
    else std::cout << text << "\n";
}

int emit_reply(const HttpReply& r) {
    auto body = r.json();
    if (g_json) {
        std::cout << json{{"status", r.status}, {"body", body.is_null() ? json(r.body) : body}}.dump() << "\n";
    } else {
        std::cout << "HTTP " << r.status << "\n";
        if (!r.body.empty()) std::cout << (body.is_null() ? r.body : body.dump(2)) << "\n";
    }
    return exit_code_for_status(r.status);
}

HttpReply expect_ok(HttpReply r, const std::string& what) {
    if (r.status >= 400) {
        auto j = r.json();
        std::string msg = j.is_object() ? j.value("reason", j.value("error", r.body)) : r.body;
        throw Error(r.status == 401 || r.status == 403 ? ErrorKind::auth
                    : r.status == 404                  ? ErrorKind::not_found
                    : r.status == 409                  ? ErrorKind::conflict
                    : r.status >= 500                  ? ErrorKind::unavailable
                                                       : ErrorKind::validation,
                    what + " failed (" + std::to_string(r.status) + "): " + msg);
    }
    return r;
}

std::string entity_target(const std::string& id) { return "/ngsi-ld/v1/entities/" + url_encode(id); }

ProofChoice parse_proof(const std::string& s) {
    if (s == "token") return ProofChoice::identity_token;
    if (s == "vp") return ProofChoice::presentation;
    if (s == "none") return ProofChoice::none;
    return ProofChoice::automatic;
}

// ---------------------------------------------------------------- services

HttpService* g_running = nullptr;

void on_signal(int) {
    if (g_running) g_running->stop();
}

void serve(HttpService& svc, const std::string& host, int port, const std::string& role) {
    g_running = &svc;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << role << " listening on " << host << ":" << port << std::endl;
    svc.run(host, port);
    g_running = nullptr;
}

KeyPair load_or_create_key(const std::string& path, const std::string& key_id) {
    if (path.empty()) return KeyPair::generate(key_id);
    if (fs::exists(path)) return KeyPair::from_json(read_json_file(path));
    auto key = KeyPair::generate(key_id);
    write_file(path, key.to_json().dump(2) + "\n");
    return key;
}

// A key given inline (base64url) or as {"key_file": path}.
Bytes public_key_from(const json& j) {
    if (j.is_string()) return base64url_decode(j.get<std::string>());
    return KeyPair::from_json(read_json_file(j.at("key_file").get<std::string>())).public_key;
}

int serve_role(const std::string& role, const std::string& config_path, std::optional<int> port_override,
               const std::string& host_override) {
    json cfg = config_path.empty() ? json::object() : read_json_file(config_path);
    const std::string host = host_override.empty() ? cfg.value("host", "127.0.0.1") : host_override;
    auto port = [&](int fallback) { return port_override.value_or(cfg.value("port", fallback)); };

    if (role == "broker") {
        Broker broker;
        const std::string snap = cfg.value("snapshot_path", "");
        if (!snap.empty() && fs::exists(snap)) broker.restore(read_json_file(snap));
        BrokerServer server(broker);
        serve(server, host, port(1026), role);
        if (!snap.empty()) write_file(snap, broker.snapshot().dump() + "\n");
        return kOk;
    }
    if (role == "idp") {
        IdentityProvider::Config c;
        c.issuer = cfg.value("issuer", c.issuer);
        c.token_lifetime = cfg.value("token_lifetime", c.token_lifetime);
        IdentityProvider idp(c, load_or_create_key(cfg.value("key_file", ""), c.issuer + "-key"));
        std::cerr << "idp issuer=" << idp.issuer() << " public_key=" << base64url_encode(idp.public_key()) << "\n";
        IdpServer server(idp);
        serve(server, host, port(8081), role);
        return kOk;
    }
    if (role == "pap") {
        PolicyAdministrationPoint::Config c;
        c.issuer = cfg.value("issuer", c.issuer);
        c.base_url = cfg.value("base_url", "http://" + host + ":" + std::to_string(port(8082)));
        c.owner_keys = cfg.value("owner_keys", c.owner_keys);
        c.pdp_secret = cfg.value("pdp_secret", "");
        c.idp_issuer = cfg.value("idp_issuer", c.idp_issuer);
        if (cfg.contains("idp_public_key")) {
            c.idp_public_key = public_key_from(cfg["idp_public_key"]);
        } else if (cfg.contains("idp_url")) {
            auto jwks = expect_ok(http_call(cfg["idp_url"], "GET", "/jwks"), "fetching IdP keys").json();
            c.idp_public_key = base64url_decode(jwks.at("keys").at(0).at("public_key").get<std::string>());
        } else {
            throw Error(ErrorKind::validation, "pap config needs idp_public_key or idp_url");
        }
        c.status_list_capacity = cfg.value("status_list_capacity", c.status_list_capacity);
        c.credential_lifetime = cfg.value("credential_lifetime", c.credential_lifetime);
        c.snapshot_path = cfg.value("snapshot_path", "");
        PolicyAdministrationPoint pap(c, load_or_create_key(cfg.value("key_file", ""), c.issuer + "-key"));
        std::cerr << "pap issuer=" << pap.issuer() << " public_key=" << base64url_encode(pap.public_key()) << "\n";
        PapServer server(pap);
        serve(server, host, port(8082), role);
        return kOk;
    }
    if (role == "pdp") {
        PolicyDecisionPoint::Config c;
        c.audience = cfg.at("audience").get<std::string>();
        for (const auto& [issuer, key] : cfg.at("trusted_paps").items()) c.trusted_paps[issuer] = public_key_from(key);
        c.idp_issuer = cfg.value("idp_issuer", c.idp_issuer);
        c.idp_public_key = public_key_from(cfg.at("idp_public_key"));
        c.nonce_ttl = cfg.value("nonce_ttl", c.nonce_ttl);
        c.pip_ttl = cfg.value("pip_ttl", c.pip_ttl);
        c.freshness_window = cfg.value("freshness_window", c.freshness_window);
        c.decision_ttl = cfg.value("decision_ttl", c.decision_ttl);
        c.refresh_period = std::chrono::milliseconds(cfg.value("refresh_period_ms", c.refresh_period.count()));
        c.sweep_period = std::chrono::milliseconds(cfg.value("sweep_period_ms", c.sweep_period.count()));
        PolicyDecisionPoint::Seams seams;
        if (cfg.contains("pap_url"))
            seams.policies = std::make_shared<HttpPolicySource>(cfg["pap_url"], cfg.value("pdp_secret", ""));
        seams.fetcher = std::make_shared<HttpStatusListFetcher>();
        seams.broker = std::make_shared<HttpBrokerClient>(cfg.at("broker_url").get<std::string>());
        PolicyDecisionPoint pdp(c, seams);
        pdp.start_background();
        PdpServer server(pdp);
        serve(server, host, port(8083), role);
        pdp.stop_background();
        return kOk;
    }
    if (role == "pep") {
        const int p = port(8080);
        PepServer server({cfg.at("broker_url").get<std::string>(), cfg.at("pdp_url").get<std::string>(),
                          cfg.value("audience", "http://" + host + ":" + std::to_string(p))});
        serve(server, host, p, role);
        return kOk;
    }
    throw Error(ErrorKind::validation, "unknown role " + role);
}

// Prints notifications until interrupted.
class NotificationPrinter : public HttpService {
public:
    NotificationPrinter() {
        server_.Post("/notify", [](const httplib::Request& req, httplib::Response& res) {
            std::cout << req.body << std::endl;
            res.status = 204;
        });
    }
    ~NotificationPrinter() override { stop(); }
};

json parse_value(const std::string& text) {
    auto j = json::parse(text, nullptr, false);
    return j.is_discarded() ? json(text) : j;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Attribute-based access control for a context broker: services and clients"};
    app.require_subcommand(1);
    std::string config_path;
    std::string wallet_override;
    app.add_option("--config", config_path, "Client configuration JSON (also DSAC_CONFIG)");
    app.add_option("--wallet", wallet_override, "Wallet directory (key.json, token, credentials.json)");
    app.add_flag("--json", g_json, "Machine-readable output");

    Settings s;
    auto wallet = [&] { return Wallet{wallet_override.empty() ? fs::path(s.wallet) : fs::path(wallet_override)}; };
    std::function<int()> action;

    // keygen
    auto* keygen = app.add_subcommand("keygen", "Create the wallet key pair");
    bool force = false;
    std::string key_id = "consumer-key";
    keygen->add_flag("--force", force, "Overwrite an existing key");
    keygen->add_option("--key-id", key_id, "Key identifier");
    keygen->callback([&] {
        action = [&] {
            auto w = wallet();
            if (fs::exists(w.key_path()) && !force)
                throw Error(ErrorKind::conflict, w.key_path().string() + " exists; use --force");
            auto key = KeyPair::generate(key_id);
            write_file(w.key_path(), key.to_json().dump(2) + "\n");
            emit({{"key_id", key.key_id}, {"public_key", key.public_key_b64()}, {"path", w.key_path().string()}},
                 "public key " + key.public_key_b64() + " written to " + w.key_path().string());
            return kOk;
        };
    });

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run one service in the foreground");
    std::string role, svc_config, host;
    std::optional<int> port;
    serve_cmd->add_option("role", role, "broker | idp | pap | pdp | pep")
        ->required()
        ->check(CLI::IsMember({"broker", "idp", "pap", "pdp", "pep"}));
    serve_cmd->add_option("--config", svc_config, "Service configuration JSON");
    serve_cmd->add_option("--port", port, "Listen port");
    serve_cmd->add_option("--host", host, "Listen address");
    serve_cmd->callback([&] { action = [&] { return serve_role(role, svc_config, port, host); }; });

    // register / token / get-vc
    std::string consumer_id, secret;
    auto* reg = app.add_subcommand("register", "Register this consumer at the IdP");
    reg->add_option("--id", consumer_id)->required();
    reg->add_option("--secret", secret)->required();
    reg->callback([&] {
        action = [&] {
            ConsumerClient c({s.idp_url, s.pap_url, s.pep_url}, KeyPair{});
            c.register_consumer(consumer_id, secret);
            emit({{"registered", consumer_id}}, "registered " + consumer_id);
            return kOk;
        };
    });
    auto* tok = app.add_subcommand("token", "Log in at the IdP and store the identity token");
    tok->add_option("--id", consumer_id)->required();
    tok->add_option("--secret", secret)->required();
    tok->callback([&] {
        action = [&] {
            auto w = wallet();
            ConsumerClient c({s.idp_url, s.pap_url, s.pep_url}, KeyPair{});
            const auto& t = c.fetch_token(consumer_id, secret);
            write_file(w.token_path(), t.encode() + "\n");
            emit({{"consumer_id", t.to_json().value("sub", consumer_id)}, {"token", t.to_json()}},
                 "token stored in " + w.token_path().string());
            return kOk;
        };
    });
    auto* getvc = app.add_subcommand("get-vc", "Request a capability credential from the PAP");
    getvc->callback([&] {
        action = [&] {
            auto w = wallet();
            auto c = w.client(s);
            const auto& vc = c.fetch_credential();
            w.save_credentials(c);
            std::ostringstream text;
            text << "credential from " << vc.issuer << " with " << vc.capabilities.size() << " capabilities, expires "
                 << vc.expires_at;
            emit(vc.to_json(), text.str());
            return kOk;
        };
    });

    // read / write
    std::string entity, attrs, attr, value, proof = "auto";
    auto* read = app.add_subcommand("read", "Read an entity through the PEP");
    read->add_option("--entity", entity)->required();
    read->add_option("--attrs", attrs, "Comma-separated attribute names");
    read->add_option("--proof", proof)->check(CLI::IsMember({"auto", "token", "vp", "none"}));
    read->callback([&] {
        action = [&] {
            auto c = wallet().client(s);
            auto target = entity_target(s.entity(entity));
            if (!attrs.empty()) target += "?attrs=" + url_encode(attrs);
            return emit_reply(c.request("GET", target, {}, parse_proof(proof)));
        };
    });
    auto* write = app.add_subcommand("write", "Update one attribute through the PEP");
    write->add_option("--entity", entity)->required();
    write->add_option("--attr", attr)->required();
    write->add_option("--value", value, "JSON value, or a plain string")->required();
    write->add_option("--proof", proof)->check(CLI::IsMember({"auto", "token", "vp", "none"}));
    write->callback([&] {
        action = [&] {
            auto c = wallet().client(s);
            auto target = entity_target(s.entity(entity)) + "/attrs/" + url_encode(attr);
            return emit_reply(c.request("PATCH", target, json{{"value", parse_value(value)}}.dump(), parse_proof(proof)));
        };
    });

    // subscribe / unsubscribe
    std::string sub_type, sub_entity, endpoint, sub_id;
    std::optional<int> listen;
    auto* sub = app.add_subcommand("subscribe", "Subscribe to changes through the PEP");
    auto* type_opt = sub->add_option("--type", sub_type);
    auto* entity_opt = sub->add_option("--entity", sub_entity);
    type_opt->excludes(entity_opt);
    sub->add_option("--endpoint", endpoint, "Notification URL");
    sub->add_option("--listen", listen, "Serve /notify on this port and print notifications");
    sub->add_option("--proof", proof)->check(CLI::IsMember({"auto", "token", "vp", "none"}));
    sub->callback([&] {
        action = [&] {
            if (sub_type.empty() == sub_entity.empty()) throw Error(ErrorKind::validation, "give --type or --entity");
            if (endpoint.empty() && !listen) throw Error(ErrorKind::validation, "give --endpoint or --listen");
            if (endpoint.empty()) endpoint = "http://127.0.0.1:" + std::to_string(*listen) + "/notify";
            auto c = wallet().client(s);
            json selector = sub_type.empty() ? json{{"id", s.entity(sub_entity)}} : json{{"type", s.type(sub_type)}};
            json body{{"type", "Subscription"},
                      {"entities", json::array({selector})},
                      {"notification", {{"endpoint", {{"uri", endpoint}}}}}};
            auto r = c.request("POST", "/ngsi-ld/v1/subscriptions", body.dump(), parse_proof(proof));
            int rc = emit_reply(r);
            if (rc != kOk || !listen) return rc;
            NotificationPrinter printer;
            serve(printer, "0.0.0.0", *listen, "notification listener");
            return kOk;
        };
    });
    auto* unsub = app.add_subcommand("unsubscribe", "Delete a subscription through the PEP");
    unsub->add_option("--id", sub_id)->required();
    unsub->add_option("--proof", proof)->check(CLI::IsMember({"auto", "token", "vp", "none"}));
    unsub->callback([&] {
        action = [&] {
            auto c = wallet().client(s);
            return emit_reply(c.request("DELETE", "/ngsi-ld/v1/subscriptions/" + url_encode(sub_id), {}, parse_proof(proof)));
        };
    });

    // policy
    auto* policy = app.add_subcommand("policy", "Manage policies at the PAP (owner key required)");
    policy->require_subcommand(1);
    std::string p_consumer, p_op, p_resource, p_id;
    auto owner_headers = [&] {
        if (s.owner_key.empty()) throw Error(ErrorKind::auth, "owner_key is not configured");
        return httplib::Headers{{kOwnerKeyHeader, s.owner_key}};
    };
    auto* put = policy->add_subcommand("put", "Grant <consumer> <Operation> on <kind>:<name>");
    put->add_option("consumer", p_consumer)->required();
    put->add_option("operation", p_op)->required()->check(CLI::IsMember({"Read", "Write", "Subscribe"}));
    put->add_option("resource", p_resource, "type:<T> | object:<O> | attribute:<O>/<a>")->required();
    put->callback([&] {
        action = [&] {
            Policy p{p_consumer, *parse_operation(p_op), s.resource(p_resource)};
            auto r = expect_ok(http_call(s.pap_url, "PUT", "/policies", policy_to_json(p).dump(), owner_headers()),
                               "policy put");
            auto id = r.json().value("id", "");
            emit({{"id", id}, {"policy", policy_to_json(p)}},
                 id + "  " + p.consumer_id + " " + p_op + " " + std::string(to_string(p.resource.kind())) + " " +
                     p.resource.value());
            return kOk;
        };
    });
    auto* list = policy->add_subcommand("list", "List your policies");
    list->add_option("--consumer", p_consumer);
    list->callback([&] {
        action = [&] {
            auto target = "/policies" + (p_consumer.empty() ? std::string() : "?consumer_id=" + url_encode(p_consumer));
            auto r = expect_ok(http_call(s.pap_url, "GET", target, {}, owner_headers()), "policy list").json();
            std::ostringstream text;
            for (const auto& p : r)
                text << p.value("id", "") << "  " << p["consumer_id"].get<std::string>() << " "
                     << p["operation"].get<std::string>() << " " << p["resource"]["kind"].get<std::string>() << " "
                     << p["resource"]["url"].get<std::string>() << "\n";
            emit(r, r.empty() ? "no policies" : text.str().substr(0, text.str().size() - 1));
            return kOk;
        };
    });
    auto* del = policy->add_subcommand("delete", "Delete a policy by id");
    del->add_option("id", p_id)->required();
    del->callback([&] {
        action = [&] {
            expect_ok(http_call(s.pap_url, "DELETE", "/policies/" + url_encode(p_id), {}, owner_headers()), "policy delete");
            emit({{"deleted", p_id}}, "deleted " + p_id);
            return kOk;
        };
    });

    // revoke
    auto* revoke = app.add_subcommand("revoke", "Revoke credentials at the PAP");
    std::string r_consumer, r_list;
    std::optional<std::size_t> r_index;
    auto* rc_opt = revoke->add_option("--consumer", r_consumer, "Every live credential of this consumer");
    auto* rl_opt = revoke->add_option("--list-url", r_list, "Status list URL of one credential");
    auto* ri_opt = revoke->add_option("--index", r_index, "Status index of one credential");
    rc_opt->excludes(rl_opt)->excludes(ri_opt);
    rl_opt->needs(ri_opt);
    ri_opt->needs(rl_opt);
    revoke->callback([&] {
        action = [&] {
            json body = r_consumer.empty() ? json{{"status_list_url", r_list}, {"status_index", r_index.value_or(0)}}
                                           : json{{"consumer_id", r_consumer}};
            if (r_consumer.empty() && r_list.empty()) throw Error(ErrorKind::validation, "give --consumer or --list-url/--index");
            auto r = expect_ok(http_call(s.pap_url, "POST", "/revocations", body.dump(), owner_headers()), "revoke").json();
            emit(r, "revoked " + std::to_string(r.value("revoked", 0)) + " credential(s)");
            return kOk;
        };
    });

    // status-list show
    auto* status = app.add_subcommand("status-list", "Inspect published status lists");
    status->require_subcommand(1);
    auto* show = status->add_subcommand("show", "Fetch and decode a status list");
    std::optional<std::size_t> list_number;
    std::string issuer_key;
    show->add_option("--list", list_number, "List number (default 0)");
    show->add_option("--issuer-key", issuer_key, "PAP public key (base64url) to check the signature");
    show->callback([&] {
        action = [&] {
            auto n = list_number.value_or(0);
            auto target = n == 0 ? std::string("/status-list") : "/status-list/" + std::to_string(n);
            auto wrapper = StatusListCredential::from_json(expect_ok(http_call(s.pap_url, "GET", target), "fetch").json());
            auto bits = wrapper.bits();
            std::vector<std::size_t> revoked;
            for (std::size_t i = 0; i < bits.size(); ++i)
                if (bits.test(i)) revoked.push_back(i);
            json out{{"id", wrapper.id},
                     {"issuer", wrapper.issuer},
                     {"issued_at", wrapper.issued_at},
                     {"bit_count", wrapper.bit_count},
                     {"encoded_bytes", wrapper.encoded_list.size()},
                     {"revoked_indices", revoked}};
            if (!issuer_key.empty()) out["signature_valid"] = verify_status_list(wrapper, base64url_decode(issuer_key));
            std::ostringstream text;
            text << wrapper.id << "\n  issuer " << wrapper.issuer << ", issued_at " << wrapper.issued_at << "\n  "
                 << wrapper.bit_count << " bits, " << revoked.size() << " revoked";
            for (std::size_t i = 0; i < revoked.size() && i < 32; ++i) text << (i ? "," : ": ") << revoked[i];
            if (revoked.size() > 32) text << ",...";
            if (out.contains("signature_valid")) text << "\n  signature " << (out["signature_valid"].get<bool>() ? "valid" : "INVALID");
            emit(out, text.str());
            return out.value("signature_valid", true) ? kOk : kCheckFailed;
        };
    });

    // bench-revocation
    auto* bench = app.add_subcommand("bench-revocation", "Compressed status list size against revocation density");
    std::size_t bits = 1'000'000, seeds = 5;
    std::vector<double> densities{0.0001, 0.001, 0.01, 0.1, 0.5};
    std::string gnuplot, csv;
    bench->add_option("--bits", bits)->check(CLI::PositiveNumber);
    bench->add_option("--densities", densities)->delimiter(',')->check(CLI::Range(0.0, 1.0));
    bench->add_option("--seeds", seeds)->check(CLI::PositiveNumber);
    bench->add_option("--gnuplot", gnuplot, "Also write gnuplot data to this file");
    bench->add_option("--csv", csv, "Write the CSV here instead of stdout");
    bench->callback([&] {
        action = [&] {
            auto rows = run_revocation_bench(bits, densities, seeds);
            if (!gnuplot.empty()) {
                std::ofstream out(gnuplot);
                write_bench_gnuplot(out, rows);
            }
            if (g_json) {
                auto arr = json::array();
                for (const auto& r : rows)
                    arr.push_back({{"density", r.density},
                                   {"raw_bytes", r.raw_bytes},
                                   {"compressed_bytes_mean", r.compressed_bytes_mean},
                                   {"compressed_bytes_stddev", r.compressed_bytes_stddev}});
                std::cout << arr.dump() << "\n";
            } else if (!csv.empty()) {
                std::ofstream out(csv);
                write_bench_csv(out, rows);
            } else {
                write_bench_csv(std::cout, rows);
            }
            if (!means_non_decreasing(rows)) {
                std::cerr << "compressed size is not monotonic in density\n";
                return kCheckFailed;
            }
            return kOk;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (config_path.empty())
            if (const char* env = std::getenv("DSAC_CONFIG")) config_path = env;
        s.load(config_path);
        return action ? action() : kUsage;
    } catch (const Error& e) {
        if (g_json) std::cout << json{{"error", to_string(e.kind())}, {"message", e.what()}}.dump() << "\n";
        else std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        if (g_json) std::cout << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
        else std::cerr << "error: " << e.what() << "\n";
        return kFailed;
    }
}
