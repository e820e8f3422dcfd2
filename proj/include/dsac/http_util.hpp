#pragma once

#include "dsac/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace dsac {

/// Percent-encodes everything outside the RFC 3986 unreserved set.
std::string url_encode(std::string_view s);

struct AccessLogEntry {
    std::string method;
    std::string path;    // decoded
    std::string target;  // raw request target, including the query
    int status = 0;
};

/// Request log kept by every service; tests inspect it.
class AccessLog {
public:
    void record(AccessLogEntry e);
    [[nodiscard]] std::vector<AccessLogEntry> entries() const;
    [[nodiscard]] std::size_t size() const;
    void clear();

private:
    mutable std::mutex mu_;
    std::vector<AccessLogEntry> entries_;
};

/// Owns an httplib::Server listening on a background thread.
class HttpService {
public:
    HttpService();
    virtual ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds (port 0 = ephemeral) and starts serving. Returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();
    /// Blocks in the calling thread until stop() is called from elsewhere.
    void run(const std::string& host, int port);

    [[nodiscard]] int port() const noexcept { return port_; }
    [[nodiscard]] std::string base_url() const;
    [[nodiscard]] AccessLog& access_log() noexcept { return log_; }

protected:
    httplib::Server server_;

private:
    AccessLog log_;
    std::thread thread_;
    std::string host_ = "127.0.0.1";
    int port_ = 0;
};

/// Client for "http://host:port" with sane timeouts and no automatic URL encoding.
std::unique_ptr<httplib::Client> make_client(const std::string& base_url,
                                             std::chrono::milliseconds timeout = std::chrono::seconds(5));

/// Splits "http://host:port/some/path" into base ("http://host:port") and path ("/some/path").
std::pair<std::string, std::string> split_url(const std::string& url);

nlohmann::json parse_json_body(const httplib::Request& req);

void reply_json(httplib::Response& res, int status, const nlohmann::json& body);
void reply_error(httplib::Response& res, int status, std::string_view code, std::string_view message);

/// Runs \p fn, mapping Error and JSON exceptions onto error responses.
template <class F>
void guarded(httplib::Response& res, F&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        reply_error(res, http_status(e.kind()), to_string(e.kind()), e.what());
    } catch (const nlohmann::json::exception& e) {
        reply_error(res, 400, "validation", e.what());
    }
}

/// Value of "Authorization: Bearer <x>", or empty.
std::string bearer_token(const httplib::Request& req);

} // namespace dsac
