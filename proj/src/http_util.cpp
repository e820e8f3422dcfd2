#include "dsac/http_util.hpp"

namespace dsac {

std::string url_encode(std::string_view s) {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    out.reserve(s.size() * 3);
    for (char ch : s) {
        auto c = static_cast<unsigned char>(ch);
        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '.' ||
            c == '_' || c == '~') {
            out.push_back(ch);
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

void AccessLog::record(AccessLogEntry e) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(e));
}

std::vector<AccessLogEntry> AccessLog::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

std::size_t AccessLog::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

void AccessLog::clear() {
    std::lock_guard lock(mu_);
    entries_.clear();
}

HttpService::HttpService() {
    server_.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
        log_.record({req.method, req.path, req.target, res.status});
    });
    server_.set_keep_alive_max_count(100);
}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
    host_ = host;
    if (port == 0) {
        port_ = server_.bind_to_any_port(host);
    } else {
        if (!server_.bind_to_port(host, port)) port_ = -1;
        else port_ = port;
    }
    if (port_ < 0) throw Error(ErrorKind::unavailable, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
}

void HttpService::run(const std::string& host, int port) {
    host_ = host;
    port_ = port;
    if (!server_.listen(host, port)) throw Error(ErrorKind::unavailable, "cannot listen on " + base_url());
}

void HttpService::stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
}

std::string HttpService::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

std::unique_ptr<httplib::Client> make_client(const std::string& base_url, std::chrono::milliseconds timeout) {
    auto client = std::make_unique<httplib::Client>(base_url);
    client->set_url_encode(false);
    client->set_connection_timeout(timeout);
    client->set_read_timeout(timeout);
    client->set_write_timeout(timeout);
    return client;
}

std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorKind::validation, "not an http URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

nlohmann::json parse_json_body(const httplib::Request& req) {
    auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::validation, "request body is not JSON");
    return j;
}

void reply_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
    reply_json(res, status, {{"error", code}, {"message", message}});
}

std::string bearer_token(const httplib::Request& req) {
    auto h = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (h.size() > prefix.size() && std::string_view(h).substr(0, prefix.size()) == prefix)
        return h.substr(prefix.size());
    return {};
}

} // namespace dsac
