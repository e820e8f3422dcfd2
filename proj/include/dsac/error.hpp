#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dsac {

enum class ErrorKind {
    validation,
    conflict,
    not_found,
    auth,
    out_of_range,
    corrupt,
    key_mismatch,
    list_full,
    unavailable,
};

constexpr std::string_view to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::validation:   return "validation";
        case ErrorKind::conflict:     return "conflict";
        case ErrorKind::not_found:    return "not_found";
        case ErrorKind::auth:         return "auth";
        case ErrorKind::out_of_range: return "out_of_range";
        case ErrorKind::corrupt:      return "corrupt";
        case ErrorKind::key_mismatch: return "key_mismatch";
        case ErrorKind::list_full:    return "list_full";
        case ErrorKind::unavailable:  return "unavailable";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// HTTP status used by every service when an Error escapes a handler.
constexpr int http_status(ErrorKind k) {
    switch (k) {
        case ErrorKind::validation:   return 400;
        case ErrorKind::conflict:     return 409;
        case ErrorKind::not_found:    return 404;
        case ErrorKind::auth:         return 401;
        case ErrorKind::out_of_range: return 400;
        case ErrorKind::corrupt:      return 400;
        case ErrorKind::key_mismatch: return 400;
        case ErrorKind::list_full:    return 503;
        case ErrorKind::unavailable:  return 503;
    }
    return 500;
}

} // namespace dsac
