#pragma once

/*! \file
 * \brief Capability policy model: resource URLs, the coverage relation and
 * the access control decision.
 *
 * Everything here is pure. The only external input is a type oracle, which
 * the PDP backs with broker lookups (the PIP).
 */

#include "dsac/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <concepts>
#include <functional>
#include <map>
#include <optional>
#include <ranges>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dsac {

enum class Operation { Read, Write, Subscribe };

constexpr std::string_view to_string(Operation op) {
    switch (op) {
        case Operation::Read:      return "Read";
        case Operation::Write:     return "Write";
        case Operation::Subscribe: return "Subscribe";
    }
    return "";
}

inline std::optional<Operation> parse_operation(std::string_view s) {
    if (s == "Read") return Operation::Read;
    if (s == "Write") return Operation::Write;
    if (s == "Subscribe") return Operation::Subscribe;
    return std::nullopt;
}

enum class ResourceKind { Type, Object, Attribute };

constexpr std::string_view to_string(ResourceKind k) {
    switch (k) {
        case ResourceKind::Type:      return "type";
        case ResourceKind::Object:    return "object";
        case ResourceKind::Attribute: return "attribute";
    }
    return "";
}

inline std::optional<ResourceKind> parse_resource_kind(std::string_view s) {
    if (s == "type") return ResourceKind::Type;
    if (s == "object") return ResourceKind::Object;
    if (s == "attribute") return ResourceKind::Attribute;
    return std::nullopt;
}

namespace detail {

// scheme ":" rest, per RFC 3986 scheme grammar; no whitespace or control bytes.
inline bool is_absolute_url(std::string_view s) {
    auto colon = s.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == s.size()) return false;
    auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
    if (!alpha(s[0])) return false;
    for (std::size_t i = 1; i < colon; ++i) {
        char c = s[i];
        if (!(alpha(c) || (c >= '0' && c <= '9') || c == '+' || c == '-' || c == '.')) return false;
    }
    return std::ranges::none_of(s, [](char c) {
        auto u = static_cast<unsigned char>(c);
        return u <= 0x20 || u == 0x7f;
    });
}

inline std::string normalize_url(std::string_view s) {
    if (s.size() > 1 && s.back() == '/') s.remove_suffix(1);
    return std::string(s);
}

} // namespace detail

/// A typed resource identifier. The kind is always explicit; it is never
/// guessed from the shape of the string.
class ResourceUrl {
public:
    static ResourceUrl type(std::string_view url) { return {ResourceKind::Type, url}; }
    static ResourceUrl object(std::string_view url) { return {ResourceKind::Object, url}; }

    /// Attribute URL from its full value; the parent is everything before the last '/'.
    static ResourceUrl attribute(std::string_view url) { return {ResourceKind::Attribute, url}; }

    static ResourceUrl attribute(std::string_view object_url, std::string_view name) {
        auto parent = detail::normalize_url(object_url);
        validate_attribute_name(name);
        return {ResourceKind::Attribute, parent + "/" + std::string(name)};
    }

    ResourceUrl(ResourceKind kind, std::string_view url)
        : kind_(kind), value_(detail::normalize_url(url)) {
        if (!detail::is_absolute_url(value_))
            throw Error(ErrorKind::validation, "not an absolute URL: " + value_);
        if (kind_ == ResourceKind::Attribute) {
            auto slash = value_.rfind('/');
            if (slash == std::string::npos || slash + 1 == value_.size())
                throw Error(ErrorKind::validation, "attribute URL has no attribute segment: " + value_);
            if (!detail::is_absolute_url(std::string_view(value_).substr(0, slash)))
                throw Error(ErrorKind::validation, "attribute URL parent is not a valid object URL: " + value_);
        }
    }

    [[nodiscard]] ResourceKind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::string& value() const noexcept { return value_; }

    /// Parent object URL of an attribute URL; nullopt for the other kinds.
    [[nodiscard]] std::optional<std::string> parent_object() const {
        if (kind_ != ResourceKind::Attribute) return std::nullopt;
        return value_.substr(0, value_.rfind('/'));
    }

    [[nodiscard]] std::optional<std::string> attribute_name() const {
        if (kind_ != ResourceKind::Attribute) return std::nullopt;
        return value_.substr(value_.rfind('/') + 1);
    }

    static void validate_attribute_name(std::string_view name) {
        if (name.empty() || name.find('/') != std::string_view::npos)
            throw Error(ErrorKind::validation, "invalid attribute name: " + std::string(name));
    }

    friend bool operator==(const ResourceUrl&, const ResourceUrl&) = default;
    friend auto operator<=>(const ResourceUrl&, const ResourceUrl&) = default;

private:
    ResourceKind kind_;
    std::string value_;
};

/// [consumer, operation, resource]
struct Policy {
    std::string consumer_id;
    Operation operation;
    ResourceUrl resource;

    friend bool operator==(const Policy&, const Policy&) = default;
};

/// Answers "what is the type of this object?" with a type URL, or nullopt
/// when it cannot tell.
template <class F>
concept TypeOracle = requires(const F& f, const std::string& object_url) {
    { f(object_url) } -> std::convertible_to<std::optional<std::string>>;
};

/// Oracle that never knows anything; reduces coverage to exact matches
/// and object-to-attribute.
struct NoTypeInfo {
    std::optional<std::string> operator()(const std::string&) const { return std::nullopt; }
};

/// Oracle over a fixed object -> type table.
struct MapTypeOracle {
    std::map<std::string, std::string> types;

    std::optional<std::string> operator()(const std::string& object_url) const {
        auto it = types.find(detail::normalize_url(object_url));
        if (it == types.end()) return std::nullopt;
        return it->second;
    }
};

/// Whether a grant on \p a extends to \p b. Unknown type information never covers.
template <TypeOracle Oracle>
bool covers(const ResourceUrl& a, const ResourceUrl& b, const Oracle& oracle) {
    if (a == b) return true;
    switch (a.kind()) {
        case ResourceKind::Type: {
            std::optional<std::string> object;
            if (b.kind() == ResourceKind::Object) object = b.value();
            else if (b.kind() == ResourceKind::Attribute) object = b.parent_object();
            if (!object) return false;
            std::optional<std::string> t = oracle(*object);
            return t && detail::normalize_url(*t) == a.value();
        }
        case ResourceKind::Object:
            return b.kind() == ResourceKind::Attribute && *b.parent_object() == a.value();
        case ResourceKind::Attribute:
            return false;
    }
    return false;
}

namespace detail {

// Keeps oracle answers stable for the span of one decision.
template <TypeOracle Oracle>
class MemoOracle {
public:
    explicit MemoOracle(const Oracle& inner) : inner_(inner) {}

    std::optional<std::string> operator()(const std::string& object_url) const {
        auto it = memo_.find(object_url);
        if (it != memo_.end()) return it->second;
        std::optional<std::string> answer = inner_(object_url);
        memo_.emplace(object_url, answer);
        return answer;
    }

private:
    const Oracle& inner_;
    mutable std::map<std::string, std::optional<std::string>> memo_;
};

} // namespace detail

/// True iff some policy names this consumer and operation and covers the resource.
template <std::ranges::input_range Policies, TypeOracle Oracle>
    requires std::convertible_to<std::ranges::range_reference_t<Policies>, const Policy&>
bool decide(const Policies& policies, std::string_view consumer_id, Operation operation,
            const ResourceUrl& resource, const Oracle& oracle) {
    detail::MemoOracle<Oracle> memo(oracle);
    for (const Policy& p : policies) {
        if (p.consumer_id == consumer_id && p.operation == operation && covers(p.resource, resource, memo))
            return true;
    }
    return false;
}

/// All targets must be granted; an empty target list is never granted.
template <std::ranges::input_range Policies, TypeOracle Oracle>
bool decide_all(const Policies& policies, std::string_view consumer_id, Operation operation,
                const std::vector<ResourceUrl>& targets, const Oracle& oracle) {
    if (targets.empty()) return false;
    detail::MemoOracle<Oracle> memo(oracle);
    return std::ranges::all_of(targets, [&](const ResourceUrl& t) {
        return decide(policies, consumer_id, operation, t, memo);
    });
}

// JSON

inline void to_json(nlohmann::json& j, Operation op) { j = std::string(to_string(op)); }

inline void from_json(const nlohmann::json& j, Operation& op) {
    if (!j.is_string()) throw Error(ErrorKind::validation, "operation must be a string");
    auto parsed = parse_operation(j.get<std::string>());
    if (!parsed) throw Error(ErrorKind::validation, "unknown operation: " + j.get<std::string>());
    op = *parsed;
}

inline nlohmann::json resource_to_json(const ResourceUrl& r) {
    return {{"kind", to_string(r.kind())}, {"url", r.value()}};
}

inline ResourceUrl resource_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.contains("url") || !j["kind"].is_string() ||
        !j["url"].is_string())
        throw Error(ErrorKind::validation, "resource must be {kind, url}");
    auto kind = parse_resource_kind(j["kind"].get<std::string>());
    if (!kind) throw Error(ErrorKind::validation, "unknown resource kind: " + j["kind"].get<std::string>());
    return {*kind, j["url"].get<std::string>()};
}

inline nlohmann::json policy_to_json(const Policy& p) {
    return {{"consumer_id", p.consumer_id},
            {"operation", to_string(p.operation)},
            {"resource", resource_to_json(p.resource)}};
}

inline Policy policy_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("consumer_id") || !j["consumer_id"].is_string() ||
        !j.contains("operation") || !j.contains("resource"))
        throw Error(ErrorKind::validation, "policy must be {consumer_id, operation, resource}");
    Policy p{j["consumer_id"].get<std::string>(), j["operation"].get<Operation>(),
             resource_from_json(j["resource"])};
    if (p.consumer_id.empty()) throw Error(ErrorKind::validation, "policy consumer_id is empty");
    return p;
}

inline nlohmann::json policies_to_json(const std::vector<Policy>& ps) {
    auto arr = nlohmann::json::array();
    for (const auto& p : ps) arr.push_back(policy_to_json(p));
    return arr;
}

inline std::vector<Policy> policies_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw Error(ErrorKind::validation, "policy set must be a JSON array");
    std::vector<Policy> out;
    out.reserve(j.size());
    for (const auto& e : j) out.push_back(policy_from_json(e));
    return out;
}

} // namespace dsac
