#pragma once

// Random policy instances and a brute-force reference for the decision rule.
// The reference does not use ResourceUrl's parsing: it knows each attribute's
// owner from the generator and checks the four coverage cases one by one.

#include "dsac/policy.hpp"

#include <map>
#include <random>
#include <string>
#include <vector>

namespace dsac::testing {

struct Instance {
    std::vector<std::string> consumers;
    std::vector<ResourceUrl> resources;  // every type, object and attribute in play
    std::map<std::string, std::string> object_type;  // untyped objects are absent
    std::map<std::string, std::string> attribute_owner;
    std::vector<Policy> policies;

    [[nodiscard]] MapTypeOracle oracle() const { return {object_type}; }
};

inline constexpr Operation kOps[] = {Operation::Read, Operation::Write, Operation::Subscribe};

/// At most 20 resources, 3 consumers, 3 operations, random typing.
inline Instance random_instance(std::mt19937_64& rng) {
    auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    Instance in;
    in.consumers = {"alice", "bob", "carol"};

    std::vector<std::string> types;
    const int n_types = uni(1, 4);
    for (int t = 0; t < n_types; ++t) {
        types.push_back("https://example.org/types/T" + std::to_string(t));
        in.resources.push_back(ResourceUrl::type(types.back()));
    }
    const int n_objects = uni(1, 6);
    for (int o = 0; o < n_objects && in.resources.size() < 20; ++o) {
        const std::string obj = "urn:ngsi-ld:Thing:" + std::to_string(o);
        in.resources.push_back(ResourceUrl::object(obj));
        if (uni(0, 9) > 0) in.object_type[obj] = types[uni(0, n_types - 1)];
        const int n_attrs = uni(0, 3);
        for (int a = 0; a < n_attrs && in.resources.size() < 20; ++a) {
            const std::string attr = obj + "/attr" + std::to_string(a);
            in.resources.push_back(ResourceUrl::attribute(attr));
            in.attribute_owner[attr] = obj;
        }
    }
    const int n_policies = uni(0, 12);
    for (int p = 0; p < n_policies; ++p) {
        in.policies.push_back({in.consumers[uni(0, 2)], kOps[uni(0, 2)],
                               in.resources[uni(0, static_cast<int>(in.resources.size()) - 1)]});
    }
    return in;
}

inline bool oracle_covers(const Instance& in, const ResourceUrl& granted, const ResourceUrl& asked) {
    const auto gk = granted.kind();
    const auto ak = asked.kind();
    const std::string& g = granted.value();
    const std::string& a = asked.value();
    auto type_of = [&](const std::string& obj) -> std::string {
        auto it = in.object_type.find(obj);
        return it == in.object_type.end() ? std::string{} : it->second;
    };
    auto owner_of = [&](const std::string& attr) -> std::string {
        auto it = in.attribute_owner.find(attr);
        return it == in.attribute_owner.end() ? std::string{} : it->second;
    };
    // 1. the same resource
    if (gk == ak && g == a) return true;
    // 2. a type covers its objects
    if (gk == ResourceKind::Type && ak == ResourceKind::Object) return type_of(a) == g;
    // 3. a type covers the attributes of its objects
    if (gk == ResourceKind::Type && ak == ResourceKind::Attribute) return type_of(owner_of(a)) == g;
    // 4. an object covers its attributes
    if (gk == ResourceKind::Object && ak == ResourceKind::Attribute) return owner_of(a) == g;
    return false;
}

inline bool oracle_decide(const Instance& in, const std::string& consumer, Operation op, const ResourceUrl& r) {
    for (const auto& p : in.policies)
        if (p.consumer_id == consumer && p.operation == op && oracle_covers(in, p.resource, r)) return true;
    return false;
}

} // namespace dsac::testing
