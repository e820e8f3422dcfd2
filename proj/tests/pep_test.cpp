#include "deployment.hpp"

#include <gtest/gtest.h>

using namespace dsac;
using namespace dsac::testing;

namespace {

const std::string L1 = "urn:ngsi-ld:SmartLamp:1";
const std::string L2 = "urn:ngsi-ld:SmartLamp:2";
const std::string S1 = "urn:ngsi-ld:Sensor:1";
const std::string kPrefix = "/ngsi-ld/v1";

RequestView view(std::string method, std::string path, std::multimap<std::string, std::string> params = {},
                 std::string body = {}) {
    return {std::move(method), kPrefix + path, std::move(params), std::move(body)};
}

std::string entity_path(const std::string& id) { return kPrefix + "/entities/" + url_encode(id); }

std::size_t forwarded(const Deployment& d) { return d.broker_server->access_log().size(); }

std::string subscription_body(const std::string& key, const std::string& value, const std::string& endpoint) {
    return nlohmann::json{{"type", "Subscription"},
                          {"entities", {{{key, value}}}},
                          {"notification", {{"endpoint", {{"uri", endpoint}}}}}}
        .dump();
}

} // namespace

// ------------------------------------------------------------- classify

TEST(Classify, MappingTable) {
    auto c = classify(view("GET", "/entities", {{"type", kLampType}}));
    EXPECT_EQ(c.operation, Operation::Read);
    EXPECT_EQ(c.targets, std::vector{ResourceUrl::type(kLampType)});

    c = classify(view("GET", "/entities/" + L1));
    EXPECT_EQ(c.targets, std::vector{ResourceUrl::object(L1)});

    c = classify(view("GET", "/entities/" + L1, {{"attrs", "status,power"}}));
    EXPECT_EQ(c.targets, (std::vector{ResourceUrl::attribute(L1, "status"), ResourceUrl::attribute(L1, "power")}));

    c = classify(view("PATCH", "/entities/" + L1 + "/attrs/status"));
    EXPECT_EQ(c.operation, Operation::Write);
    EXPECT_EQ(c.targets, std::vector{ResourceUrl::attribute(L1, "status")});

    c = classify(view("POST", "/entities", {}, nlohmann::json{{"id", L1}, {"type", kLampType}}.dump()));
    EXPECT_EQ(c.operation, Operation::Write);
    EXPECT_EQ(c.targets, std::vector{ResourceUrl::type(kLampType)});

    c = classify(view("DELETE", "/entities/" + L1));
    EXPECT_EQ(c.targets, std::vector{ResourceUrl::object(L1)});

    c = classify(view("POST", "/subscriptions", {}, subscription_body("type", kLampType, "http://x/n")));
    EXPECT_EQ(c.operation, Operation::Subscribe);
    EXPECT_EQ(c.targets, std::vector{ResourceUrl::type(kLampType)});

    c = classify(view("POST", "/subscriptions", {}, subscription_body("id", L1, "http://x/n")));
    EXPECT_EQ(c.targets, std::vector{ResourceUrl::object(L1)});

    c = classify(view("DELETE", "/subscriptions/sub-1"),
                 [](const std::string& id) -> std::optional<ResourceUrl> {
                     if (id == "sub-1") return ResourceUrl::object(L1);
                     return std::nullopt;
                 });
    EXPECT_EQ(c.operation, Operation::Subscribe);
    EXPECT_EQ(c.subscription_id, "sub-1");
    EXPECT_EQ(c.targets, std::vector{ResourceUrl::object(L1)});
}

TEST(Classify, RejectsEverythingElse) {
    EXPECT_THROW(classify(view("GET", "/entities")), Error);                               // no type
    EXPECT_THROW(classify(view("PUT", "/entities/" + L1)), Error);                         // unmapped verb
    EXPECT_THROW(classify(view("GET", "/types")), Error);                                  // unmapped path
    EXPECT_THROW(classify({"GET", "/admin", {}, {}}), Error);                              // outside the API
    EXPECT_THROW(classify(view("POST", "/entities", {}, "not json")), Error);              // bad body
    EXPECT_THROW(classify(view("POST", "/entities", {}, R"({"id":"urn:x:1"})")), Error);   // no type
    EXPECT_THROW(classify(view("GET", "/entities/" + L1, {{"attrs", ","}})), Error);       // empty attrs
    EXPECT_THROW(classify(view("DELETE", "/subscriptions/unknown")), Error);               // not tracked
    EXPECT_THROW(classify(view("POST", "/subscriptions", {}, R"({"entities":[]})")), Error);
}

// ------------------------------------------------------------ through HTTP

TEST(PepIntegration, ChallengeWithoutProofAndNothingForwarded) {
    Deployment d;
    d.add_entity(L1, kLampType, {{"status", "on"}});
    auto r = http_call(d.pep_url, "GET", entity_path(L1));
    EXPECT_EQ(r.status, 401);
    EXPECT_FALSE(r.json().value("nonce", "").empty());
    EXPECT_EQ(r.json()["audience"], d.pep_url);
    EXPECT_EQ(http_call(d.pep_url, "GET", "/ngsi-ld/v1/types").status, 400);
    EXPECT_EQ(forwarded(d), 0u);
}

TEST(PepIntegration, CentralizedReadWriteAndDeny) {
    Deployment d;
    d.add_entity(L1, kLampType, {{"status", "off"}});
    d.add_entity(S1, kSensorType, {{"value", 3}});
    d.grant("alice", Operation::Read, ResourceUrl::type(kLampType));
    d.grant("alice", Operation::Write, ResourceUrl::attribute(L1, "status"));
    auto alice = d.enrolled("alice", 5, false);

    auto r = alice.request("GET", entity_path(L1) + "?attrs=status");
    ASSERT_EQ(r.status, 200) << r.body;
    EXPECT_EQ(r.json()["status"], "off");
    EXPECT_EQ(alice.request("PATCH", entity_path(L1) + "/attrs/status", R"({"value":"on"})").status, 204);
    EXPECT_EQ(d.broker->get_entity(L1).attributes["status"], "on");

    auto denied = alice.request("GET", entity_path(S1));
    EXPECT_EQ(denied.status, 403);
    EXPECT_EQ(denied.json()["reason"], "not_authorized");
    denied = alice.request("PATCH", entity_path(L1) + "/attrs/power", R"({"value":1})");
    EXPECT_EQ(denied.status, 403);
    for (const auto& e : d.broker_server->access_log().entries())
        EXPECT_FALSE(e.method == "PATCH" && e.path.ends_with("/attrs/power"));
}

TEST(PepIntegration, DistributedFlowWithNonceDance) {
    Deployment d;
    d.add_entity(L1, kLampType, {{"status", "off"}});
    d.grant("alice", Operation::Read, ResourceUrl::object(L1));
    auto alice = d.enrolled("alice", 5, true);
    auto r = alice.request("GET", entity_path(L1));
    ASSERT_EQ(r.status, 200) << r.body;
    EXPECT_EQ(r.json()["id"], L1);

    // The same presentation twice: the nonce is gone.
    auto nonce = alice.obtain_nonce("GET", entity_path(L1));
    auto vp = alice.present(nonce, d.pep_url, system_now());
    EXPECT_EQ(alice.send("GET", entity_path(L1), {}, {{kPresentationHeader, vp.encode()}}).status, 200);
    auto again = alice.send("GET", entity_path(L1), {}, {{kPresentationHeader, vp.encode()}});
    EXPECT_EQ(again.status, 403);
    EXPECT_EQ(again.json()["reason"], "wrong_nonce");

    auto garbage = alice.send("GET", entity_path(L1), {}, {{kPresentationHeader, "{not json"}});
    EXPECT_EQ(garbage.status, 403);
}

TEST(PepIntegration, RevokedCredentialIsDeniedAfterRefresh) {
    Deployment d;
    d.add_entity(L1, kLampType);
    d.grant("alice", Operation::Read, ResourceUrl::object(L1));
    auto alice = d.enrolled("alice", 5, true);
    ASSERT_EQ(alice.request("GET", entity_path(L1)).status, 200);
    d.paps[0]->revoke_vc(kOwnerKey, RevokeConsumer{"alice"});
    d.pdp->refresh_status_lists(system_now());
    auto r = alice.request("GET", entity_path(L1));
    EXPECT_EQ(r.status, 403);
    EXPECT_EQ(r.json()["reason"], "revoked");
}

TEST(PepIntegration, SubscribeNotifyUnsubscribe) {
    Deployment d;
    WebhookReceiver hook;
    d.add_entity(L1, kLampType, {{"status", "off"}});
    d.grant("alice", Operation::Subscribe, ResourceUrl::type(kLampType));
    d.grant("bob", Operation::Subscribe, ResourceUrl::type(kLampType));
    auto alice = d.enrolled("alice", 5, true);
    auto bob = d.enrolled("bob", 6, true);

    auto created = alice.request("POST", kPrefix + "/subscriptions", subscription_body("type", kLampType, hook.endpoint()));
    ASSERT_EQ(created.status, 201) << created.body;
    auto id = created.json()["id"].get<std::string>();
    EXPECT_TRUE(d.pdp->subscription(id));

    d.broker->update_attribute(L1, "status", "on");
    d.broker->flush_notifications();
    EXPECT_TRUE(wait_until([&] { return hook.count() == 1; }, std::chrono::seconds(2)));

    auto stolen = bob.request("DELETE", kPrefix + "/subscriptions/" + id);
    EXPECT_EQ(stolen.status, 403);
    EXPECT_EQ(stolen.json()["reason"], "not_subscription_owner");

    EXPECT_EQ(alice.request("DELETE", kPrefix + "/subscriptions/" + id).status, 204);
    EXPECT_FALSE(d.pdp->subscription(id));
    EXPECT_EQ(d.broker->subscription_count(), 0u);
}

TEST(PepIntegration, PdpDownFailsClosed) {
    Deployment d;
    d.add_entity(L1, kLampType);
    d.grant("alice", Operation::Read, ResourceUrl::object(L1));
    auto alice = d.enrolled("alice", 5, false);
    d.pdp_server->stop();
    auto before = forwarded(d);
    EXPECT_EQ(alice.request("GET", entity_path(L1)).status, 503);
    EXPECT_EQ(forwarded(d), before);
}

TEST(PepIntegration, OnlyHopByHopHeadersDiffer) {
    Deployment d;
    d.add_entity(L1, kLampType, {{"status", "on"}});
    d.grant("alice", Operation::Read, ResourceUrl::object(L1));
    auto alice = d.enrolled("alice", 5, false);
    auto via = alice.request("GET", entity_path(L1));
    auto direct = http_call(d.broker_url(), "GET", entity_path(L1));
    EXPECT_EQ(via.status, direct.status);
    EXPECT_EQ(via.body, direct.body);
    EXPECT_EQ(via.header("Content-Type"), direct.header("Content-Type"));
}
