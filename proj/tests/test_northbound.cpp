#include "denis/json_io.hpp"
#include "denis/northbound.hpp"

#include <doctest.h>
#include <httplib.h>

#include <chrono>
#include <cmath>
#include <thread>

using namespace denis;
using nlohmann::json;

namespace {

struct Served {
  NorthboundServer server;
  int port;
  httplib::Client client;

  template <typename... A>
  explicit Served(A&... target) : server(target...), port(server.bind("127.0.0.1", 0)), client("127.0.0.1", port) {
    server.start();
  }
};

json body(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

}  // namespace

TEST_CASE("northbound: plan, density, codet") {
  ScenarioConfig sc;
  sc.density = DensityLevel::dense;
  sc.mode = SliceMode::physical;
  const auto d = build_arena(sc.density, sc.mode);
  Controller controller(d.nodes, kDefaultRadioRange, d.plan);
  Served s(controller);

  const auto topo = body(s.client.Get("/topology"));
  CHECK(topo.at("nodes").size() == 99);
  CHECK(topo.at("edges").size() == controller.graph().edge_count());

  const auto plan = body(s.client.Get("/plan"));
  CHECK(plan.at("mode") == "physical");
  CHECK(plan_from_json(plan) == *controller.plan());

  SUBCASE("17 physical slices -> slice-capacity") {
    json big = {{"mode", "physical"}, {"default_slice", "s0"}, {"slices", json::array()}};
    for (int i = 0; i < 17; ++i) big["slices"].push_back({{"id", "s" + std::to_string(i)}, {"border_router", 1 + i}});
    const auto r = s.client.Put("/plan", big.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status >= 400);
    CHECK(r->status < 500);
    CHECK(json::parse(r->body).at("reason") == "slice-capacity");
    CHECK(body(s.client.Get("/plan")) == plan);
  }
  SUBCASE("malformed and conflicting plans") {
    auto r = s.client.Put("/plan", "{not json", "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);
    CHECK(json::parse(r->body).at("reason") == "validation");
    auto conflict = plan;
    conflict["slices"][0]["channel"] = 26;
    r = s.client.Put("/plan", conflict.dump(), "application/json");
    REQUIRE(r);
    CHECK(json::parse(r->body).at("reason") == "channel-conflict");
    CHECK(r->status == 422);
  }
  SUBCASE("delta round trip") {
    const json delta = {{"moves", {{{"node", 42}, {"to_slice", "A"}}}}};
    const auto r = s.client.Post("/plan/delta", delta.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    const auto out = json::parse(r->body);
    CHECK(out.at("epoch") == 1);
    const auto after = plan_from_json(body(s.client.Get("/plan")));
    CHECK(after.find("A")->members.count(42));
    CHECK_FALSE(after.find("B")->members.count(42));
    const auto bad = s.client.Post("/plan/delta", json{{"moves", {{{"node", 99}, {"to_slice", "A"}}}}}.dump(),
                                   "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 422);
    CHECK(plan_from_json(body(s.client.Get("/plan"))) == after);
  }
  SUBCASE("codet") {
    const auto r = s.client.Post("/codet/run?slice=B");
    REQUIRE(r);
    CHECK(r->status == 200);
    const auto reports = json::parse(r->body);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].at("slice") == "B");
    CHECK(reports[0].at("disconnected").empty());
    CHECK(reports[0].at("fully_connected") == true);
    CHECK(body(s.client.Get("/codet/reports")).size() == 1);
    const auto missing = s.client.Post("/codet/run?slice=Z");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body).at("reason") == "lookup");
  }
  SUBCASE("no simulator attached") {
    const auto r = s.client.Get("/pdr");
    REQUIRE(r);
    CHECK(r->status == 404);
  }
  SUBCASE("unknown endpoint") {
    const auto r = s.client.Get("/nowhere");
    REQUIRE(r);
    CHECK(r->status == 404);
    CHECK(json::parse(r->body).contains("reason"));
  }
}

TEST_CASE("northbound: star graph density") {
  // Hub 0 with five leaves on a unit ring; leaves are 2 sin 36deg ~ 1.18 m
  // apart, so at range 1 only the spokes remain. Router 99 sits out of range.
  std::vector<NodeRecord> nodes{{0, {0, 0}}};
  for (NodeId i = 1; i <= 5; ++i) {
    const double a = 2 * 3.14159265358979 * (i - 1) / 5;
    nodes.push_back({i, {std::cos(a), std::sin(a)}});
  }
  nodes.push_back({99, {100, 100}, Role::border_router});
  Controller controller(nodes, 1.0, SlicePlan{SliceMode::non_sliced, {{"m", {}, std::nullopt, 99}}, "m"});
  REQUIRE(controller.graph().edge_count() == 5);
  Served s(controller);
  const auto d = body(s.client.Get("/density"));
  CHECK(d.size() == 6);
  CHECK(d.at("0").at("tier") == "red");
  CHECK(d.at("0").at("percentile") == 1.0);
  for (int leaf = 1; leaf <= 5; ++leaf) CHECK(d.at(std::to_string(leaf)).at("tier") == "green");
  CHECK_FALSE(d.contains("99"));

  // every sensor is cut off from the router
  const auto reports = body(s.client.Post("/codet/run"));
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].at("disconnected").size() == 6);
}

TEST_CASE("northbound: simulator control") {
  ScenarioConfig sc;
  sc.density = DensityLevel::dense;
  sc.mode = SliceMode::physical;
  sc.duration = 120;
  SimSession session(sc);
  Served s(session);

  auto status = body(s.client.Get("/sim/status"));
  CHECK(status.at("state") == "paused");
  CHECK(status.at("now") == 0.0);

  auto r = s.client.Post("/sim/step?events=500");
  REQUIRE(r);
  status = json::parse(r->body);
  CHECK(status.at("stepped") == 500);
  CHECK(status.at("events") == 500);
  CHECK(body(s.client.Post("/sim/step?events=x")).at("reason") == "validation");

  const auto pdr = body(s.client.Get("/pdr"));
  CHECK(pdr.at("sent").get<int>() > 0);
  CHECK(pdr.contains("per_slice"));
  CHECK(pdr.at("drops").contains("collision"));

  // a retune through the API reaches the running simulator
  const json delta = {{"retunes", {{{"slice", "B"}, {"channel", 20}}}}};
  r = s.client.Post("/plan/delta", delta.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(json::parse(r->body).at("retunes").size() == 77);

  body(s.client.Post("/sim/start?speed=0"));
  for (int i = 0; i < 200 && body(s.client.Get("/sim/status")).at("state") != "finished"; ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  status = body(s.client.Get("/sim/status"));
  CHECK(status.at("state") == "finished");
  CHECK(status.at("now") == 120.0);
  const auto final_pdr = body(s.client.Get("/pdr"));
  CHECK(final_pdr.at("sent") == 97 * 12);
  CHECK(final_pdr.at("pdr").get<double>() > 0.9);
  CHECK(body(s.client.Post("/sim/pause")).at("state") == "finished");
}

TEST_CASE("http status mapping") {
  CHECK(http_status(Errc::slice_capacity) == 422);
  CHECK(http_status(Errc::config) == 400);
  CHECK(http_status(Errc::lookup) == 404);
  CHECK(http_status(Errc::route_unavailable) == 409);
  CHECK(http_status(Errc::consistency) == 500);
}
