#include "denis/controller.hpp"
#include "denis/error.hpp"
#include "denis/scenario.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <thread>

using namespace denis;

namespace {

std::vector<NodeId> ids_of(const ConnectivityGraph& g) { return g.nodes(); }

// Every installed rule's next hop stays inside the rule's slice.
std::size_t confinement_violations(const ControllerSnapshot& s) {
  std::size_t bad = 0;
  for (const auto& [node, rules] : s.flows)
    for (const auto& r : rules) {
      const auto* slice = s.plan.find(r.slice_id);
      if (!slice || !slice->members.count(r.action_next_hop) || !slice->members.count(node)) ++bad;
    }
  return bad;
}

}  // namespace

TEST_CASE("routes on a linear slice") {
  // 21-node line with the router at one end
  std::vector<NodeRecord> nodes = build_linear(21, 1.0, {1, 0}, Axis::x, 1, "corridor");
  nodes.push_back({100, {0, 0}, Role::border_router, ""});
  const auto g = derive_connectivity(nodes, 1.0);
  SlicePlan plan = normalize_plan({SliceMode::logical, {{"A", {}, std::nullopt, 100}}, "A"}, {[&] {
                                    std::set<NodeId> s;
                                    for (const auto& n : nodes) s.insert(n.id);
                                    return s;
                                  }()});
  const auto parts = partition(g, plan);
  const auto far = compute_route(plan, parts, 21);
  CHECK(far.hop_count() == 21);
  CHECK(far.hops.front() == 21);
  CHECK(far.hops.back() == 100);
  const auto near = compute_route(plan, parts, 1);
  CHECK(near.hop_count() == 1);

  SUBCASE("a 20-hop route through the chain") {
    // source at the far end of a 21-node slice whose router is its first node's position
    std::vector<NodeRecord> line = build_linear(20, 1.0, {1, 0}, Axis::x, 1);
    line.push_back({50, {0, 0}, Role::border_router, ""});
    const auto lg = derive_connectivity(line, 1.0);
    std::set<NodeId> all;
    for (const auto& n : line) all.insert(n.id);
    const auto lp = normalize_plan({SliceMode::logical, {{"A", {}, std::nullopt, 50}}, "A"}, all);
    CHECK(compute_route(lp, partition(lg, lp), 20).hop_count() == 20);
  }
}

TEST_CASE("tie-break picks the lowest next hop") {
  // 1 reaches the router 9 through 3 or 2; both two hops.
  ConnectivityGraph g;
  g.add_edge(1, 3);
  g.add_edge(1, 2);
  g.add_edge(3, 9);
  g.add_edge(2, 9);
  const auto plan = normalize_plan({SliceMode::non_sliced, {{"m", {}, std::nullopt, 9}}, "m"}, {1, 2, 3, 9});
  const auto route = compute_route(plan, partition(g, plan), 1);
  CHECK(route.hops == std::vector<NodeId>{1, 2, 9});
}

TEST_CASE("route-unavailable carries the disconnected set") {
  ConnectivityGraph g;
  g.add_edge(1, 9);
  g.add_edge(2, 3);
  const auto plan = normalize_plan({SliceMode::non_sliced, {{"m", {}, std::nullopt, 9}}, "m"}, {1, 2, 3, 9});
  try {
    compute_route(plan, partition(g, plan), 2);
    FAIL("route found");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::route_unavailable);
    CHECK(std::string(e.what()).find("2,3") != std::string::npos);
  }
}

TEST_CASE("route hop counts equal a relaxation oracle on the arena") {
  for (auto mode : {SliceMode::non_sliced, SliceMode::logical, SliceMode::physical})
    for (const auto& p : density_presets())
      for (double range : {kDefaultRadioRange, kCalibratedRadioRange}) {
        const auto d = build_arena(p.level, mode);
        Controller c(d.nodes, range, d.plan);
        const auto snap = c.snapshot();
        for (const auto& s : snap->plan.slices) {
          const auto& g = snap->slice_graphs.at(s.id);
          const auto dist = oracle::relaxed_distances(ids_of(g), oracle::edge_set(g), s.border_router);
          for (auto n : s.members) {
            if (n == s.border_router) continue;
            auto it = snap->routes.find(n);
            if (!dist.count(n)) {
              CHECK(it == snap->routes.end());
              continue;
            }
            REQUIRE(it != snap->routes.end());
            CHECK(it->second.hop_count() == dist.at(n));
          }
        }
        CHECK(confinement_violations(*snap) == 0);
      }
}

TEST_CASE("install_flows") {
  ConnectivityGraph g;
  g.add_edge(1, 2);
  g.add_edge(2, 3);
  g.add_edge(3, 9);
  g.add_edge(4, 2);
  const Route r1{1, 9, {1, 2, 3, 9}, "m"};
  const Route r4{4, 9, {4, 2, 3, 9}, "m"};
  SUBCASE("one 3-hop route -> 3 rules") {
    const auto t = install_flows(g, std::vector<Route>{r1});
    std::size_t rules = 0;
    for (const auto& [n, list] : t) rules += list.size();
    CHECK(rules == 3);
    CHECK(find_rule(t, 2, 9)->action_next_hop == 3);
    CHECK(find_rule(t, 9, 9) == nullptr);
  }
  SUBCASE("shared prefix holds one rule per relay") {
    const auto t = install_flows(g, std::vector<Route>{r1, r4});
    CHECK(t.at(2).size() == 1);
    CHECK(t.at(3).size() == 1);
  }
  SUBCASE("later routes overwrite") {
    g.add_edge(2, 9);
    const Route shortcut{2, 9, {2, 9}, "m"};
    const auto t = install_flows(g, std::vector<Route>{r1, shortcut});
    CHECK(find_rule(t, 2, 9)->action_next_hop == 9);
  }
  SUBCASE("non-neighbor hop") {
    const Route bad{1, 9, {1, 3, 9}, "m"};
    try {
      install_flows(g, std::vector<Route>{bad});
      FAIL("installed");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::consistency);
    }
  }
}

TEST_CASE("proactive installation covers every sensor of the arena") {
  for (auto mode : {SliceMode::non_sliced, SliceMode::logical, SliceMode::physical}) {
    const auto d = build_arena(DensityLevel::medium, mode);
    Controller c(d.nodes, kDefaultRadioRange, d.plan);
    const auto snap = c.snapshot();
    std::size_t sensors = 0;
    for (const auto& n : d.nodes)
      if (!n.is_border_router()) {
        ++sensors;
        CHECK(snap->flows.count(n.id));
        CHECK_FALSE(snap->flows.at(n.id).empty());
      }
    CHECK(sensors == kArenaSensors);
  }
}

TEST_CASE("flow tables are deterministic") {
  const auto d = build_arena(DensityLevel::high, SliceMode::logical);
  Controller a(d.nodes, kDefaultRadioRange, d.plan);
  Controller b(d.nodes, kDefaultRadioRange, d.plan);
  CHECK(a.snapshot()->flows == b.snapshot()->flows);
  CHECK(a.snapshot()->routes == b.snapshot()->routes);
}

TEST_CASE("reconfiguration") {
  SUBCASE("moving a leaf only reroutes that leaf") {
    // Router A=10 serves 1-2-3, router B=20 serves 4-5; node 3 hears both 2 and 4.
    ConnectivityGraph g;
    std::vector<NodeRecord> nodes{{1, {0, 0}}, {2, {1, 0}}, {3, {2, 0}}, {4, {3, 0}}, {5, {4, 0}},
                                  {10, {-1, 0}, Role::border_router}, {20, {5, 0}, Role::border_router}};
    SlicePlan plan{SliceMode::logical, {{"A", {1, 2, 3}, std::nullopt, 10}, {"B", {4, 5}, std::nullopt, 20}}, "A"};
    Controller c(nodes, 1.0, plan);
    const auto before = c.snapshot();
    CHECK(before->routes.at(3).hop_count() == 3);
    const auto out = c.apply_delta({{{3, "B"}}, {}});
    CHECK(out.rerouted == std::vector<NodeId>{3});
    CHECK(c.snapshot()->routes.at(3).hops == std::vector<NodeId>{3, 4, 5, 20});
    CHECK(c.snapshot()->routes.at(1) == before->routes.at(1));
    CHECK(c.snapshot()->routes.at(2) == before->routes.at(2));
    CHECK(out.retunes.empty());
    // no rule references an ex-member
    for (const auto& [node, rules] : c.snapshot()->flows)
      for (const auto& r : rules) {
        const auto* s = c.snapshot()->plan.find(r.slice_id);
        CHECK(s->members.count(node));
        CHECK(s->members.count(r.action_next_hop));
      }
  }
  SUBCASE("moving a cut vertex strands the nodes CODET reports") {
    std::vector<NodeRecord> nodes{{1, {0, 0}}, {2, {1, 0}}, {3, {2, 0}}, {4, {3, 0}},
                                  {10, {-1, 0}, Role::border_router}, {20, {10, 10}, Role::border_router}};
    SlicePlan plan{SliceMode::logical, {{"A", {1, 2, 3, 4}, std::nullopt, 10}, {"B", {}, std::nullopt, 20}}, "A"};
    Controller c(nodes, 1.0, plan);
    const auto out = c.apply_delta({{{2, "B"}}, {}});
    const auto snap = c.snapshot();
    const auto report = detect(snap->slice_graphs.at("A"), 10);
    CHECK(out.unreachable.at("A") == report.disconnected);
    CHECK(report.disconnected == std::vector<NodeId>{3, 4});
    CHECK_FALSE(snap->routes.count(3));
    CHECK(c.resolve_next_hop(3, 10) == std::nullopt);
  }
  SUBCASE("retuning slice B moves every B member") {
    const auto d = build_arena(DensityLevel::dense, SliceMode::physical);
    Controller c(d.nodes, kDefaultRadioRange, d.plan);
    std::vector<RetuneDirective> directives;
    c.on_retune([&](std::span<const RetuneDirective> r) { directives.assign(r.begin(), r.end()); });
    c.apply_delta({{}, {{"B", 20}}});
    CHECK(directives.size() == c.plan()->find("B")->members.size());
    for (const auto& r : directives) {
      CHECK(r.channel == 20);
      CHECK(c.plan()->find("B")->members.count(r.node));
    }
  }
  SUBCASE("rejected changes keep the snapshot") {
    const auto d = build_arena(DensityLevel::dense, SliceMode::physical);
    Controller c(d.nodes, kDefaultRadioRange, d.plan);
    const auto before = c.snapshot();
    CHECK_THROWS_AS(c.apply_delta({{}, {{"B", 15}}}), Error);
    CHECK(c.snapshot() == before);
  }
}

TEST_CASE("snapshots stay consistent under concurrent mutation") {
  const auto d = build_arena(DensityLevel::extra, SliceMode::logical);
  Controller c(d.nodes, kDefaultRadioRange, d.plan);
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    while (!done) {
      const auto s = c.snapshot();
      if (confinement_violations(*s)) ++bad;
      for (const auto& [src, route] : s->routes)
        if (s->plan.slice_of(src)->border_router != route.destination) ++bad;
    }
  });
  std::vector<std::thread> writers;
  for (int t = 0; t < 3; ++t)
    writers.emplace_back([&, t] {
      for (int i = 0; i < 10; ++i) {
        const auto out = c.apply_delta({{{NodeId(30 + t), i % 2 ? "A" : "B"}}, {}});
        if (out.epoch == 0) ++bad;
      }
    });
  for (auto& w : writers) w.join();
  done = true;
  reader.join();
  CHECK(bad == 0);
  CHECK(c.snapshot()->epoch == 30);
}
