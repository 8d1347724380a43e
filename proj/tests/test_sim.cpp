#include <doctest.h>

#include <fstream>
#include <numeric>

#include "flowdse/error.hpp"
#include "flowdse/sim.hpp"
#include "sim_checks.hpp"

using namespace flowdse;

namespace {

ModuleCatalog toy_catalog() {
  return parse_catalog({
      {"origin1", {{"kind", "origin"}, {"params", {{"lane", 1}}}}},
      {"weigh1", {{"kind", "weigher"}}},
      {"assign1", {{"kind", "assigner"}}},
      {"distribute1", {{"kind", "distributor"}}},
      {"recipeDest", {{"kind", "destination"}, {"params", {{"recipe", "r"}}}}},
      {"stripsDest", {{"kind", "destination"}, {"params", {{"default", true}}}}},
  });
}

PlantTopology toy_topology() {
  const std::vector<Edge> edges{{"origin1", "out", "weigh1", "in"},
                                {"weigh1", "out", "assign1", "in"},
                                {"assign1", "out", "distribute1", "in"},
                                {"distribute1", "out1", "recipeDest", "in"},
                                {"distribute1", "out2", "stripsDest", "in"}};
  return build_topology(edges, toy_catalog());
}

Scenario toy_scenario(double target) {
  Scenario s;
  s.id = "toy";
  s.season = "summer";
  Recipe r;
  r.id = "r";
  r.destination = "recipeDest";
  r.priority = 1;
  r.target_per_min = target;
  r.min_weight_g = 100;
  r.max_weight_g = 250;
  Recipe d;
  d.id = "strips";
  d.destination = "stripsDest";
  d.max_weight_g = 1000;
  d.is_default = true;
  s.recipes = {r, d};
  s.flock.mean_weight_g = 225;
  s.flock.std_fraction = 0.001;  // every fillet lands in the 220 g bin
  s.flock.lane_count = 1;
  return s;
}

}  // namespace

TEST_CASE("event queue orders by time then insertion") {
  EventQueue q;
  q.push(5, EventKind::arrival, 1);
  q.push(1, EventKind::delivery, 2);
  q.push(5, EventKind::strategy_recompute, 3);
  q.push(1, EventKind::arrival, 4);
  std::vector<std::uint64_t> order;
  while (!q.empty()) order.push_back(q.pop().subject);
  CHECK(order == std::vector<std::uint64_t>{2, 4, 1, 3});
}

TEST_CASE("run seeds depend on every part of the run identity") {
  const auto a = run_seed(1, 2, "3", 0);
  CHECK(a == run_seed(1, 2, "3", 0));
  CHECK(a != run_seed(2, 2, "3", 0));
  CHECK(a != run_seed(1, 3, "3", 0));
  CHECK(a != run_seed(1, 2, "4", 0));
  CHECK(a != run_seed(1, 2, "3", 1));
}

TEST_CASE("single-lane toy plant") {
  const auto topo = toy_topology();
  const auto routing = derive_routings(topo);
  const auto sc = toy_scenario(1000);
  SimParams p;
  p.seed = 17;
  const auto rec = run_simulation(topo, routing, sc, p, 0, 0);
  const auto& r = rec.recipe("r");
  // After warmup the strategy sends every 225 g fillet to the recipe.
  CHECK(r.delivered == rec.generated_after_warmup);
  CHECK(rec.default_delivered == 0);
  const double span_min = (p.duration_s - p.warmup_s) / 60.0;
  CHECK(r.throughput_per_min == doctest::Approx(r.delivered / span_min));
  CHECK(r.pct_of_target == doctest::Approx(r.throughput_per_min / 1000 * 100));
  CHECK(r.throughput_per_min == doctest::Approx(67.5).epsilon(0.03));

  // With a small target the percentage is capped.
  const auto capped = run_simulation(topo, routing, toy_scenario(10), p, 0, 0);
  CHECK(capped.recipe("r").pct_of_target == 100);
}

TEST_CASE("zero targets send everything to the default destination") {
  auto sc = scenario_catalog()[2];
  for (auto& r : sc.recipes) r.target_per_min = 0;
  const auto fx = checks::case_study();
  const auto topo = build_topology(fx.current, fx.dsm, fx.catalog);
  const auto routing = derive_routings(topo);
  SimParams p;
  p.duration_s = 800;
  const auto rec = run_simulation(topo, routing, sc, p, 1, 0);
  for (const auto& r : rec.recipes) {
    CHECK(r.pct_of_target == 100);
    if (!r.is_default) CHECK(r.delivered == 0);
  }
  CHECK(rec.default_delivered == rec.generated_after_warmup);
  CHECK(rec.performance() == 100);
}

TEST_CASE("runs are reproducible and replications differ") {
  const auto fx = checks::case_study();
  const auto topo = build_topology(fx.current, fx.dsm, fx.catalog);
  const auto routing = derive_routings(topo);
  SimParams p;
  p.duration_s = 800;
  p.replications = 2;
  p.seed = 5;
  const auto sc = scenario_catalog()[7];
  const auto a = replicate(topo, routing, sc, p, 7);
  const auto b = replicate(topo, routing, sc, p, 7);
  REQUIRE(a.size() == 2);
  CHECK(a == b);
  CHECK(a[0].generated_total != a[1].generated_total);
  CHECK(to_csv_rows(a[0]) == to_csv_rows(b[0]));
}

TEST_CASE("current design processes about 18,000 fillets") {
  const auto fx = checks::case_study();
  const auto topo = build_topology(fx.current, fx.dsm, fx.catalog);
  const auto routing = derive_routings(topo);
  SimParams p;
  p.seed = 1;
  const auto rec = run_simulation(topo, routing, scenario_catalog()[2], p, 0, 0);
  CHECK(rec.generated_total == doctest::Approx(18000).epsilon(0.03));
  CHECK(rec.strategy_updates == 320);
}

TEST_CASE("conservation and legality on sampled designs") {
  const auto fx = checks::case_study();
  const auto scenarios = scenario_catalog();
  std::mt19937_64 rng(4);
  SimParams p;
  p.duration_s = 800;
  for (const auto& d : sample_designs(fx.dsm, 12, 21)) {
    const auto& sc = scenarios[rng() % scenarios.size()];
    const auto v = checks::check_run(fx, d, sc, p);
    CHECK_MESSAGE(v.empty(), v);
  }
}

TEST_CASE("warmup boundary and in-flight cutoff") {
  const auto fx = checks::case_study();
  const auto topo = build_topology(fx.current, fx.dsm, fx.catalog);
  const auto routing = derive_routings(topo);
  SimParams p;
  p.warmup_s = 200;
  p.duration_s = 200.01;
  const auto tiny = run_simulation(topo, routing, scenario_catalog()[0], p, 0, 0);
  CHECK(tiny.delivered_after_warmup <= 2);

  p.duration_s = 800;
  p.transit_s = 5;
  const auto late = run_simulation(topo, routing, scenario_catalog()[0], p, 0, 0);
  CHECK(late.delivered_after_warmup < late.generated_after_warmup);
  CHECK(late.generated_after_warmup - late.delivered_after_warmup < 60);
}

TEST_CASE("assignment to an unreachable destination aborts the run") {
  const auto fx = checks::case_study();
  const auto topo = build_topology(fx.current, fx.dsm, fx.catalog);
  auto routing = derive_routings(topo);
  // Claim lane 5 also serves burger without a route to it.
  for (auto& l : routing.lanes) l.reachable_destinations.insert("burgerDestination");
  SimParams p;
  p.duration_s = 400;
  CHECK_THROWS_AS(run_simulation(topo, routing, scenario_catalog()[7], p, 0, 0), SimulationError);
}

TEST_CASE("duration sweep reference group has zero mean error") {
  const auto fx = checks::case_study();
  const auto topo = build_topology(fx.current, fx.dsm, fx.catalog);
  const auto routing = derive_routings(topo);
  SimParams p;
  const std::vector<double> one{800};
  const auto rows = duration_sweep(topo, routing, scenario_catalog()[2], p, one, 4, 0);
  REQUIRE(rows.size() == 4);
  double err = 0;
  for (const auto& r : rows) err += r.error_pct;
  CHECK(err / 4 == doctest::Approx(0).epsilon(1e-12));
  CHECK(sweep_csv(rows).rfind("duration_s,replication,estimate_pct,error_pct\n", 0) == 0);
  CHECK_THROWS_AS(duration_sweep(topo, routing, scenario_catalog()[2], p, {}, 4, 0), InputError);
}

TEST_CASE("parameters") {
  SimParams p;
  p.warmup_s = p.duration_s;
  CHECK_THROWS_AS(p.validate(), InputError);
  const auto j = nlohmann::json::parse(R"({"duration_s": 1000, "warmup_s": 100, "replications": 3, "seed": 9,
                                           "controller": {"window_size": 50, "recompute_period_s": 5, "bin_width_g": 20}})");
  const auto parsed = parse_sim_params(j);
  CHECK(parsed.duration_s == 1000);
  CHECK(parsed.controller.window_size == 50);
  CHECK(parsed.controller.bin_width_g == 20);
  CHECK(parse_sim_params(to_json(parsed)) == parsed);
  CHECK(records_csv_header() ==
        "design_id,scenario_id,replication,recipe_id,delivered,throughput_per_min,pct_of_target,trim_pieces,trim_mass_g\n");
}
