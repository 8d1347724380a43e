#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "flowdse/error.hpp"
#include "flowdse/explorer.hpp"

using namespace flowdse;
namespace fs = std::filesystem;

namespace {

const std::string kData = FLOWDSE_DATA_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("flowdse_test_explorer_" + name);
  fs::remove_all(p);
  return p;
}

ExplorationConfig small_config(const fs::path& out) {
  ExplorationConfig c;
  c.dsm_path = kData + "/case_study_dsm.json";
  c.scenarios_path = kData + "/scenarios.json";
  c.catalog_path = kData + "/case_study_catalog.json";
  c.sim.duration_s = 600;
  c.sim.seed = 11;
  c.mode = ExploreMode::sample;
  c.sample_k = 40;
  c.sample_seed = 3;
  c.scenario_ids = {"3", "8"};
  c.out_dir = out;
  return c;
}

}  // namespace

TEST_CASE("config json round trip and digest") {
  auto c = small_config("/tmp/x");
  c.thresholds.s = 50;
  const auto back = parse_exploration_config(to_json(c));
  CHECK(back.sim == c.sim);
  CHECK(back.thresholds == c.thresholds);
  CHECK(back.sample_k == 40);
  CHECK(back.scenario_ids == c.scenario_ids);
  CHECK(config_digest(back) == config_digest(c));

  auto other = c;
  other.workers = 8;
  other.out_dir = "/elsewhere";
  CHECK(config_digest(other) == config_digest(c));
  other.sim.seed = 12;
  CHECK(config_digest(other) != config_digest(c));
  CHECK_THROWS_AS(parse_explore_mode("random"), InputError);
  CHECK(parse_explore_mode(to_string(ExploreMode::listed)) == ExploreMode::listed);
}

TEST_CASE("worker count does not change the results") {
  const auto a = scratch("w1");
  const auto b = scratch("w4");
  auto c = small_config(a);
  c.workers = 1;
  const auto one = explore(c);
  c.out_dir = b;
  c.workers = 4;
  const auto four = explore(c);
  CHECK(one.scores == four.scores);
  CHECK(one.scores.size() == 40);
  CHECK(slurp(a / "scores.csv") == slurp(b / "scores.csv"));
  CHECK(slurp(a / "records.csv") == slurp(b / "records.csv"));
  CHECK(slurp(a / "pareto.csv") == slurp(b / "pareto.csv"));
  CHECK(std::is_sorted(one.scores.begin(), one.scores.end(),
                       [](const DesignScore& x, const DesignScore& y) { return x.design_id < y.design_id; }));
  CHECK(one.manifest.at("config_digest") == four.manifest.at("config_digest"));
  CHECK(one.manifest.at("finished") == true);

  // Reloading reads back the same scores.
  const auto loaded = load_store(a);
  CHECK(loaded.finished);
  CHECK(loaded.scores == one.scores);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("resume after an interrupted run") {
  const auto dir = scratch("resume");
  auto c = small_config(dir);
  c.workers = 2;
  explore(c);
  const auto scores = slurp(dir / "scores.csv");
  const auto records = slurp(dir / "records.csv");

  // Keep the first 12 score rows plus half a line, and records of more
  // designs than that, as a killed run would leave them.
  std::istringstream in(scores);
  std::string line, cut;
  for (int k = 0; k < 13 && std::getline(in, line); ++k) cut += line + '\n';
  std::getline(in, line);
  cut += line.substr(0, line.size() / 2);
  spit(dir / "scores.csv", cut);
  spit(dir / "records.csv", records.substr(0, records.size() * 2 / 3));
  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  manifest["finished"] = false;
  spit(dir / "manifest.json", manifest.dump(2));

  const auto resumed = resume(dir, 1);
  CHECK(resumed.finished);
  CHECK(slurp(dir / "scores.csv") == scores);
  CHECK(slurp(dir / "records.csv") == records);

  // A finished store is left alone.
  const auto stamp = fs::last_write_time(dir / "scores.csv");
  const auto again = resume(dir);
  CHECK(again.scores == resumed.scores);
  CHECK(fs::last_write_time(dir / "scores.csv") == stamp);

  auto changed = c;
  changed.sim.duration_s = 700;
  CHECK_THROWS_AS(explore(changed), InputError);
  fs::remove_all(dir);
}

TEST_CASE("satisfice stops at the first design that meets the thresholds") {
  const auto dir = scratch("satisfice");
  auto c = small_config(dir);
  c.mode = ExploreMode::satisfice;
  c.thresholds.s = 0;
  c.workers = 1;
  const auto st = explore(c);
  REQUIRE(st.satisfying_design.has_value());
  CHECK(*st.satisfying_design == 0);
  CHECK(st.scores.size() == 1);
  CHECK(st.manifest.at("satisfying_design") == 0);

  c.thresholds = {};
  c.out_dir = scratch("satisfice_none");
  CHECK_THROWS_AS(explore(c), InputError);
  fs::remove_all(dir);
}

TEST_CASE("listed designs and repeated samples") {
  const auto dir = scratch("listed");
  auto c = small_config(dir);
  c.mode = ExploreMode::listed;
  c.design_ids = {7549, 3};
  const auto st = explore(c);
  REQUIRE(st.scores.size() == 2);
  CHECK(st.scores[0].design_id == 3);
  CHECK(st.scores[1].design_id == 7549);
  CHECK(st.scores[1].trim_lanes == std::vector<int>{1, 3});
  CHECK(st.scores[1].cells.size() == 8);

  c.design_ids = {999999};
  c.out_dir = scratch("listed_bad");
  CHECK_THROWS_AS(explore(c), InputError);

  const auto s1 = scratch("sample1");
  const auto s2 = scratch("sample2");
  auto a = small_config(s1);
  a.sample_k = 5;
  auto b = a;
  b.out_dir = s2;
  CHECK(explore(a).scores == explore(b).scores);
  for (const auto& p : {dir, s1, s2}) fs::remove_all(p);
}

TEST_CASE("unknown scenario ids are rejected") {
  auto c = small_config(scratch("scen"));
  c.scenario_ids = {"3", "42"};
  CHECK_THROWS_AS(explore(c), InputError);
}
