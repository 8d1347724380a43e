#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "flowdse/error.hpp"
#include "flowdse/scenario.hpp"

using namespace flowdse;

namespace {
const std::string kData = FLOWDSE_DATA_DIR;

FlockModel flock(double mean) {
  FlockModel f;
  f.mean_weight_g = mean;
  return f;
}
}  // namespace

TEST_CASE("quintile cuts for a 250 g flock") {
  const auto cuts = quintile_bounds(flock(250));
  REQUIRE(cuts.size() == 4);
  CHECK(cuts[0] == doctest::Approx(228.96).epsilon(0.0001));
  CHECK(cuts[1] == doctest::Approx(243.67).epsilon(0.0001));
  CHECK(cuts[2] == doctest::Approx(256.33).epsilon(0.0001));
  CHECK(cuts[3] == doctest::Approx(271.04).epsilon(0.0001));
  CHECK(cuts[0] + cuts[3] == doctest::Approx(500.0));
  CHECK(cuts[1] + cuts[2] == doctest::Approx(500.0));
  CHECK(std::is_sorted(cuts.begin(), cuts.end()));

  const auto small = quintile_bounds(flock(200));
  for (std::size_t k = 0; k < 4; ++k) CHECK(small[k] == doctest::Approx(cuts[k] * 0.8));
}

TEST_CASE("lane draws stay inside their quintile") {
  Rng rng(5);
  const auto cuts250 = quintile_bounds(flock(250));
  const WeightSampler s250(flock(250));
  for (int k = 0; k < 20000; ++k) CHECK_LT(s250(1, rng), cuts250[0]);

  double sum = 0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) sum += s250(3, rng);
  CHECK(sum / n == doctest::Approx(250.0).epsilon(0.5 / 250.0));

  const auto cuts300 = quintile_bounds(flock(300));
  const WeightSampler s300(flock(300));
  for (int k = 0; k < 20000; ++k) CHECK_GT(s300(5, rng), cuts300[3]);

  CHECK_THROWS_AS(s250(0, rng), InputError);
  CHECK_THROWS_AS(s250(6, rng), InputError);
}

TEST_CASE("heaviest lane first when configured") {
  FlockModel f = flock(250);
  f.lightest_first = false;
  Rng rng(1);
  const auto cuts = quintile_bounds(f);
  const WeightSampler s(f);
  for (int k = 0; k < 1000; ++k) CHECK_GT(s(1, rng), cuts[3]);
}

TEST_CASE("pooled draws follow the flock distribution") {
  const FlockModel f = flock(250);
  const WeightSampler sample(f);
  Rng rng(2024);
  const int n = 1'000'000;
  std::vector<double> draws;
  draws.reserve(n);
  std::vector<int> per_lane(5, 0);
  const auto cuts = quintile_bounds(f);
  std::uniform_int_distribution<int> lane(1, 5);
  for (int k = 0; k < n; ++k) {
    const double w = sample(lane(rng), rng);
    draws.push_back(w);
    const auto slot = std::upper_bound(cuts.begin(), cuts.end(), w) - cuts.begin();
    ++per_lane[static_cast<std::size_t>(slot)];
  }
  for (const int c : per_lane) CHECK(static_cast<double>(c) / n == doctest::Approx(0.2).epsilon(0.005 / 0.2));

  std::sort(draws.begin(), draws.end());
  const boost::math::normal dist(f.mean_weight_g, f.stddev_g());
  const double lo = boost::math::cdf(dist, 0.0);
  const double hi = boost::math::cdf(dist, kMaxFilletWeightG);
  double d = 0;
  for (int k = 0; k < n; ++k) {
    const double F = (boost::math::cdf(dist, draws[static_cast<std::size_t>(k)]) - lo) / (hi - lo);
    d = std::max({d, std::abs(F - static_cast<double>(k) / n), std::abs(F - static_cast<double>(k + 1) / n)});
  }
  CHECK_LT(d, 0.005);
  CHECK_GT(draws.front(), 0.0);
  CHECK_LE(draws.back(), kMaxFilletWeightG);
}

TEST_CASE("uniform_open01 never hits the ends") {
  Rng rng(0);
  for (int k = 0; k < 100000; ++k) {
    const double u = uniform_open01(rng);
    CHECK((u > 0.0 && u < 1.0));
  }
}

TEST_CASE("built-in scenario catalog") {
  const auto all = scenario_catalog();
  REQUIRE(all.size() == 10);
  CHECK(all[2].id == "3");
  CHECK(all[2].season == "summer");
  CHECK(all[2].flock.mean_weight_g == 250);
  CHECK(all[7].id == "8");
  CHECK(all[7].season == "winter");
  CHECK(all[7].flock.mean_weight_g == 250);

  const auto& burger = all[7].recipe("burger");
  CHECK(burger.priority == 1);
  CHECK(burger.target_per_min == 60);
  CHECK(burger.min_weight_g == 200);
  CHECK(burger.max_weight_g == 350);
  CHECK(burger.max_trim_g == 0);

  for (const auto& s : all) {
    validate(s);
    double total = 0;
    for (const auto& r : s.recipes) total += r.target_per_min;
    CHECK(total == 320);
    CHECK(s.default_recipe().id == "filletStrips");
    CHECK(s.flock.std_fraction == 0.10);
    CHECK(s.arrival_rate_per_lane_per_min == 67.5);
  }
  CHECK(all[0].recipe("batching1").target_per_min == 130);
  CHECK(all[5].recipe("batching2").priority == 4);
}

TEST_CASE("shipped scenario file equals the built-in catalog") {
  CHECK(load_scenarios(kData + "/scenarios.json") == scenario_catalog());
  CHECK(parse_scenarios(to_json(scenario_catalog())) == scenario_catalog());
}

TEST_CASE("recipe set validation") {
  Scenario s = scenario_catalog().front();
  SUBCASE("duplicate priority") {
    s.recipes[1].priority = s.recipes[0].priority;
    CHECK_THROWS_AS(validate(s), InputError);
  }
  SUBCASE("second default") {
    s.recipes[0].is_default = true;
    CHECK_THROWS_AS(validate(s), InputError);
  }
  SUBCASE("inverted window") {
    s.recipes[0].min_weight_g = 300;
    CHECK_THROWS_AS(validate(s), InputError);
  }
  SUBCASE("default must accept everything") {
    s.recipes.back().max_weight_g = 500;
    CHECK_THROWS_AS(validate(s), InputError);
  }
}
