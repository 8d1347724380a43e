#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

namespace flowdse {

// Production order requirements for one destination. Weights are post-trim
// grams, throughput is fillets per minute.
struct Recipe {
  std::string id;
  std::string destination;
  int priority = 0;  // 1 = highest; unused for the default recipe
  double target_per_min = 0;
  double min_weight_g = 0;
  double max_weight_g = 0;
  double max_trim_g = 0;
  bool is_default = false;

  friend bool operator==(const Recipe&, const Recipe&) = default;
};

// Normally distributed fillet weights, split over the lanes by quantile.
struct FlockModel {
  double mean_weight_g = 250;
  double std_fraction = 0.10;
  int lane_count = 5;
  // Lane 1 receives the lightest share when true, the heaviest otherwise.
  bool lightest_first = true;

  [[nodiscard]] double stddev_g() const { return std_fraction * mean_weight_g; }

  friend bool operator==(const FlockModel&, const FlockModel&) = default;
};

struct Scenario {
  std::string id;
  std::string season;  // name of the recipe set, e.g. "summer"
  std::vector<Recipe> recipes;
  FlockModel flock;
  double arrival_rate_per_lane_per_min = 67.5;

  [[nodiscard]] const Recipe& default_recipe() const;
  [[nodiscard]] const Recipe& recipe(const std::string& id) const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Heaviest weight any fillet may have; the default recipe accepts (0, 1000].
inline constexpr double kMaxFilletWeightG = 1000.0;

// Throws InputError when a recipe set or flock breaks its invariants.
void validate(const Scenario& scenario);

// Interior cut points between lanes, ascending: lane_count - 1 values. For
// five lanes these are the 20/40/60/80 % quantiles of the flock distribution.
std::vector<double> quintile_bounds(const FlockModel& flock);

using Rng = std::mt19937_64;

// Uniform double strictly inside (0, 1).
double uniform_open01(Rng& rng);

// A normal draw truncated to the lane's quantile interval and to (0, 1000] g,
// by inverse CDF on the restricted probability range.
double sample_fillet_weight(const FlockModel& flock, int lane, Rng& rng);

// Same draw as sample_fillet_weight with the per-lane probability ranges
// computed once.
class WeightSampler {
 public:
  explicit WeightSampler(const FlockModel& flock);
  double operator()(int lane, Rng& rng) const;

 private:
  struct Range {
    double p_lo, p_hi, w_lo, w_hi;
  };
  FlockModel flock_;
  std::vector<Range> lanes_;
};

std::vector<Recipe> summer_recipes();
std::vector<Recipe> winter_recipes();
// The ten built-in scenarios: summer then winter recipes, each with mean
// fillet weights 200, 225, 250, 275 and 300 g.
std::vector<Scenario> scenario_catalog();

std::vector<Scenario> parse_scenarios(const nlohmann::json& document);
std::vector<Scenario> load_scenarios(const std::filesystem::path& path);
nlohmann::json to_json(const std::vector<Scenario>& scenarios);

}  // namespace flowdse
