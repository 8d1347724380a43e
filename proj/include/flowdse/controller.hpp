#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowdse/plant.hpp"
#include "flowdse/scenario.hpp"

namespace flowdse {

struct ControllerParams {
  std::size_t window_size = 200;   // measurements kept per lane
  double recompute_period_s = 10;  // strategy refresh interval
  double bin_width_g = 10;
  double max_weight_g = 1000;      // histograms cover (0, max_weight_g]

  void validate() const;
  [[nodiscard]] std::size_t bin_count() const;
  [[nodiscard]] std::size_t bin_of(double weight_g) const;
  [[nodiscard]] double bin_lo(std::size_t bin) const { return bin_width_g * static_cast<double>(bin); }
  [[nodiscard]] double bin_hi(std::size_t bin) const { return bin_lo(bin + 1); }

  friend bool operator==(const ControllerParams&, const ControllerParams&) = default;
};

/// Sliding window over the most recent measurements of one lane, binned by
/// weight. Rates are fillets per minute over the time span of the window.
class LaneHistogram {
 public:
  LaneHistogram(int lane, const ControllerParams& params);

  // Throws InputError for weights outside (0, max_weight_g].
  void record(double weight_g, double time_s);

  [[nodiscard]] int lane() const { return lane_; }
  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] const std::vector<int>& bin_counts() const { return counts_; }
  // Time between the oldest and the newest buffered measurement.
  [[nodiscard]] double window_span_s() const;
  // Buffered weights, oldest first.
  [[nodiscard]] std::vector<double> weights() const;
  [[nodiscard]] std::vector<double> rates_per_min() const;

 private:
  struct Sample {
    double weight_g;
    double time_s;
    std::size_t bin;
  };

  int lane_;
  ControllerParams params_;
  std::vector<Sample> ring_;
  std::size_t oldest_ = 0;
  std::size_t size_ = 0;
  std::vector<int> counts_;
};

// Expected arrivals per weight bin for one lane, fillets per minute.
struct LaneRates {
  int lane = 0;
  std::vector<double> per_min;
};

struct Allocation {
  std::string recipe;
  double lo_g = 0;  // [lo, hi)
  double hi_g = 0;
  bool trim = false;

  friend bool operator==(const Allocation&, const Allocation&) = default;
};

struct LaneStrategy {
  int lane = 0;
  std::vector<Allocation> allocations;  // ascending, disjoint
  std::vector<int> bin_recipe;          // index into ProductionStrategy::recipes
  std::vector<char> bin_trim;
};

struct ProductionStrategy {
  ControllerParams params;
  std::vector<Recipe> recipes;
  int default_recipe = -1;
  std::vector<LaneStrategy> lanes;
  std::map<std::string, double> expected_per_min;  // allocated throughput per recipe

  [[nodiscard]] const LaneStrategy* lane(int index) const;
};

struct Assignment {
  std::uint64_t fillet_id = 0;
  int recipe_index = -1;
  std::string recipe_id;
  std::string destination_id;
  double trim_g = 0;
};

/// Greedy priority allocation of weight bins to recipes. Recipes are taken in
/// ascending priority number; each grows a direct interval bin by bin from
/// its minimum weight over the lanes that can reach its destination, until
/// the summed expected throughput meets the target or the maximum weight is
/// reached. A recipe still short then grows a trim interval above its maximum
/// weight on the lanes among those that have a trimmer, up to max + max trim.
/// The bin at which the target is crossed is taken whole. Bins taken in a lane
/// are unavailable to later recipes in that lane; everything left over goes
/// to the default recipe.
ProductionStrategy compute_strategy(std::span<const LaneRates> rates, std::span<const Recipe> recipes,
                                    const RoutingTable& routing, const ControllerParams& params);
ProductionStrategy compute_strategy(std::span<const LaneHistogram> histograms,
                                    std::span<const Recipe> recipes, const RoutingTable& routing,
                                    const ControllerParams& params);

// Recipe, destination and minimal trim for a fillet of the given weight.
Assignment assign(double weight_g, int lane, const ProductionStrategy& strategy);

bool strategy_refresh_due(double last_compute_s, double now_s, const ControllerParams& params);

// CSV snapshot: lane,lo_g,hi_g,recipe,trim
std::string strategy_csv(const ProductionStrategy& strategy);

}  // namespace flowdse
