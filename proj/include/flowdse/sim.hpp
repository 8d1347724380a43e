#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowdse/controller.hpp"
#include "flowdse/plant.hpp"
#include "flowdse/scenario.hpp"

namespace flowdse {

struct SimParams {
  double duration_s = 3200;
  double warmup_s = 200;
  int replications = 1;
  std::uint64_t seed = 0;
  ControllerParams controller;
  // Time from assignment to arrival at the destination. Fillets still in
  // flight at the end of the run are not tallied.
  double transit_s = 0;

  void validate() const;

  friend bool operator==(const SimParams&, const SimParams&) = default;
};

SimParams parse_sim_params(const nlohmann::json& document);
nlohmann::json to_json(const SimParams& params);

struct Fillet {
  std::uint64_t id = 0;
  int lane = 0;
  double weight_g = 0;  // post-trim
  double original_weight_g = 0;
  double created_at_s = 0;
  std::optional<Assignment> assignment;
};

enum class EventKind { arrival, strategy_recompute, delivery };

struct Event {
  double time_s = 0;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::arrival;
  std::uint64_t subject = 0;  // lane for arrivals, fillet slot for deliveries
};

/// Pending events ordered by time; events at equal times leave in insertion
/// order.
class EventQueue {
 public:
  void push(double time_s, EventKind kind, std::uint64_t subject = 0);
  [[nodiscard]] bool empty() const { return heap_.empty(); }
  [[nodiscard]] std::size_t size() const { return heap_.size(); }
  [[nodiscard]] const Event& top() const { return heap_.top(); }
  Event pop();

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time_s != b.time_s) return a.time_s > b.time_s;
      return a.sequence > b.sequence;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_sequence_ = 0;
};

struct RecipeStats {
  std::string recipe;
  std::string destination;
  bool is_default = false;
  double target_per_min = 0;
  std::uint64_t delivered = 0;
  double throughput_per_min = 0;
  double pct_of_target = 0;  // capped at 100; 100 when the target is 0

  friend bool operator==(const RecipeStats&, const RecipeStats&) = default;
};

struct PerformanceRecord {
  std::uint64_t design_id = 0;
  std::string scenario_id;
  int replication = 0;
  std::vector<RecipeStats> recipes;  // scenario recipe order, default included
  std::uint64_t default_delivered = 0;
  std::uint64_t trim_pieces = 0;
  double trim_mass_g = 0;
  std::uint64_t generated_total = 0;          // whole run, warmup included
  std::uint64_t generated_after_warmup = 0;
  std::uint64_t delivered_after_warmup = 0;   // all destinations, trim pieces excluded
  std::uint64_t strategy_updates = 0;

  // Mean percent of target over the non-default recipes.
  [[nodiscard]] double performance() const;
  [[nodiscard]] const RecipeStats& recipe(const std::string& id) const;

  friend bool operator==(const PerformanceRecord&, const PerformanceRecord&) = default;
};

// Everything known about one delivered fillet, for invariant checks.
struct FilletTrace {
  Fillet fillet;
  std::string destination;
  std::vector<std::size_t> route;  // indices into PlantTopology::edges
  double trim_piece_g = 0;
  double delivered_at_s = 0;
  bool counted = false;  // inside the statistics window
};

using FilletObserver = std::function<void(const FilletTrace&)>;

// Seed of one run, derived only from its identity so that runs can execute
// in any order on any worker.
std::uint64_t run_seed(std::uint64_t global_seed, std::uint64_t design_id,
                       const std::string& scenario_id, int replication);

/// Simulates one (design, scenario, replication). Fillets arrive per lane as
/// a Poisson stream, are weighed, assigned by the controller, trimmed and
/// routed to their destination; the controller refreshes its strategy on a
/// fixed timer. Tallies cover fillets created after the warmup.
PerformanceRecord run_simulation(const PlantTopology& topology, const RoutingTable& routing,
                                 const Scenario& scenario, const SimParams& params,
                                 std::uint64_t design_id, int replication,
                                 const FilletObserver& observer = {});

std::vector<PerformanceRecord> replicate(const PlantTopology& topology, const RoutingTable& routing,
                                         const Scenario& scenario, const SimParams& params,
                                         std::uint64_t design_id);

struct SweepRow {
  double duration_s = 0;
  int replication = 0;
  double estimate = 0;   // mean percent of target over non-default recipes
  double error_pct = 0;  // relative to the mean at the longest duration
};

std::vector<SweepRow> duration_sweep(const PlantTopology& topology, const RoutingTable& routing,
                                     const Scenario& scenario, const SimParams& params,
                                     std::span<const double> durations, int reps,
                                     std::uint64_t design_id);

// CSV rows: design_id,scenario_id,replication,recipe_id,delivered,
// throughput_per_min,pct_of_target,trim_pieces,trim_mass_g
std::string records_csv_header();
std::string to_csv_rows(const PerformanceRecord& record);
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace flowdse
