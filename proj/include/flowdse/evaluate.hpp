#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowdse/plant.hpp"
#include "flowdse/scenario.hpp"
#include "flowdse/sim.hpp"

namespace flowdse {

struct RoiParams {
  double profit_per_point = 10000;  // per percentage point per year
  double years = 10;
  double base_cost = 10'000'000;
  double trimmer_cost = 50'000;

  void validate() const;

  friend bool operator==(const RoiParams&, const RoiParams&) = default;
};

// ((s + w) * P * Y) / (B + t * M) * 100
double roi_percent(double s, double w, int t_trim, const RoiParams& params = {});

// Mean percent of target of one recipe in one scenario, replications averaged.
struct ScoreCell {
  std::string season;
  std::string scenario_id;
  std::string recipe;
  double pct = 0;

  friend bool operator==(const ScoreCell&, const ScoreCell&) = default;
};

struct DesignScore {
  std::uint64_t design_id = 0;
  double s = 0;  // summer mean over non-default recipes
  double w = 0;  // winter mean
  int t_trim = 0;
  std::vector<int> trim_lanes;
  double roi = 0;
  std::vector<ScoreCell> cells;  // non-default recipes only
  bool pareto_swt = false;       // front over (s max, w max, t_trim min)
  bool pareto_sw = false;        // front over (s max, w max)

  friend bool operator==(const DesignScore&, const DesignScore&) = default;
};

inline const std::string kSummer = "summer";
inline const std::string kWinter = "winter";

/// Averages replications per (scenario, recipe), then takes s and w as the
/// means of the summer and winter cells. Every scenario in `scenarios` must
/// have at least one record, and both seasons must be present.
DesignScore score_design(std::span<const PerformanceRecord> records, const PlantTopology& topology,
                         std::span<const Scenario> scenarios, const RoiParams& roi = {});

// Same aggregation starting from finished cells.
DesignScore score_from_cells(std::uint64_t design_id, std::vector<ScoreCell> cells,
                             std::vector<int> trim_lanes, const RoiParams& roi = {});

enum class Sense { maximize, minimize };

struct ObjectiveSpec {
  std::string name;
  Sense sense = Sense::maximize;

  friend bool operator==(const ObjectiveSpec&, const ObjectiveSpec&) = default;
};

// "s:max,w:max,t_trim:min"; a bare name means maximize.
std::vector<ObjectiveSpec> parse_objectives(const std::string& spec);

/// Value of a named objective: roi, s, w, t_trim, or s[recipe] / w[recipe]
/// for one recipe's seasonal mean. Throws InputError for unknown names.
double objective_value(const DesignScore& score, const std::string& name);

struct ParetoLabel {
  std::uint64_t design_id = 0;
  std::vector<double> objectives;
  bool is_pareto = false;
};

/// Marks the points that no other point weakly beats on every objective while
/// strictly beating it on one. Identical points are all kept.
std::vector<bool> pareto_mask(const std::vector<std::vector<double>>& points,
                              std::span<const Sense> senses);
void pareto_front(std::vector<ParetoLabel>& points, std::span<const Sense> senses);

// Fills pareto_swt and pareto_sw on every score.
void label_pareto(std::vector<DesignScore>& scores);

// Descending by objective, ties by ascending design_id.
std::vector<DesignScore> rank_by_objective(std::vector<DesignScore> scores,
                                           const std::string& objective);

// Design property used to split a population: trim_in_lane(k) or t_trim>=n.
class Predicate {
 public:
  static Predicate parse(const std::string& spec);
  bool operator()(const DesignScore& score) const;
  [[nodiscard]] const std::string& text() const { return text_; }

 private:
  enum class Kind { trim_in_lane, t_trim_at_least };
  Kind kind_ = Kind::trim_in_lane;
  int value_ = 0;
  std::string text_;
};

struct PartitionRow {
  std::uint64_t design_id = 0;
  bool in_subset = false;
  std::vector<double> objectives;
  bool pareto_union = false;   // front of the whole population
  bool pareto_subset = false;  // front within the point's own subset
};

// Splits scores by the predicate and labels fronts over the given axes,
// (s max, w max) by default.
std::vector<PartitionRow> partition_compare(std::span<const DesignScore> scores,
                                            const Predicate& predicate,
                                            const std::vector<ObjectiveSpec>& axes = {});

// Columns: design_id,s,w,t_trim,roi,pareto_swt,pareto_sw,trim_lanes followed
// by one pct:<season>:<scenario>:<recipe> column per cell.
void write_scores_csv(std::span<const DesignScore> scores, std::ostream& out);
// Needs design_id, s, w and t_trim; other columns are optional. roi is
// recomputed with `roi` when absent.
std::vector<DesignScore> read_scores_csv(std::istream& in, const RoiParams& roi = {});

// design_id,<objective>...,is_pareto
void write_pareto_csv(std::span<const ParetoLabel> labels, const std::vector<ObjectiveSpec>& axes,
                      std::ostream& out);
void write_partition_csv(std::span<const PartitionRow> rows, const std::vector<ObjectiveSpec>& axes,
                         const std::string& predicate, std::ostream& out);
// Scatter data: design_id,s,w,t_trim,highlight
void write_plot_csv(std::span<const DesignScore> scores, std::ostream& out);

}  // namespace flowdse
