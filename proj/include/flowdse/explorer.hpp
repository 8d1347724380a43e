#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowdse/evaluate.hpp"
#include "flowdse/sim.hpp"

namespace flowdse {

enum class ExploreMode { exhaustive, sample, satisfice, listed };

std::string to_string(ExploreMode mode);
ExploreMode parse_explore_mode(const std::string& name);

// Minimum requirements for satisfice mode; unset fields are not checked.
struct Thresholds {
  std::optional<double> s;
  std::optional<double> w;
  std::optional<double> roi;

  [[nodiscard]] bool any() const { return s || w || roi; }
  [[nodiscard]] bool met(const DesignScore& score) const;

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

struct ExplorationConfig {
  std::filesystem::path dsm_path;
  std::filesystem::path scenarios_path;
  std::filesystem::path catalog_path;
  SimParams sim;
  RoiParams roi;
  ExploreMode mode = ExploreMode::exhaustive;
  std::size_t sample_k = 0;
  std::uint64_t sample_seed = 0;
  Thresholds thresholds;
  std::vector<std::uint64_t> design_ids;    // listed mode
  std::vector<std::string> scenario_ids;    // empty: every scenario in the file
  std::size_t workers = 1;
  std::filesystem::path out_dir;
};

nlohmann::json to_json(const ExplorationConfig& config);
ExplorationConfig parse_exploration_config(const nlohmann::json& document);

// Hash of everything that affects results: input file contents, simulation
// and ROI parameters, design selection and scenario filter. Worker count and
// output directory are excluded.
std::string config_digest(const ExplorationConfig& config);

struct FailedDesign {
  std::uint64_t design_id = 0;
  std::string reason;
};

struct ResultStore {
  std::filesystem::path dir;
  nlohmann::json manifest;
  std::vector<DesignScore> scores;  // ascending design_id, Pareto labels set
  std::vector<FailedDesign> failed;
  std::optional<std::uint64_t> satisfying_design;
  bool finished = false;
};

struct ExploreProgress {
  std::size_t designs_done = 0;
  std::size_t designs_total = 0;
};
using ProgressFn = std::function<void(const ExploreProgress&)>;

/// Enumerate, build, simulate and score the selected designs, persisting to
/// config.out_dir. A store already holding the same digest is continued;
/// one with a different digest is refused.
ResultStore explore(const ExplorationConfig& config, const ProgressFn& progress = {});

// Continues the exploration recorded in the store's manifest. A nonzero
// worker count overrides the recorded one.
ResultStore resume(const std::filesystem::path& store, std::size_t workers = 0,
                   const ProgressFn& progress = {});

ResultStore load_store(const std::filesystem::path& store);

}  // namespace flowdse
