#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowdse/dsm.hpp"

namespace flowdse {

enum class ModuleType { origin, weigher, assigner, trimmer, distributor, destination };

struct ModuleKind {
  ModuleType type = ModuleType::origin;
  int lane = 0;                        // origin only
  std::string destination_id;          // destination only
  std::optional<std::string> recipe;   // destination only
  bool is_default = false;             // destination that takes unallocated product
  bool is_trim_sink = false;           // destination for trim pieces

  friend bool operator==(const ModuleKind&, const ModuleKind&) = default;
};

using ModuleCatalog = std::map<std::string, ModuleKind>;

ModuleCatalog parse_catalog(const nlohmann::json& document);
ModuleCatalog load_catalog(const std::filesystem::path& path);
std::string to_string(ModuleType type);

struct Edge {
  std::string from_module;
  std::string from_port;
  std::string to_module;
  std::string to_port;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// One processing chain, named by its origin's lane index.
struct Lane {
  int index = 0;
  std::string origin;
  std::string weigher;
  std::string assigner;
  std::optional<std::string> trimmer;
  std::vector<std::string> distributors;  // breadth-first from the lane head
};

struct PlantTopology {
  std::map<std::string, ModuleKind> modules;  // active modules only
  std::vector<Edge> edges;                    // sorted
  std::vector<Lane> lanes;                    // ascending lane index
  std::optional<std::string> default_destination;
  std::optional<std::string> trim_sink;
  std::vector<std::string> warnings;

  [[nodiscard]] int trimmer_count() const;
  [[nodiscard]] std::vector<int> trimmer_lanes() const;
  // Edge leaving the given output port, if connected.
  [[nodiscard]] std::optional<std::size_t> edge_from(const std::string& module,
                                                     const std::string& port) const;
};

/// Builds and validates the plant for a set of connections. Throws
/// TopologyError for cycles, broken process order, merging product flows, a
/// trimmer without a trim-sink connection, or a lane that cannot reach the
/// default destination.
PlantTopology build_topology(std::span<const Edge> edges, const ModuleCatalog& catalog);
PlantTopology build_topology(const Design& design, const DesignSpaceMatrix& dsm,
                             const ModuleCatalog& catalog);

struct LaneRouting {
  int lane = 0;
  std::set<std::string> reachable_destinations;
  bool has_trimmer = false;
  // Product path from the assigner to each reachable destination, as indices
  // into PlantTopology::edges. The first path in port order wins when a
  // destination is reachable more than one way.
  std::map<std::string, std::vector<std::size_t>> routes;
};

struct RoutingTable {
  std::vector<LaneRouting> lanes;

  [[nodiscard]] const LaneRouting& lane(int index) const;
};

RoutingTable derive_routings(const PlantTopology& topology);

// GraphViz-compatible edge list, one "a.out -> b.in" line per edge.
std::string to_edge_list(const PlantTopology& topology);

}  // namespace flowdse
