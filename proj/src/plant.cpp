#include "flowdse/plant.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "flowdse/error.hpp"

namespace flowdse {

namespace {

ModuleType parse_type(const std::string& s) {
  if (s == "origin") return ModuleType::origin;
  if (s == "weigher") return ModuleType::weigher;
  if (s == "assigner") return ModuleType::assigner;
  if (s == "trimmer") return ModuleType::trimmer;
  if (s == "distributor") return ModuleType::distributor;
  if (s == "destination") return ModuleType::destination;
  throw InputError("unknown module kind '" + s + "'");
}

// Output ports carrying product, in routing preference order.
std::vector<std::string> product_outputs(ModuleType t) {
  switch (t) {
    case ModuleType::origin:
    case ModuleType::weigher:
    case ModuleType::assigner:
      return {"out"};
    case ModuleType::trimmer:
      return {"out1"};
    case ModuleType::distributor:
      return {"out1", "out2"};
    case ModuleType::destination:
      return {};
  }
  return {};
}

bool valid_output(ModuleType t, const std::string& port) {
  if (t == ModuleType::trimmer && port == "out2") return true;
  const auto ports = product_outputs(t);
  return std::find(ports.begin(), ports.end(), port) != ports.end();
}

std::string edge_text(const Edge& e) {
  return e.from_module + "." + e.from_port + " -> " + e.to_module + "." + e.to_port;
}

}  // namespace

std::string to_string(ModuleType type) {
  switch (type) {
    case ModuleType::origin: return "origin";
    case ModuleType::weigher: return "weigher";
    case ModuleType::assigner: return "assigner";
    case ModuleType::trimmer: return "trimmer";
    case ModuleType::distributor: return "distributor";
    case ModuleType::destination: return "destination";
  }
  return "?";
}

ModuleCatalog parse_catalog(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InputError("module catalog must be a JSON object");
  ModuleCatalog catalog;
  int defaults = 0;
  int sinks = 0;
  for (const auto& [id, entry] : doc.items()) {
    if (!entry.is_object() || !entry.contains("kind") || !entry.at("kind").is_string()) {
      throw InputError("catalog entry " + id + " needs a string 'kind'");
    }
    ModuleKind kind;
    kind.type = parse_type(entry.at("kind").get<std::string>());
    const auto params = entry.value("params", nlohmann::json::object());
    try {
      if (kind.type == ModuleType::origin) {
        if (!params.contains("lane")) throw InputError("origin " + id + " needs params.lane");
        kind.lane = params.at("lane").get<int>();
        if (kind.lane < 1) throw InputError("origin " + id + " has lane < 1");
      }
      if (kind.type == ModuleType::destination) {
        kind.destination_id = params.value("destination", id);
        if (params.contains("recipe")) kind.recipe = params.at("recipe").get<std::string>();
        kind.is_default = params.value("default", false);
        kind.is_trim_sink = params.value("trim_sink", false);
        defaults += kind.is_default;
        sinks += kind.is_trim_sink;
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError("catalog entry " + id + ": " + e.what());
    }
    catalog.emplace(id, std::move(kind));
  }
  if (defaults > 1) throw InputError("catalog declares more than one default destination");
  if (sinks > 1) throw InputError("catalog declares more than one trim sink");
  return catalog;
}

ModuleCatalog load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return parse_catalog(doc);
}

int PlantTopology::trimmer_count() const {
  return static_cast<int>(std::count_if(lanes.begin(), lanes.end(),
                                        [](const Lane& l) { return l.trimmer.has_value(); }));
}

std::vector<int> PlantTopology::trimmer_lanes() const {
  std::vector<int> out;
  for (const auto& l : lanes) {
    if (l.trimmer) out.push_back(l.index);
  }
  return out;
}

std::optional<std::size_t> PlantTopology::edge_from(const std::string& module,
                                                    const std::string& port) const {
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (edges[k].from_module == module && edges[k].from_port == port) return k;
  }
  return std::nullopt;
}

PlantTopology build_topology(std::span<const Edge> edges_in, const ModuleCatalog& catalog) {
  PlantTopology topo;
  topo.edges.assign(edges_in.begin(), edges_in.end());
  std::sort(topo.edges.begin(), topo.edges.end());

  auto kind_of = [&catalog](const std::string& m) -> const ModuleKind& {
    const auto it = catalog.find(m);
    if (it == catalog.end()) throw TopologyError("module " + m + " is not in the catalog");
    return it->second;
  };

  std::map<std::pair<std::string, std::string>, std::size_t> out_edge;
  std::map<std::string, int> in_degree;
  for (std::size_t k = 0; k < topo.edges.size(); ++k) {
    const auto& e = topo.edges[k];
    const auto& from = kind_of(e.from_module);
    const auto& to = kind_of(e.to_module);
    topo.modules.emplace(e.from_module, from);
    topo.modules.emplace(e.to_module, to);
    if (from.type == ModuleType::destination) {
      throw TopologyError("destination " + e.from_module + " cannot have outgoing product");
    }
    if (to.type == ModuleType::origin) {
      throw TopologyError("origin " + e.to_module + " cannot receive product");
    }
    if (!valid_output(from.type, e.from_port)) {
      throw TopologyError("port " + e.from_module + "." + e.from_port + " is not an output of a " +
                          to_string(from.type));
    }
    if (!out_edge.emplace(std::make_pair(e.from_module, e.from_port), k).second) {
      throw TopologyError("output " + e.from_module + "." + e.from_port +
                          " feeds more than one input");
    }
    if (++in_degree[e.to_module] > 1 && to.type != ModuleType::destination) {
      throw TopologyError("product flows merge at " + e.to_module +
                          "; only destinations accept more than one input");
    }
  }
  for (const auto& [id, kind] : catalog) {
    if (kind.type != ModuleType::destination) continue;
    if (kind.is_default) topo.default_destination = id;
    if (kind.is_trim_sink) topo.trim_sink = id;
  }

  // Cycle check by depth-first search with three colours.
  {
    std::map<std::string, std::vector<std::string>> succ;
    for (const auto& e : topo.edges) succ[e.from_module].push_back(e.to_module);
    std::map<std::string, int> colour;
    std::function<void(const std::string&)> visit = [&](const std::string& m) {
      colour[m] = 1;
      for (const auto& n : succ[m]) {
        if (colour[n] == 1) throw TopologyError("cycle through " + m + " -> " + n);
        if (colour[n] == 0) visit(n);
      }
      colour[m] = 2;
    };
    for (const auto& [m, kind] : topo.modules) {
      if (colour[m] == 0) visit(m);
    }
  }

  auto next = [&](const std::string& module,
                  const std::string& port) -> std::optional<std::string> {
    const auto it = out_edge.find({module, port});
    if (it == out_edge.end()) return std::nullopt;
    return topo.edges[it->second].to_module;
  };

  std::set<std::string> visited;
  for (const auto& [id, kind] : topo.modules) {
    if (kind.type != ModuleType::origin) continue;
    Lane lane;
    lane.index = kind.lane;
    lane.origin = id;
    visited.insert(id);
    const std::string where = "lane " + std::to_string(kind.lane) + ": ";

    auto expect = [&](const std::optional<std::string>& m, ModuleType t, const std::string& after) {
      if (!m) throw TopologyError(where + after + " has no downstream connection");
      if (topo.modules.at(*m).type != t) {
        throw TopologyError(where + "process order violated, " + after + " feeds " + *m +
                            " (" + to_string(topo.modules.at(*m).type) + "), expected " +
                            to_string(t));
      }
      visited.insert(*m);
      return *m;
    };
    lane.weigher = expect(next(id, "out"), ModuleType::weigher, id);
    lane.assigner = expect(next(lane.weigher, "out"), ModuleType::assigner, lane.weigher);

    auto head = next(lane.assigner, "out");
    if (!head) throw TopologyError(where + lane.assigner + " has no downstream connection");
    if (topo.modules.at(*head).type == ModuleType::trimmer) {
      lane.trimmer = *head;
      visited.insert(*head);
      const auto sink = next(*head, "out2");
      if (!sink || !topo.modules.at(*sink).is_trim_sink) {
        throw TopologyError(where + "trimmer " + *head + " has no connection to the trim sink");
      }
      visited.insert(*sink);
      head = next(*head, "out1");
      if (!head) throw TopologyError(where + "trimmer " + *lane.trimmer + " has no product output");
    }

    // Distribution tree: distributors and destinations only.
    std::vector<std::string> frontier{*head};
    for (std::size_t f = 0; f < frontier.size(); ++f) {
      const auto m = frontier[f];
      const auto& k = topo.modules.at(m);
      visited.insert(m);
      if (k.type == ModuleType::destination) {
        if (k.is_trim_sink) throw TopologyError(where + "product routed into trim sink " + m);
        continue;
      }
      if (k.type != ModuleType::distributor) {
        throw TopologyError(where + "process order violated, " + m + " (" + to_string(k.type) +
                            ") appears after assignment");
      }
      lane.distributors.push_back(m);
      for (const auto& port : product_outputs(k.type)) {
        if (auto n = next(m, port)) frontier.push_back(*n);
      }
    }
    topo.lanes.push_back(std::move(lane));
  }
  std::sort(topo.lanes.begin(), topo.lanes.end(),
            [](const Lane& a, const Lane& b) { return a.index < b.index; });
  for (std::size_t i = 1; i < topo.lanes.size(); ++i) {
    if (topo.lanes[i].index == topo.lanes[i - 1].index) {
      throw TopologyError("two origins share lane " + std::to_string(topo.lanes[i].index));
    }
  }
  for (const auto& [id, kind] : topo.modules) {
    if (!visited.count(id)) topo.warnings.push_back("module " + id + " is not reachable from any origin");
  }

  if (!topo.lanes.empty()) {
    if (!topo.default_destination) throw TopologyError("catalog has no default destination");
    const auto routing = derive_routings(topo);
    for (const auto& lr : routing.lanes) {
      if (!lr.reachable_destinations.count(*topo.default_destination)) {
        throw TopologyError("lane " + std::to_string(lr.lane) + " cannot reach default destination " +
                            *topo.default_destination);
      }
    }
  }
  return topo;
}

PlantTopology build_topology(const Design& design, const DesignSpaceMatrix& dsm,
                             const ModuleCatalog& catalog) {
  std::vector<Edge> edges;
  edges.reserve(design.connections.size());
  for (const auto& c : design.connections) {
    const auto& o = dsm.outputs()[c.output];
    const auto& i = dsm.inputs()[c.input];
    edges.push_back({o.module, o.port, i.module, i.port});
  }
  return build_topology(edges, catalog);
}

const LaneRouting& RoutingTable::lane(int index) const {
  for (const auto& l : lanes) {
    if (l.lane == index) return l;
  }
  throw InputError("no routing for lane " + std::to_string(index));
}

RoutingTable derive_routings(const PlantTopology& topology) {
  RoutingTable table;
  for (const auto& lane : topology.lanes) {
    LaneRouting lr;
    lr.lane = lane.index;
    lr.has_trimmer = lane.trimmer.has_value();
    std::vector<std::size_t> path;
    std::function<void(const std::string&)> walk = [&](const std::string& m) {
      const auto& kind = topology.modules.at(m);
      if (kind.type == ModuleType::destination) {
        lr.reachable_destinations.insert(m);
        lr.routes.emplace(m, path);
        return;
      }
      for (const auto& port : product_outputs(kind.type)) {
        const auto k = topology.edge_from(m, port);
        if (!k) continue;
        path.push_back(*k);
        walk(topology.edges[*k].to_module);
        path.pop_back();
      }
    };
    walk(lane.assigner);
    table.lanes.push_back(std::move(lr));
  }
  return table;
}

std::string to_edge_list(const PlantTopology& topology) {
  std::ostringstream out;
  for (const auto& e : topology.edges) out << edge_text(e) << '\n';
  return out.str();
}

}  // namespace flowdse
