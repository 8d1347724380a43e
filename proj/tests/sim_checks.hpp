#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "flowdse/dsm.hpp"
#include "flowdse/plant.hpp"
#include "flowdse/scenario.hpp"
#include "flowdse/sim.hpp"

namespace checks {

using namespace flowdse;

inline const std::string kData = FLOWDSE_DATA_DIR;

struct Fixture {
  DesignSpaceMatrix dsm;
  ModuleCatalog catalog;
  Design current;
};

inline Design load_current(const DesignSpaceMatrix& dsm) {
  std::ifstream in(kData + "/current_design.json");
  nlohmann::json doc;
  in >> doc;
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& c : doc["connections"]) pairs.emplace_back(c[0], c[1]);
  return make_design(dsm, pairs);
}

inline Fixture case_study() {
  Fixture fx{load_dsm(kData + "/case_study_dsm.json"), load_catalog(kData + "/case_study_catalog.json"), {}};
  fx.current = load_current(fx.dsm);
  return fx;
}

// Runs one simulation with an observer and returns a description of every
// broken invariant, empty when the run is clean.
inline std::string check_run(const Fixture& fx, const Design& design, const Scenario& sc,
                             const SimParams& p) {
  const auto topo = build_topology(design, fx.dsm, fx.catalog);
  const auto routing = derive_routings(topo);
  std::ostringstream bad;
  std::map<std::string, std::uint64_t> per_recipe;
  std::uint64_t counted = 0, pieces = 0;
  double mass = 0;
  const auto rec = run_simulation(topo, routing, sc, p, design.id, 0, [&](const FilletTrace& t) {
    const auto& a = *t.fillet.assignment;
    const auto& lr = routing.lane(t.fillet.lane);
    const auto& r = sc.recipe(a.recipe_id);
    if (t.destination != r.destination) bad << "fillet " << t.fillet.id << " at wrong destination\n";
    if (!lr.reachable_destinations.count(t.destination)) bad << "fillet " << t.fillet.id << " unreachable\n";
    if (t.route != lr.routes.at(t.destination)) bad << "fillet " << t.fillet.id << " off route\n";
    if (t.trim_piece_g > 0 && !lr.has_trimmer) bad << "trim in lane without trimmer\n";
    if (std::abs(t.fillet.original_weight_g - t.trim_piece_g - t.fillet.weight_g) > 1e-9) bad << "mass lost\n";
    if (!r.is_default) {
      if (t.trim_piece_g > r.max_trim_g + 1e-9) bad << "trim beyond limit\n";
      if (t.fillet.weight_g < r.min_weight_g - 1e-9 || t.fillet.weight_g > r.max_weight_g + 1e-9) {
        bad << "fillet " << t.fillet.id << " outside recipe window\n";
      }
    } else if (t.trim_piece_g != 0) {
      bad << "default fillet trimmed\n";
    }
    if (t.delivered_at_s < t.fillet.created_at_s) bad << "delivered before created\n";
    if (t.counted != (t.fillet.created_at_s > p.warmup_s)) bad << "warmup flag wrong\n";
    if (t.counted) {
      ++counted;
      ++per_recipe[a.recipe_id];
      if (t.trim_piece_g > 0) {
        ++pieces;
        mass += t.trim_piece_g;
      }
    }
  });
  if (counted != rec.delivered_after_warmup) bad << "delivered total mismatch\n";
  if (p.transit_s == 0 && rec.generated_after_warmup != rec.delivered_after_warmup) bad << "fillets lost\n";
  for (const auto& st : rec.recipes) {
    const auto it = per_recipe.find(st.recipe);
    if ((it == per_recipe.end() ? 0 : it->second) != st.delivered) bad << "recipe " << st.recipe << " count\n";
    if (st.pct_of_target < 0 || st.pct_of_target > 100) bad << "pct out of range\n";
  }
  if (pieces != rec.trim_pieces) bad << "trim piece count\n";
  if (std::abs(mass - rec.trim_mass_g) > 1e-6 * (1 + mass)) bad << "trim mass\n";
  return bad.str();
}

}  // namespace checks
