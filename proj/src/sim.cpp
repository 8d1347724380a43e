#include "flowdse/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "flowdse/error.hpp"
#include "text.hpp"

namespace flowdse {

void SimParams::validate() const {
  if (!(duration_s > 0)) throw InputError("duration_s must be positive");
  if (!(warmup_s >= 0) || !(warmup_s < duration_s)) throw InputError("warmup_s must lie in [0, duration_s)");
  if (replications < 1) throw InputError("replications must be at least 1");
  if (!(transit_s >= 0)) throw InputError("transit_s must be non-negative");
  controller.validate();
}

SimParams parse_sim_params(const nlohmann::json& doc) {
  SimParams p;
  try {
    p.duration_s = doc.value("duration_s", p.duration_s);
    p.warmup_s = doc.value("warmup_s", p.warmup_s);
    p.replications = doc.value("replications", p.replications);
    p.seed = doc.value("seed", p.seed);
    p.transit_s = doc.value("transit_s", p.transit_s);
    if (doc.contains("controller")) {
      const auto& c = doc.at("controller");
      p.controller.window_size = c.value("window_size", p.controller.window_size);
      p.controller.recompute_period_s = c.value("recompute_period_s", p.controller.recompute_period_s);
      p.controller.bin_width_g = c.value("bin_width_g", p.controller.bin_width_g);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("run config: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json to_json(const SimParams& p) {
  return {{"duration_s", p.duration_s},
          {"warmup_s", p.warmup_s},
          {"replications", p.replications},
          {"seed", p.seed},
          {"transit_s", p.transit_s},
          {"controller",
           {{"window_size", p.controller.window_size},
            {"recompute_period_s", p.controller.recompute_period_s},
            {"bin_width_g", p.controller.bin_width_g}}}};
}

void EventQueue::push(double time_s, EventKind kind, std::uint64_t subject) {
  heap_.push(Event{time_s, next_sequence_++, kind, subject});
}

Event EventQueue::pop() {
  Event e = heap_.top();
  heap_.pop();
  return e;
}

double PerformanceRecord::performance() const {
  double sum = 0;
  int n = 0;
  for (const auto& r : recipes) {
    if (r.is_default) continue;
    sum += r.pct_of_target;
    ++n;
  }
  return n ? sum / n : 100.0;
}

const RecipeStats& PerformanceRecord::recipe(const std::string& id) const {
  for (const auto& r : recipes) {
    if (r.recipe == id) return r;
  }
  throw InputError("record has no recipe " + id);
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t run_seed(std::uint64_t global_seed, std::uint64_t design_id,
                       const std::string& scenario_id, int replication) {
  std::uint64_t h = splitmix(global_seed);
  h = splitmix(h ^ design_id);
  h = splitmix(h ^ text::fnv1a(scenario_id));
  h = splitmix(h ^ static_cast<std::uint64_t>(replication));
  return h;
}

PerformanceRecord run_simulation(const PlantTopology& topology, const RoutingTable& routing,
                                 const Scenario& scenario, const SimParams& params,
                                 std::uint64_t design_id, int replication,
                                 const FilletObserver& observer) {
  params.validate();
  const auto& recipes = scenario.recipes;
  const Recipe& fallback = scenario.default_recipe();
  if (topology.default_destination && *topology.default_destination != fallback.destination) {
    throw InputError("default recipe " + fallback.id + " targets " + fallback.destination +
                     " but the plant's default destination is " + *topology.default_destination);
  }

  Rng rng(run_seed(params.seed, design_id, scenario.id, replication));
  const WeightSampler sample_weight(scenario.flock);
  const double mean_gap_s = 60.0 / scenario.arrival_rate_per_lane_per_min;

  std::vector<LaneHistogram> histograms;
  std::map<int, std::size_t> lane_slot;
  for (const auto& lane : topology.lanes) {
    if (lane.index > scenario.flock.lane_count) {
      throw InputError("lane " + std::to_string(lane.index) + " has no share of the flock (" +
                       std::to_string(scenario.flock.lane_count) + " lanes)");
    }
    lane_slot.emplace(lane.index, histograms.size());
    histograms.emplace_back(lane.index, params.controller);
  }
  std::vector<const LaneRouting*> lane_routes;
  for (const auto& h : histograms) lane_routes.push_back(&routing.lane(h.lane()));

  ProductionStrategy strategy = compute_strategy(std::span<const LaneHistogram>(histograms),
                                                 recipes, routing, params.controller);
  double last_compute = 0.0;

  PerformanceRecord rec;
  rec.design_id = design_id;
  rec.scenario_id = scenario.id;
  rec.replication = replication;
  std::vector<std::uint64_t> delivered(recipes.size(), 0);

  struct InFlight {
    Fillet fillet;
    const std::vector<std::size_t>* route = nullptr;
    double trim_piece_g = 0;
  };
  std::vector<InFlight> in_flight;
  std::vector<std::size_t> free_slots;

  EventQueue queue;
  auto exponential_gap = [&] { return -std::log(uniform_open01(rng)) * mean_gap_s; };
  for (std::size_t s = 0; s < histograms.size(); ++s) {
    queue.push(exponential_gap(), EventKind::arrival, s);
  }
  std::uint64_t ticks = 1;
  queue.push(params.controller.recompute_period_s, EventKind::strategy_recompute);

  std::uint64_t next_id = 0;
  while (!queue.empty() && queue.top().time_s <= params.duration_s) {
    const Event ev = queue.pop();
    const double now = ev.time_s;
    switch (ev.kind) {
      case EventKind::strategy_recompute: {
        if (strategy_refresh_due(last_compute, now, params.controller)) {
          strategy = compute_strategy(std::span<const LaneHistogram>(histograms), recipes, routing,
                                      params.controller);
          last_compute = now;
          ++rec.strategy_updates;
        }
        ++ticks;
        queue.push(static_cast<double>(ticks) * params.controller.recompute_period_s,
                   EventKind::strategy_recompute);
        break;
      }
      case EventKind::arrival: {
        const auto slot = static_cast<std::size_t>(ev.subject);
        auto& hist = histograms[slot];
        queue.push(now + exponential_gap(), EventKind::arrival, slot);

        Fillet f;
        f.id = next_id++;
        f.lane = hist.lane();
        f.created_at_s = now;
        f.original_weight_g = sample_weight(f.lane, rng);
        f.weight_g = f.original_weight_g;
        ++rec.generated_total;
        const bool counted = now > params.warmup_s;
        if (counted) ++rec.generated_after_warmup;

        hist.record(f.original_weight_g, now);
        Assignment a = assign(f.original_weight_g, f.lane, strategy);
        a.fillet_id = f.id;
        const auto route = lane_routes[slot]->routes.find(a.destination_id);
        if (route == lane_routes[slot]->routes.end()) {
          throw SimulationError("fillet " + std::to_string(f.id) + " in lane " +
                                std::to_string(f.lane) + " assigned to unreachable destination " +
                                a.destination_id);
        }
        const double piece = a.trim_g;
        if (piece > 0) {
          f.weight_g = f.original_weight_g - piece;
          if (counted) {
            ++rec.trim_pieces;
            rec.trim_mass_g += piece;
          }
        }
        f.assignment = std::move(a);

        std::size_t fs;
        if (free_slots.empty()) {
          fs = in_flight.size();
          in_flight.emplace_back();
        } else {
          fs = free_slots.back();
          free_slots.pop_back();
        }
        in_flight[fs] = InFlight{std::move(f), &route->second, piece};
        queue.push(now + params.transit_s, EventKind::delivery, fs);
        break;
      }
      case EventKind::delivery: {
        const auto fs = static_cast<std::size_t>(ev.subject);
        InFlight& item = in_flight[fs];
        const bool counted = item.fillet.created_at_s > params.warmup_s;
        const auto r = static_cast<std::size_t>(item.fillet.assignment->recipe_index);
        if (counted) {
          ++delivered[r];
          ++rec.delivered_after_warmup;
        }
        if (observer) {
          FilletTrace trace;
          trace.fillet = item.fillet;
          trace.destination = item.fillet.assignment->destination_id;
          trace.route = *item.route;
          trace.trim_piece_g = item.trim_piece_g;
          trace.delivered_at_s = now;
          trace.counted = counted;
          observer(trace);
        }
        free_slots.push_back(fs);
        break;
      }
    }
  }

  const double span_min = (params.duration_s - params.warmup_s) / 60.0;
  for (std::size_t r = 0; r < recipes.size(); ++r) {
    RecipeStats st;
    st.recipe = recipes[r].id;
    st.destination = recipes[r].destination;
    st.is_default = recipes[r].is_default;
    st.target_per_min = recipes[r].target_per_min;
    st.delivered = delivered[r];
    st.throughput_per_min = static_cast<double>(delivered[r]) / span_min;
    st.pct_of_target = st.target_per_min > 0
                           ? std::min(100.0, st.throughput_per_min / st.target_per_min * 100.0)
                           : 100.0;
    if (st.is_default) rec.default_delivered = st.delivered;
    rec.recipes.push_back(std::move(st));
  }
  return rec;
}

std::vector<PerformanceRecord> replicate(const PlantTopology& topology, const RoutingTable& routing,
                                         const Scenario& scenario, const SimParams& params,
                                         std::uint64_t design_id) {
  params.validate();
  std::vector<PerformanceRecord> out;
  out.reserve(static_cast<std::size_t>(params.replications));
  for (int rep = 0; rep < params.replications; ++rep) {
    out.push_back(run_simulation(topology, routing, scenario, params, design_id, rep));
  }
  return out;
}

std::vector<SweepRow> duration_sweep(const PlantTopology& topology, const RoutingTable& routing,
                                     const Scenario& scenario, const SimParams& params,
                                     std::span<const double> durations, int reps,
                                     std::uint64_t design_id) {
  if (durations.empty()) throw InputError("duration sweep needs at least one duration");
  if (reps < 1) throw InputError("duration sweep needs at least one replication");
  std::vector<SweepRow> rows;
  for (const double d : durations) {
    SimParams p = params;
    p.duration_s = d;
    for (int rep = 0; rep < reps; ++rep) {
      const auto rec = run_simulation(topology, routing, scenario, p, design_id, rep);
      rows.push_back({d, rep, rec.performance(), 0.0});
    }
  }
  const double longest = *std::max_element(durations.begin(), durations.end());
  double sum = 0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.duration_s == longest) {
      sum += r.estimate;
      ++n;
    }
  }
  const double reference = sum / n;
  for (auto& r : rows) {
    r.error_pct = reference != 0 ? (r.estimate - reference) / reference * 100.0 : r.estimate - reference;
  }
  return rows;
}

std::string records_csv_header() {
  return "design_id,scenario_id,replication,recipe_id,delivered,throughput_per_min,pct_of_target,"
         "trim_pieces,trim_mass_g\n";
}

std::string to_csv_rows(const PerformanceRecord& record) {
  std::ostringstream out;
  for (const auto& r : record.recipes) {
    out << record.design_id << ',' << record.scenario_id << ',' << record.replication << ','
        << r.recipe << ',' << r.delivered << ',' << text::format_double(r.throughput_per_min) << ','
        << text::format_double(r.pct_of_target) << ',' << record.trim_pieces << ','
        << text::format_double(record.trim_mass_g) << '\n';
  }
  return out.str();
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "duration_s,replication,estimate_pct,error_pct\n";
  for (const auto& r : rows) {
    out << text::format_double(r.duration_s) << ',' << r.replication << ','
        << text::format_double(r.estimate) << ',' << text::format_double(r.error_pct) << '\n';
  }
  return out.str();
}

}  // namespace flowdse
