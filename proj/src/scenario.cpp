#include "flowdse/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <boost/math/distributions/normal.hpp>

#include "flowdse/error.hpp"

namespace flowdse {

const Recipe& Scenario::default_recipe() const {
  for (const auto& r : recipes) {
    if (r.is_default) return r;
  }
  throw InputError("scenario " + id + " has no default recipe");
}

const Recipe& Scenario::recipe(const std::string& rid) const {
  for (const auto& r : recipes) {
    if (r.id == rid) return r;
  }
  throw InputError("scenario " + id + " has no recipe " + rid);
}

void validate(const Scenario& s) {
  const std::string where = "scenario " + s.id + ": ";
  int defaults = 0;
  std::set<int> priorities;
  std::set<std::string> ids;
  for (const auto& r : s.recipes) {
    if (!ids.insert(r.id).second) throw InputError(where + "duplicate recipe " + r.id);
    if (r.min_weight_g > r.max_weight_g) throw InputError(where + r.id + " has min > max weight");
    if (r.max_trim_g < 0) throw InputError(where + r.id + " has a negative trim limit");
    if (r.target_per_min < 0) throw InputError(where + r.id + " has a negative target");
    if (r.is_default) {
      ++defaults;
      if (r.min_weight_g > 0 || r.max_weight_g < kMaxFilletWeightG || r.max_trim_g != 0) {
        throw InputError(where + "default recipe must accept every weight untrimmed");
      }
      continue;
    }
    if (r.priority < 1) throw InputError(where + r.id + " needs a priority >= 1");
    if (!priorities.insert(r.priority).second) {
      throw InputError(where + "priority " + std::to_string(r.priority) + " is used twice");
    }
  }
  if (defaults != 1) throw InputError(where + "exactly one default recipe is required");
  if (s.flock.mean_weight_g <= 0 || s.flock.std_fraction <= 0 || s.flock.lane_count < 1) {
    throw InputError(where + "invalid flock model");
  }
  if (s.arrival_rate_per_lane_per_min <= 0) throw InputError(where + "arrival rate must be positive");
}

std::vector<double> quintile_bounds(const FlockModel& flock) {
  const boost::math::normal dist(flock.mean_weight_g, flock.stddev_g());
  std::vector<double> cuts;
  for (int k = 1; k < flock.lane_count; ++k) {
    cuts.push_back(boost::math::quantile(dist, static_cast<double>(k) / flock.lane_count));
  }
  return cuts;
}

double uniform_open01(Rng& rng) {
  // 53 random bits, shifted half a step off zero.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

WeightSampler::WeightSampler(const FlockModel& flock) : flock_(flock) {
  if (flock.lane_count < 1 || flock.stddev_g() <= 0) throw InputError("invalid flock model");
  const boost::math::normal dist(flock.mean_weight_g, flock.stddev_g());
  const double p_min = boost::math::cdf(dist, 0.0);
  const double p_max = boost::math::cdf(dist, kMaxFilletWeightG);
  const auto cuts = quintile_bounds(flock);
  const int n = flock.lane_count;
  for (int slot = 0; slot < n; ++slot) {
    Range r;
    r.p_lo = std::max(p_min, static_cast<double>(slot) / n);
    r.p_hi = std::min(p_max, static_cast<double>(slot + 1) / n);
    r.w_lo = slot == 0 ? 0.0 : std::max(0.0, cuts[slot - 1]);
    r.w_hi = slot == n - 1 ? kMaxFilletWeightG : std::min(kMaxFilletWeightG, cuts[slot]);
    lanes_.push_back(r);
  }
}

double WeightSampler::operator()(int lane, Rng& rng) const {
  const int n = flock_.lane_count;
  if (lane < 1 || lane > n) throw InputError("lane " + std::to_string(lane) + " out of range");
  const int slot = flock_.lightest_first ? lane - 1 : n - lane;
  const auto& r = lanes_[slot];
  const boost::math::normal dist(flock_.mean_weight_g, flock_.stddev_g());
  const double p = r.p_lo + (r.p_hi - r.p_lo) * uniform_open01(rng);
  double w = boost::math::quantile(dist, p);
  // Keep the draw strictly inside the lane interval despite rounding.
  if (w <= r.w_lo) w = std::nextafter(r.w_lo, r.w_hi);
  if (w >= r.w_hi) w = slot == n - 1 ? std::min(w, r.w_hi) : std::nextafter(r.w_hi, r.w_lo);
  return w;
}

double sample_fillet_weight(const FlockModel& flock, int lane, Rng& rng) {
  return WeightSampler(flock)(lane, rng);
}

namespace {

Recipe make_recipe(std::string id, std::string dest, int priority, double target, double lo,
                   double hi, double trim) {
  return {std::move(id), std::move(dest), priority, target, lo, hi, trim, false};
}

Recipe fillet_strips() {
  Recipe r;
  r.id = "filletStrips";
  r.destination = "filletStripsDestination";
  r.min_weight_g = 0;
  r.max_weight_g = kMaxFilletWeightG;
  r.is_default = true;
  return r;
}

}  // namespace

std::vector<Recipe> summer_recipes() {
  return {make_recipe("batching1", "batchingDestination1", 1, 130, 100, 250, 100),
          make_recipe("batching2", "batchingDestination2", 2, 130, 150, 300, 100),
          make_recipe("burger", "burgerDestination", 3, 30, 200, 350, 0),
          make_recipe("schnitzel", "schnitzelDestination", 4, 30, 250, 400, 0), fillet_strips()};
}

std::vector<Recipe> winter_recipes() {
  return {make_recipe("batching1", "batchingDestination1", 3, 100, 100, 250, 100),
          make_recipe("batching2", "batchingDestination2", 4, 100, 150, 300, 100),
          make_recipe("burger", "burgerDestination", 1, 60, 200, 350, 0),
          make_recipe("schnitzel", "schnitzelDestination", 2, 60, 250, 400, 0), fillet_strips()};
}

std::vector<Scenario> scenario_catalog() {
  std::vector<Scenario> out;
  const double means[] = {200, 225, 250, 275, 300};
  int id = 1;
  for (const char* season : {"summer", "winter"}) {
    for (double mean : means) {
      Scenario s;
      s.id = std::to_string(id++);
      s.season = season;
      s.recipes = std::string(season) == "summer" ? summer_recipes() : winter_recipes();
      s.flock.mean_weight_g = mean;
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

Recipe parse_recipe(const nlohmann::json& j) {
  Recipe r;
  r.id = j.at("recipe").get<std::string>();
  r.destination = j.at("destination").get<std::string>();
  r.is_default = j.value("default", false);
  r.priority = j.value("priority", 0);
  r.target_per_min = j.value("target_per_min", 0.0);
  r.min_weight_g = j.at("min_weight_g").get<double>();
  r.max_weight_g = j.at("max_weight_g").get<double>();
  r.max_trim_g = j.value("max_trim_g", 0.0);
  return r;
}

}  // namespace

std::vector<Scenario> parse_scenarios(const nlohmann::json& doc) {
  std::vector<Scenario> out;
  try {
    std::map<std::string, std::vector<Recipe>> sets;
    for (const auto& [name, list] : doc.at("recipe_sets").items()) {
      for (const auto& r : list) sets[name].push_back(parse_recipe(r));
    }
    FlockModel base;
    if (doc.contains("flock")) {
      const auto& f = doc.at("flock");
      base.std_fraction = f.value("std_fraction", base.std_fraction);
      base.lane_count = f.value("lanes", base.lane_count);
      base.lightest_first = f.value("lightest_first", base.lightest_first);
    }
    const double rate = doc.value("arrival_rate_per_lane_per_min", 67.5);
    std::set<std::string> ids;
    for (const auto& sj : doc.at("scenarios")) {
      Scenario s;
      s.id = sj.at("id").get<std::string>();
      if (!ids.insert(s.id).second) throw InputError("duplicate scenario id " + s.id);
      s.season = sj.at("recipes").get<std::string>();
      const auto it = sets.find(s.season);
      if (it == sets.end()) throw InputError("scenario " + s.id + " uses unknown recipe set " + s.season);
      s.recipes = it->second;
      s.flock = base;
      s.flock.mean_weight_g = sj.at("mean_weight_g").get<double>();
      s.flock.std_fraction = sj.value("std_fraction", base.std_fraction);
      s.arrival_rate_per_lane_per_min = sj.value("arrival_rate_per_lane_per_min", rate);
      validate(s);
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("scenario file: ") + e.what());
  }
  return out;
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return parse_scenarios(doc);
}

nlohmann::json to_json(const std::vector<Scenario>& scenarios) {
  nlohmann::json doc;
  doc["recipe_sets"] = nlohmann::json::object();
  doc["scenarios"] = nlohmann::json::array();
  for (const auto& s : scenarios) {
    if (!doc["recipe_sets"].contains(s.season)) {
      auto list = nlohmann::json::array();
      for (const auto& r : s.recipes) {
        nlohmann::json rj{{"recipe", r.id},
                          {"destination", r.destination},
                          {"min_weight_g", r.min_weight_g},
                          {"max_weight_g", r.max_weight_g},
                          {"max_trim_g", r.max_trim_g}};
        if (r.is_default) {
          rj["default"] = true;
        } else {
          rj["priority"] = r.priority;
          rj["target_per_min"] = r.target_per_min;
        }
        list.push_back(rj);
      }
      doc["recipe_sets"][s.season] = list;
    }
    doc["scenarios"].push_back({{"id", s.id},
                                {"recipes", s.season},
                                {"mean_weight_g", s.flock.mean_weight_g},
                                {"std_fraction", s.flock.std_fraction},
                                {"arrival_rate_per_lane_per_min", s.arrival_rate_per_lane_per_min}});
  }
  if (!scenarios.empty()) {
    doc["flock"] = {{"lanes", scenarios.front().flock.lane_count},
                    {"lightest_first", scenarios.front().flock.lightest_first}};
  }
  return doc;
}

}  // namespace flowdse
