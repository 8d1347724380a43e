#include "flowdse/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "flowdse/error.hpp"
#include "text.hpp"

namespace flowdse {

namespace {
constexpr double kEdgeTol = 1e-9;
}

void ControllerParams::validate() const {
  if (window_size < 1) throw InputError("window_size must be at least 1");
  if (!(recompute_period_s > 0)) throw InputError("recompute_period_s must be positive");
  if (!(bin_width_g > 0) || !(max_weight_g > 0)) throw InputError("bin width and weight range must be positive");
  const double n = max_weight_g / bin_width_g;
  if (std::abs(n - std::round(n)) > 1e-9) {
    throw InputError("bin_width_g must divide the weight range evenly");
  }
}

std::size_t ControllerParams::bin_count() const {
  return static_cast<std::size_t>(std::llround(max_weight_g / bin_width_g));
}

std::size_t ControllerParams::bin_of(double weight_g) const {
  const auto n = bin_count();
  const auto b = static_cast<std::size_t>(std::max(0.0, std::floor(weight_g / bin_width_g)));
  return std::min(b, n - 1);
}

LaneHistogram::LaneHistogram(int lane, const ControllerParams& params)
    : lane_(lane), params_(params), counts_(params.bin_count(), 0) {
  params_.validate();
  ring_.reserve(params_.window_size);
}

void LaneHistogram::record(double weight_g, double time_s) {
  if (!(weight_g > 0) || weight_g > params_.max_weight_g) {
    throw InputError("weight " + text::format_double(weight_g) + " g is outside (0, " +
                     text::format_double(params_.max_weight_g) + "]");
  }
  const Sample s{weight_g, time_s, params_.bin_of(weight_g)};
  if (size_ < params_.window_size) {
    ring_.push_back(s);
    ++size_;
  } else {
    --counts_[ring_[oldest_].bin];
    ring_[oldest_] = s;
    oldest_ = (oldest_ + 1) % ring_.size();
  }
  ++counts_[s.bin];
}

double LaneHistogram::window_span_s() const {
  if (size_ < 2) return 0.0;
  const auto newest = (oldest_ + size_ - 1) % ring_.size();
  return ring_[newest].time_s - ring_[oldest_].time_s;
}

std::vector<double> LaneHistogram::weights() const {
  std::vector<double> out;
  out.reserve(size_);
  for (std::size_t k = 0; k < size_; ++k) out.push_back(ring_[(oldest_ + k) % ring_.size()].weight_g);
  return out;
}

std::vector<double> LaneHistogram::rates_per_min() const {
  std::vector<double> out(counts_.size(), 0.0);
  const double span = window_span_s();
  if (span <= 0) return out;
  for (std::size_t b = 0; b < counts_.size(); ++b) out[b] = counts_[b] / span * 60.0;
  return out;
}

const LaneStrategy* ProductionStrategy::lane(int index) const {
  for (const auto& l : lanes) {
    if (l.lane == index) return &l;
  }
  return nullptr;
}

ProductionStrategy compute_strategy(std::span<const LaneRates> rates, std::span<const Recipe> recipes,
                                    const RoutingTable& routing, const ControllerParams& params) {
  params.validate();
  const std::size_t bins = params.bin_count();

  ProductionStrategy strategy;
  strategy.params = params;
  strategy.recipes.assign(recipes.begin(), recipes.end());
  for (std::size_t r = 0; r < strategy.recipes.size(); ++r) {
    if (strategy.recipes[r].is_default) strategy.default_recipe = static_cast<int>(r);
  }
  if (strategy.default_recipe < 0) throw InputError("recipe set has no default recipe");

  // One lane entry per lane known to either the histograms or the routing.
  std::vector<int> lane_ids;
  for (const auto& r : rates) lane_ids.push_back(r.lane);
  for (const auto& l : routing.lanes) lane_ids.push_back(l.lane);
  std::sort(lane_ids.begin(), lane_ids.end());
  lane_ids.erase(std::unique(lane_ids.begin(), lane_ids.end()), lane_ids.end());

  struct Work {
    const LaneRouting* route = nullptr;
    std::vector<double> rate;
  };
  std::vector<Work> work(lane_ids.size());
  for (std::size_t k = 0; k < lane_ids.size(); ++k) {
    LaneStrategy ls;
    ls.lane = lane_ids[k];
    ls.bin_recipe.assign(bins, strategy.default_recipe);
    ls.bin_trim.assign(bins, 0);
    strategy.lanes.push_back(std::move(ls));
    work[k].rate.assign(bins, 0.0);
    for (const auto& r : rates) {
      if (r.lane != lane_ids[k]) continue;
      if (r.per_min.size() != bins) throw InputError("rate vector does not match the bin layout");
      work[k].rate = r.per_min;
    }
    for (const auto& l : routing.lanes) {
      if (l.lane == lane_ids[k]) work[k].route = &l;
    }
  }

  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < strategy.recipes.size(); ++r) {
    if (!strategy.recipes[r].is_default) order.push_back(r);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return strategy.recipes[a].priority < strategy.recipes[b].priority;
  });

  for (const auto r : order) {
    const Recipe& recipe = strategy.recipes[r];
    double expected = 0.0;
    strategy.expected_per_min[recipe.id] = 0.0;
    if (recipe.target_per_min <= 0) continue;

    std::vector<std::size_t> selected;
    for (std::size_t k = 0; k < work.size(); ++k) {
      if (work[k].route && work[k].route->reachable_destinations.count(recipe.destination)) {
        selected.push_back(k);
      }
    }
    auto grow = [&](double lo, double hi, const std::vector<std::size_t>& lanes, bool trim) {
      for (std::size_t b = 0; b < bins && expected < recipe.target_per_min; ++b) {
        if (params.bin_lo(b) < lo - kEdgeTol || params.bin_hi(b) > hi + kEdgeTol) continue;
        for (const auto k : lanes) {
          auto& ls = strategy.lanes[k];
          if (ls.bin_recipe[b] != strategy.default_recipe) continue;  // taken earlier
          ls.bin_recipe[b] = static_cast<int>(r);
          ls.bin_trim[b] = trim;
          expected += work[k].rate[b];
        }
      }
    };
    grow(recipe.min_weight_g, recipe.max_weight_g, selected, false);
    if (expected < recipe.target_per_min && recipe.max_trim_g > 0) {
      std::vector<std::size_t> trimming;
      for (const auto k : selected) {
        if (work[k].route->has_trimmer) trimming.push_back(k);
      }
      grow(recipe.max_weight_g, recipe.max_weight_g + recipe.max_trim_g, trimming, true);
    }
    strategy.expected_per_min[recipe.id] = expected;
  }

  for (auto& ls : strategy.lanes) {
    for (std::size_t b = 0; b < bins; ++b) {
      const int r = ls.bin_recipe[b];
      if (r == strategy.default_recipe) continue;
      const bool trim = ls.bin_trim[b] != 0;
      auto& allocs = ls.allocations;
      const auto& id = strategy.recipes[r].id;
      if (!allocs.empty() && allocs.back().recipe == id && allocs.back().trim == trim &&
          std::abs(allocs.back().hi_g - params.bin_lo(b)) < kEdgeTol) {
        allocs.back().hi_g = params.bin_hi(b);
      } else {
        allocs.push_back({id, params.bin_lo(b), params.bin_hi(b), trim});
      }
    }
  }
  return strategy;
}

ProductionStrategy compute_strategy(std::span<const LaneHistogram> histograms,
                                    std::span<const Recipe> recipes, const RoutingTable& routing,
                                    const ControllerParams& params) {
  std::vector<LaneRates> rates;
  rates.reserve(histograms.size());
  for (const auto& h : histograms) rates.push_back({h.lane(), h.rates_per_min()});
  return compute_strategy(rates, recipes, routing, params);
}

Assignment assign(double weight_g, int lane, const ProductionStrategy& strategy) {
  Assignment a;
  a.recipe_index = strategy.default_recipe;
  bool trim = false;
  if (const auto* ls = strategy.lane(lane)) {
    const auto b = strategy.params.bin_of(weight_g);
    a.recipe_index = ls->bin_recipe[b];
    trim = ls->bin_trim[b] != 0;
  }
  const Recipe& r = strategy.recipes.at(static_cast<std::size_t>(a.recipe_index));
  a.recipe_id = r.id;
  a.destination_id = r.destination;
  if (trim && weight_g > r.max_weight_g) a.trim_g = weight_g - r.max_weight_g;
  return a;
}

bool strategy_refresh_due(double last_compute_s, double now_s, const ControllerParams& params) {
  return now_s - last_compute_s >= params.recompute_period_s;
}

std::string strategy_csv(const ProductionStrategy& strategy) {
  std::ostringstream out;
  out << "lane,lo_g,hi_g,recipe,trim\n";
  for (const auto& ls : strategy.lanes) {
    for (const auto& a : ls.allocations) {
      out << ls.lane << ',' << text::format_double(a.lo_g) << ',' << text::format_double(a.hi_g)
          << ',' << a.recipe << ',' << (a.trim ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

}  // namespace flowdse
