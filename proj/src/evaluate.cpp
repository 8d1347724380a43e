#include "flowdse/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include "flowdse/error.hpp"
#include "text.hpp"

namespace flowdse {

void RoiParams::validate() const {
  if (!(profit_per_point > 0) || !(years > 0) || !(base_cost > 0) || !(trimmer_cost > 0)) {
    throw InputError("ROI parameters must be strictly positive");
  }
}

double roi_percent(double s, double w, int t_trim, const RoiParams& p) {
  p.validate();
  if (t_trim < 0) throw InputError("trimmer count cannot be negative");
  return (s + w) * p.profit_per_point * p.years / (p.base_cost + t_trim * p.trimmer_cost) * 100.0;
}

DesignScore score_from_cells(std::uint64_t design_id, std::vector<ScoreCell> cells,
                             std::vector<int> trim_lanes, const RoiParams& roi) {
  DesignScore d;
  d.design_id = design_id;
  double sum_s = 0, sum_w = 0;
  int n_s = 0, n_w = 0;
  for (const auto& c : cells) {
    if (c.season == kSummer) {
      sum_s += c.pct;
      ++n_s;
    } else if (c.season == kWinter) {
      sum_w += c.pct;
      ++n_w;
    }
  }
  if (n_s == 0 || n_w == 0) {
    throw InputError("design " + std::to_string(design_id) + " lacks summer or winter results");
  }
  d.s = sum_s / n_s;
  d.w = sum_w / n_w;
  std::sort(trim_lanes.begin(), trim_lanes.end());
  d.t_trim = static_cast<int>(trim_lanes.size());
  d.trim_lanes = std::move(trim_lanes);
  d.roi = roi_percent(d.s, d.w, d.t_trim, roi);
  d.cells = std::move(cells);
  return d;
}

DesignScore score_design(std::span<const PerformanceRecord> records, const PlantTopology& topology,
                         std::span<const Scenario> scenarios, const RoiParams& roi) {
  if (records.empty()) throw InputError("no performance records to score");
  const auto id = records.front().design_id;
  std::vector<ScoreCell> cells;
  for (const auto& sc : scenarios) {
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& rec : records) {
      if (rec.design_id != id) throw InputError("records from several designs passed to score_design");
      if (rec.scenario_id != sc.id) continue;
      for (const auto& r : rec.recipes) {
        auto& a = acc[r.recipe];
        a.first += r.pct_of_target;
        ++a.second;
      }
    }
    if (acc.empty()) {
      throw InputError("design " + std::to_string(id) + " has no results for scenario " + sc.id);
    }
    for (const auto& recipe : sc.recipes) {
      if (recipe.is_default) continue;
      const auto it = acc.find(recipe.id);
      if (it == acc.end()) {
        throw InputError("scenario " + sc.id + " results lack recipe " + recipe.id);
      }
      cells.push_back({sc.season, sc.id, recipe.id, it->second.first / it->second.second});
    }
  }
  return score_from_cells(id, std::move(cells), topology.trimmer_lanes(), roi);
}

std::vector<ObjectiveSpec> parse_objectives(const std::string& spec) {
  std::vector<ObjectiveSpec> out;
  for (const auto& raw : text::split(spec, ',')) {
    const auto item = text::trim(raw);
    if (item.empty()) continue;
    ObjectiveSpec o;
    const auto colon = item.rfind(':');
    if (colon == std::string::npos) {
      o.name = item;
    } else {
      o.name = text::trim(item.substr(0, colon));
      const auto sense = text::trim(item.substr(colon + 1));
      if (sense == "max") {
        o.sense = Sense::maximize;
      } else if (sense == "min") {
        o.sense = Sense::minimize;
      } else {
        throw InputError("objective sense must be max or min, got '" + sense + "'");
      }
    }
    out.push_back(std::move(o));
  }
  if (out.empty()) throw InputError("no objectives given");
  return out;
}

double objective_value(const DesignScore& score, const std::string& name) {
  if (name == "roi") return score.roi;
  if (name == "s") return score.s;
  if (name == "w") return score.w;
  if (name == "t_trim") return score.t_trim;
  // s[recipe] or w[recipe]
  if (name.size() > 3 && (name[0] == 's' || name[0] == 'w') && name[1] == '[' && name.back() == ']') {
    const std::string& season = name[0] == 's' ? kSummer : kWinter;
    const auto recipe = name.substr(2, name.size() - 3);
    double sum = 0;
    int n = 0;
    for (const auto& c : score.cells) {
      if (c.season == season && c.recipe == recipe) {
        sum += c.pct;
        ++n;
      }
    }
    if (n == 0) throw InputError("no " + season + " results for recipe " + recipe);
    return sum / n;
  }
  throw InputError("unknown objective '" + name + "'");
}

std::vector<bool> pareto_mask(const std::vector<std::vector<double>>& points,
                              std::span<const Sense> senses) {
  const std::size_t n = points.size();
  const std::size_t m = senses.size();
  // Everything is maximized internally.
  std::vector<std::vector<double>> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (points[i].size() != m) throw InputError("objective vectors differ in dimension");
    v[i].resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      if (std::isnan(points[i][k])) throw InputError("objective value is NaN");
      v[i][k] = senses[k] == Sense::maximize ? points[i][k] : -points[i][k];
    }
  }
  // After a lexicographically descending sort every dominator of a point
  // precedes it, so checking against the front found so far is enough.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });

  auto dominates = [&](const std::vector<double>& a, const std::vector<double>& b) {
    bool strict = false;
    for (std::size_t k = 0; k < m; ++k) {
      if (a[k] < b[k]) return false;
      if (a[k] > b[k]) strict = true;
    }
    return strict;
  };
  std::vector<bool> mask(n, false);
  std::vector<std::size_t> front;
  for (const auto i : order) {
    const bool beaten = std::any_of(front.begin(), front.end(),
                                    [&](std::size_t f) { return dominates(v[f], v[i]); });
    if (!beaten) {
      mask[i] = true;
      front.push_back(i);
    }
  }
  return mask;
}

void pareto_front(std::vector<ParetoLabel>& points, std::span<const Sense> senses) {
  std::vector<std::vector<double>> v;
  v.reserve(points.size());
  for (const auto& p : points) v.push_back(p.objectives);
  const auto mask = pareto_mask(v, senses);
  for (std::size_t i = 0; i < points.size(); ++i) points[i].is_pareto = mask[i];
}

void label_pareto(std::vector<DesignScore>& scores) {
  std::vector<std::vector<double>> swt, sw;
  for (const auto& d : scores) {
    swt.push_back({d.s, d.w, static_cast<double>(d.t_trim)});
    sw.push_back({d.s, d.w});
  }
  const Sense three[] = {Sense::maximize, Sense::maximize, Sense::minimize};
  const Sense two[] = {Sense::maximize, Sense::maximize};
  const auto m3 = pareto_mask(swt, three);
  const auto m2 = pareto_mask(sw, two);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i].pareto_swt = m3[i];
    scores[i].pareto_sw = m2[i];
  }
}

std::vector<DesignScore> rank_by_objective(std::vector<DesignScore> scores,
                                           const std::string& objective) {
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) keys.emplace_back(objective_value(scores[i], objective), i);
  std::stable_sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return scores[a.second].design_id < scores[b.second].design_id;
  });
  std::vector<DesignScore> out;
  out.reserve(scores.size());
  for (const auto& k : keys) out.push_back(std::move(scores[k.second]));
  return out;
}

Predicate Predicate::parse(const std::string& spec) {
  std::string s;
  for (char c : spec) {
    if (c != ' ' && c != '\t') s += c;
  }
  Predicate p;
  p.text_ = s;
  const std::string lane_prefix = "trim_in_lane(";
  const std::string count_prefix = "t_trim>=";
  try {
    if (s.rfind(lane_prefix, 0) == 0 && s.size() > lane_prefix.size() + 1 && s.back() == ')') {
      p.kind_ = Kind::trim_in_lane;
      p.value_ = static_cast<int>(
          text::parse_i64(s.substr(lane_prefix.size(), s.size() - lane_prefix.size() - 1)));
      return p;
    }
    if (s.rfind(count_prefix, 0) == 0) {
      p.kind_ = Kind::t_trim_at_least;
      p.value_ = static_cast<int>(text::parse_i64(s.substr(count_prefix.size())));
      return p;
    }
  } catch (const InputError&) {
  }
  throw InputError("cannot parse predicate '" + spec + "' (expected trim_in_lane(k) or t_trim>=n)");
}

bool Predicate::operator()(const DesignScore& score) const {
  switch (kind_) {
    case Kind::trim_in_lane:
      return std::find(score.trim_lanes.begin(), score.trim_lanes.end(), value_) !=
             score.trim_lanes.end();
    case Kind::t_trim_at_least:
      return score.t_trim >= value_;
  }
  return false;
}

std::vector<PartitionRow> partition_compare(std::span<const DesignScore> scores,
                                            const Predicate& predicate,
                                            const std::vector<ObjectiveSpec>& axes_in) {
  const auto axes = axes_in.empty()
                        ? std::vector<ObjectiveSpec>{{"s", Sense::maximize}, {"w", Sense::maximize}}
                        : axes_in;
  std::vector<Sense> senses;
  for (const auto& a : axes) senses.push_back(a.sense);

  std::vector<PartitionRow> rows;
  std::vector<std::vector<double>> all, in, out;
  for (const auto& d : scores) {
    PartitionRow r;
    r.design_id = d.design_id;
    r.in_subset = predicate(d);
    for (const auto& a : axes) r.objectives.push_back(objective_value(d, a.name));
    all.push_back(r.objectives);
    (r.in_subset ? in : out).push_back(r.objectives);
    rows.push_back(std::move(r));
  }
  const auto m_all = pareto_mask(all, senses);
  const auto m_in = pareto_mask(in, senses);
  const auto m_out = pareto_mask(out, senses);
  std::size_t ki = 0, ko = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].pareto_union = m_all[i];
    rows[i].pareto_subset = rows[i].in_subset ? m_in[ki++] : m_out[ko++];
  }
  return rows;
}

namespace {

std::string join_lanes(const std::vector<int>& lanes) {
  std::string s;
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(lanes[i]);
  }
  return s;
}

std::string cell_column(const ScoreCell& c) {
  return "pct:" + c.season + ":" + c.scenario_id + ":" + c.recipe;
}

}  // namespace

void write_scores_csv(std::span<const DesignScore> scores, std::ostream& out) {
  out << "design_id,s,w,t_trim,roi,pareto_swt,pareto_sw,trim_lanes";
  std::vector<std::string> columns;
  if (!scores.empty()) {
    for (const auto& c : scores.front().cells) columns.push_back(cell_column(c));
  }
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  for (const auto& d : scores) {
    if (d.cells.size() != columns.size()) throw InputError("scores disagree on their scenario cells");
    out << d.design_id << ',' << text::format_double(d.s) << ',' << text::format_double(d.w) << ','
        << d.t_trim << ',' << text::format_double(d.roi) << ',' << (d.pareto_swt ? 1 : 0) << ','
        << (d.pareto_sw ? 1 : 0) << ',' << join_lanes(d.trim_lanes);
    for (std::size_t k = 0; k < d.cells.size(); ++k) {
      if (cell_column(d.cells[k]) != columns[k]) throw InputError("scores disagree on their scenario cells");
      out << ',' << text::format_double(d.cells[k].pct);
    }
    out << '\n';
  }
}

std::vector<DesignScore> read_scores_csv(std::istream& in, const RoiParams& roi) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("scores file is empty");
  std::vector<std::string> header;
  for (const auto& h : text::split(line, ',')) header.push_back(text::trim(h));
  std::map<std::string, std::size_t> col;
  std::vector<std::pair<std::size_t, ScoreCell>> cell_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    col[header[i]] = i;
    if (header[i].rfind("pct:", 0) == 0) {
      const auto parts = text::split(header[i], ':');
      if (parts.size() < 4) throw InputError("malformed cell column '" + header[i] + "'");
      ScoreCell c;
      c.season = parts[1];
      c.recipe = parts.back();
      for (std::size_t k = 2; k + 1 < parts.size(); ++k) {
        if (k > 2) c.scenario_id += ':';
        c.scenario_id += parts[k];
      }
      cell_cols.emplace_back(i, c);
    }
  }
  for (const char* required : {"design_id", "s", "w", "t_trim"}) {
    if (!col.count(required)) throw InputError(std::string("scores file lacks column ") + required);
  }
  std::vector<DesignScore> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    std::vector<std::string> f;
    for (const auto& x : text::split(line, ',')) f.push_back(text::trim(x));
    if (f.size() != header.size()) {
      throw InputError("scores line " + std::to_string(line_no) + " has " + std::to_string(f.size()) +
                       " fields, expected " + std::to_string(header.size()));
    }
    DesignScore d;
    d.design_id = text::parse_u64(f[col["design_id"]]);
    d.s = text::parse_double(f[col["s"]]);
    d.w = text::parse_double(f[col["w"]]);
    d.t_trim = static_cast<int>(text::parse_i64(f[col["t_trim"]]));
    d.roi = col.count("roi") ? text::parse_double(f[col["roi"]]) : roi_percent(d.s, d.w, d.t_trim, roi);
    if (col.count("pareto_swt")) d.pareto_swt = f[col["pareto_swt"]] == "1";
    if (col.count("pareto_sw")) d.pareto_sw = f[col["pareto_sw"]] == "1";
    if (col.count("trim_lanes") && !f[col["trim_lanes"]].empty()) {
      for (const auto& l : text::split(f[col["trim_lanes"]], ';')) {
        d.trim_lanes.push_back(static_cast<int>(text::parse_i64(l)));
      }
    }
    for (const auto& [idx, proto] : cell_cols) {
      ScoreCell c = proto;
      c.pct = text::parse_double(f[idx]);
      d.cells.push_back(std::move(c));
    }
    out.push_back(std::move(d));
  }
  return out;
}

void write_pareto_csv(std::span<const ParetoLabel> labels, const std::vector<ObjectiveSpec>& axes,
                      std::ostream& out) {
  out << "design_id";
  for (const auto& a : axes) out << ',' << a.name;
  out << ",is_pareto\n";
  for (const auto& l : labels) {
    out << l.design_id;
    for (const double v : l.objectives) out << ',' << text::format_double(v);
    out << ',' << (l.is_pareto ? 1 : 0) << '\n';
  }
}

void write_partition_csv(std::span<const PartitionRow> rows, const std::vector<ObjectiveSpec>& axes,
                         const std::string& predicate, std::ostream& out) {
  out << "design_id,subset";
  for (const auto& a : axes) out << ',' << a.name;
  out << ",pareto_union,pareto_subset\n";
  for (const auto& r : rows) {
    out << r.design_id << ',' << (r.in_subset ? predicate : "not " + predicate);
    for (const double v : r.objectives) out << ',' << text::format_double(v);
    out << ',' << (r.pareto_union ? 1 : 0) << ',' << (r.pareto_subset ? 1 : 0) << '\n';
  }
}

void write_plot_csv(std::span<const DesignScore> scores, std::ostream& out) {
  out << "design_id,s,w,t_trim,highlight\n";
  for (const auto& d : scores) {
    out << d.design_id << ',' << text::format_double(d.s) << ',' << text::format_double(d.w) << ','
        << d.t_trim << ',' << (d.pareto_swt ? 1 : 0) << '\n';
  }
}

}  // namespace flowdse
