#include "flowdse/dsm.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "flowdse/error.hpp"
#include "text.hpp"

namespace flowdse {

namespace {

std::string describe(const PortRef& p) {
  return p.label() + (p.direction == Direction::output ? " (output)" : " (input)");
}

void check_unique(const std::vector<PortRef>& ports) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : ports) {
    if (!seen.emplace(p.module, p.port).second) {
      throw InputError("duplicate port " + describe(p));
    }
  }
}

std::optional<std::size_t> find_label(const std::vector<PortRef>& ports, std::string_view label) {
  for (std::size_t i = 0; i < ports.size(); ++i) {
    if (ports[i].label() == label) return i;
  }
  return std::nullopt;
}

PortRef split_label(std::string_view label, Direction dir) {
  const auto dot = label.rfind('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == label.size()) {
    throw InputError("port label '" + std::string(label) + "' is not of the form module.port");
  }
  return {std::string(label.substr(0, dot)), std::string(label.substr(dot + 1)), dir};
}

}  // namespace

DesignSpaceMatrix::DesignSpaceMatrix(std::vector<PortRef> outputs, std::vector<PortRef> inputs,
                                     std::vector<Connection> allowed,
                                     std::vector<PortBounds> output_bounds,
                                     std::vector<PortBounds> input_bounds,
                                     std::set<std::string> all_or_none_modules)
    : outputs_(std::move(outputs)),
      inputs_(std::move(inputs)),
      allowed_(std::move(allowed)),
      output_bounds_(std::move(output_bounds)),
      input_bounds_(std::move(input_bounds)),
      all_or_none_(std::move(all_or_none_modules)) {
  for (auto& p : outputs_) p.direction = Direction::output;
  for (auto& p : inputs_) p.direction = Direction::input;
  check_unique(outputs_);
  check_unique(inputs_);
  if (output_bounds_.size() != outputs_.size() || input_bounds_.size() != inputs_.size()) {
    throw InputError("bounds must be given for every port");
  }
  std::sort(allowed_.begin(), allowed_.end());
  for (std::size_t k = 0; k < allowed_.size(); ++k) {
    const auto& c = allowed_[k];
    if (c.output >= outputs_.size() || c.input >= inputs_.size()) {
      throw InputError("allowed entry [" + std::to_string(c.output) + ", " +
                       std::to_string(c.input) + "] is out of range");
    }
    if (k > 0 && allowed_[k - 1] == c) {
      throw InputError("duplicate allowed entry " + outputs_[c.output].label() + " -> " +
                       inputs_[c.input].label());
    }
  }

  std::vector<int> row(outputs_.size(), 0);
  std::vector<int> col(inputs_.size(), 0);
  for (const auto& c : allowed_) {
    ++row[c.output];
    ++col[c.input];
  }
  auto check = [this](const PortRef& p, const PortBounds& b, int cells) {
    if (b.min_connections < 0 || b.max_connections < 0) {
      throw InputError("negative bound on port " + describe(p));
    }
    if (b.min_connections > b.max_connections) {
      throw InputError("min > max on port " + describe(p));
    }
    if (b.min_connections > cells) {
      throw InputError("port " + describe(p) + " needs at least " +
                       std::to_string(b.min_connections) + " connections but only " +
                       std::to_string(cells) + " are allowed");
    }
    if (b.max_connections > cells) {
      warnings_.push_back("port " + describe(p) + " allows up to " +
                          std::to_string(b.max_connections) + " connections but only " +
                          std::to_string(cells) + " cells are allowed");
    }
  };
  for (std::size_t o = 0; o < outputs_.size(); ++o) check(outputs_[o], output_bounds_[o], row[o]);
  for (std::size_t i = 0; i < inputs_.size(); ++i) check(inputs_[i], input_bounds_[i], col[i]);
}

bool DesignSpaceMatrix::is_allowed(std::size_t output, std::size_t input) const {
  return allowed_index({output, input}).has_value();
}

std::optional<std::size_t> DesignSpaceMatrix::find_output(std::string_view label) const {
  return find_label(outputs_, label);
}

std::optional<std::size_t> DesignSpaceMatrix::find_input(std::string_view label) const {
  return find_label(inputs_, label);
}

std::optional<std::size_t> DesignSpaceMatrix::allowed_index(Connection c) const {
  const auto it = std::lower_bound(allowed_.begin(), allowed_.end(), c);
  if (it == allowed_.end() || *it != c) return std::nullopt;
  return static_cast<std::size_t>(it - allowed_.begin());
}

// ---------------------------------------------------------------------------
// Serialization

DesignSpaceMatrix parse_dsm(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InputError("DSM document must be a JSON object");
  auto ports = [&doc](const char* key, Direction dir) {
    if (!doc.contains(key) || !doc.at(key).is_array()) {
      throw InputError(std::string("DSM document needs an array '") + key + "'");
    }
    std::vector<PortRef> out;
    for (const auto& p : doc.at(key)) {
      if (!p.is_object() || !p.contains("module") || !p.contains("port") ||
          !p.at("module").is_string() || !p.at("port").is_string()) {
        throw InputError(std::string("entries of '") + key +
                         "' must be objects with string 'module' and 'port'");
      }
      out.push_back({p.at("module").get<std::string>(), p.at("port").get<std::string>(), dir});
    }
    return out;
  };
  auto outputs = ports("output_ports", Direction::output);
  auto inputs = ports("input_ports", Direction::input);
  check_unique(outputs);
  check_unique(inputs);

  std::vector<Connection> allowed;
  if (!doc.contains("allowed") || !doc.at("allowed").is_array()) {
    throw InputError("DSM document needs an array 'allowed'");
  }
  for (const auto& cell : doc.at("allowed")) {
    if (!cell.is_array() || cell.size() != 2 || !cell[0].is_number_integer() ||
        !cell[1].is_number_integer() || cell[0].get<long long>() < 0 || cell[1].get<long long>() < 0) {
      throw InputError("allowed entries must be [out_index, in_index] pairs");
    }
    allowed.push_back({cell[0].get<std::size_t>(), cell[1].get<std::size_t>()});
  }

  std::vector<int> row(outputs.size(), 0);
  std::vector<int> col(inputs.size(), 0);
  for (const auto& c : allowed) {
    if (c.output < row.size()) ++row[c.output];
    if (c.input < col.size()) ++col[c.input];
  }
  // Unlisted ports default to 0..(number of allowed cells).
  std::vector<PortBounds> out_bounds(outputs.size());
  std::vector<PortBounds> in_bounds(inputs.size());
  for (std::size_t o = 0; o < outputs.size(); ++o) out_bounds[o] = {0, row[o]};
  for (std::size_t i = 0; i < inputs.size(); ++i) in_bounds[i] = {0, col[i]};

  if (doc.contains("bounds")) {
    const auto& bounds = doc.at("bounds");
    if (!bounds.is_object()) throw InputError("'bounds' must be an object");
    for (const auto& [label, b] : bounds.items()) {
      if (!b.is_object() || !b.contains("min") || !b.contains("max") ||
          !b.at("min").is_number_integer() || !b.at("max").is_number_integer()) {
        throw InputError("bounds for " + label + " must be {min, max} integers");
      }
      const PortBounds pb{b.at("min").get<int>(), b.at("max").get<int>()};
      const auto o = find_label(outputs, label);
      const auto i = find_label(inputs, label);
      if (!o && !i) throw InputError("bounds reference unknown port " + label);
      if (o && i) throw InputError("bounds label " + label + " is ambiguous");
      if (o) out_bounds[*o] = pb;
      if (i) in_bounds[*i] = pb;
    }
  }

  std::set<std::string> aon;
  if (doc.contains("all_or_none_modules")) {
    for (const auto& m : doc.at("all_or_none_modules")) {
      if (!m.is_string()) throw InputError("all_or_none_modules must contain strings");
      aon.insert(m.get<std::string>());
    }
  }
  return {std::move(outputs), std::move(inputs), std::move(allowed), std::move(out_bounds),
          std::move(in_bounds), std::move(aon)};
}

DesignSpaceMatrix parse_dsm_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(text::split(line, ','));
  }
  if (rows.empty()) throw InputError("empty DSM CSV");
  const auto& header = rows.front();
  if (header.size() < 3 || header[header.size() - 2] != "min" || header.back() != "max") {
    throw InputError("DSM CSV header must end with min,max columns");
  }
  const std::size_t n_in = header.size() - 3;
  std::vector<PortRef> inputs;
  for (std::size_t j = 0; j < n_in; ++j) inputs.push_back(split_label(header[j + 1], Direction::input));

  std::vector<PortRef> outputs;
  std::vector<Connection> allowed;
  std::vector<PortBounds> out_bounds;
  std::vector<PortBounds> in_bounds(n_in);
  std::set<std::string> aon;
  bool have_min = false;
  bool have_max = false;
  auto to_int = [](const std::string& s, const std::string& where) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InputError("bad integer '" + s + "' in " + where);
    }
  };
  for (std::size_t r = 1; r < rows.size(); ++r) {
    auto cells = rows[r];
    const std::string& head = cells.front();
    if (head == "all_or_none") {
      for (std::size_t c = 1; c < cells.size(); ++c) {
        if (!cells[c].empty()) aon.insert(cells[c]);
      }
      continue;
    }
    cells.resize(std::max(cells.size(), n_in + 1), "");
    if (head == "min" || head == "max") {
      for (std::size_t j = 0; j < n_in; ++j) {
        const int v = to_int(cells[j + 1], head + " row of " + inputs[j].label());
        (head == "min" ? in_bounds[j].min_connections : in_bounds[j].max_connections) = v;
      }
      (head == "min" ? have_min : have_max) = true;
      continue;
    }
    if (cells.size() != n_in + 3) {
      throw InputError("row " + head + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(n_in + 3));
    }
    const std::size_t o = outputs.size();
    outputs.push_back(split_label(head, Direction::output));
    for (std::size_t j = 0; j < n_in; ++j) {
      const auto& v = cells[j + 1];
      if (v.empty() || v == "0") continue;
      if (v == "1" || v == "x" || v == "X") {
        allowed.push_back({o, j});
      } else {
        throw InputError("bad cell '" + v + "' in row " + head);
      }
    }
    out_bounds.push_back({to_int(cells[n_in + 1], "min of " + head),
                          to_int(cells[n_in + 2], "max of " + head)});
  }
  if (!have_min || !have_max) throw InputError("DSM CSV needs trailing min and max rows");
  return {std::move(outputs), std::move(inputs), std::move(allowed), std::move(out_bounds),
          std::move(in_bounds), std::move(aon)};
}

DesignSpaceMatrix load_dsm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  if (path.extension() == ".csv") return parse_dsm_csv(in);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return parse_dsm(doc);
}

nlohmann::json to_json(const DesignSpaceMatrix& dsm) {
  nlohmann::json doc;
  auto ports = [](const std::vector<PortRef>& ps) {
    auto arr = nlohmann::json::array();
    for (const auto& p : ps) arr.push_back({{"module", p.module}, {"port", p.port}});
    return arr;
  };
  doc["output_ports"] = ports(dsm.outputs());
  doc["input_ports"] = ports(dsm.inputs());
  auto allowed = nlohmann::json::array();
  for (const auto& c : dsm.allowed()) allowed.push_back({c.output, c.input});
  doc["allowed"] = allowed;
  auto bounds = nlohmann::json::object();
  for (std::size_t o = 0; o < dsm.outputs().size(); ++o) {
    const auto& b = dsm.output_bounds(o);
    bounds[dsm.outputs()[o].label()] = {{"min", b.min_connections}, {"max", b.max_connections}};
  }
  for (std::size_t i = 0; i < dsm.inputs().size(); ++i) {
    const auto& b = dsm.input_bounds(i);
    bounds[dsm.inputs()[i].label()] = {{"min", b.min_connections}, {"max", b.max_connections}};
  }
  doc["bounds"] = bounds;
  doc["all_or_none_modules"] = dsm.all_or_none_modules();
  return doc;
}

void write_dsm_csv(const DesignSpaceMatrix& dsm, std::ostream& out) {
  const auto& ins = dsm.inputs();
  out << "";
  for (const auto& p : ins) out << ',' << p.label();
  out << ",min,max\n";
  for (std::size_t o = 0; o < dsm.outputs().size(); ++o) {
    out << dsm.outputs()[o].label();
    for (std::size_t i = 0; i < ins.size(); ++i) out << ',' << (dsm.is_allowed(o, i) ? "1" : "");
    out << ',' << dsm.output_bounds(o).min_connections << ','
        << dsm.output_bounds(o).max_connections << '\n';
  }
  out << "min";
  for (std::size_t i = 0; i < ins.size(); ++i) out << ',' << dsm.input_bounds(i).min_connections;
  out << ",,\nmax";
  for (std::size_t i = 0; i < ins.size(); ++i) out << ',' << dsm.input_bounds(i).max_connections;
  out << ",,\n";
  if (!dsm.all_or_none_modules().empty()) {
    out << "all_or_none";
    for (const auto& m : dsm.all_or_none_modules()) out << ',' << m;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Enumeration

namespace {

// Depth-first search over the allowed cells in row-major order. Each cell is
// tried cleared before set, which yields the designs in ascending
// lexicographic order of their connection bitvectors. Branches are cut as soon
// as a port bound or an all-or-none module can no longer be satisfied.
class Enumerator {
 public:
  Enumerator(const DesignSpaceMatrix& dsm, const CellConstraints& constraints, bool materialize,
             const std::function<bool(const Design&)>& visit)
      : dsm_(dsm),
        constraints_(constraints),
        materialize_(materialize),
        visit_(visit),
        cells_(dsm.allowed()),
        bits_(cells_.size(), 0),
        out_count_(dsm.outputs().size(), 0),
        in_count_(dsm.inputs().size(), 0),
        out_left_(dsm.outputs().size(), 0),
        in_left_(dsm.inputs().size(), 0),
        out_group_(dsm.outputs().size(), -1),
        in_group_(dsm.inputs().size(), -1) {
    if (!constraints_.empty() && constraints_.size() != cells_.size()) {
      throw InputError("cell constraints do not match the matrix");
    }
    for (const auto& c : cells_) {
      ++out_left_[c.output];
      ++in_left_[c.input];
    }
    std::map<std::string, int> index;
    for (const auto& m : dsm.all_or_none_modules()) {
      index.emplace(m, static_cast<int>(groups_.size()));
      groups_.emplace_back();
    }
    for (std::size_t o = 0; o < dsm.outputs().size(); ++o) {
      if (auto it = index.find(dsm.outputs()[o].module); it != index.end()) {
        out_group_[o] = it->second;
        groups_[it->second].outputs.push_back(o);
      }
    }
    for (std::size_t i = 0; i < dsm.inputs().size(); ++i) {
      if (auto it = index.find(dsm.inputs()[i].module); it != index.end()) {
        in_group_[i] = it->second;
        groups_[it->second].inputs.push_back(i);
      }
    }
  }

  std::uint64_t run() {
    // Ports without any allowed cell are decided from the start.
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      if (!group_consistent(static_cast<int>(g))) return 0;
    }
    descend(0);
    return produced_;
  }

 private:
  struct Group {
    std::vector<std::size_t> outputs;
    std::vector<std::size_t> inputs;
  };

  bool group_consistent(int g) const {
    if (g < 0) return true;
    bool connected = false;
    bool empty = false;
    for (auto o : groups_[g].outputs) {
      if (out_count_[o] > 0) connected = true;
      else if (out_left_[o] == 0) empty = true;
    }
    for (auto i : groups_[g].inputs) {
      if (in_count_[i] > 0) connected = true;
      else if (in_left_[i] == 0) empty = true;
    }
    return !(connected && empty);
  }

  // Returns false once the visitor asked to stop.
  bool descend(std::size_t k) {
    if (k == cells_.size()) return emit();
    const auto [o, i] = cells_[k];
    const auto pinned = constraints_.empty() ? std::nullopt : constraints_[k];
    --out_left_[o];
    --in_left_[i];
    bool keep_going = true;
    if (!pinned || !*pinned) {
      if (out_count_[o] + out_left_[o] >= dsm_.output_bounds(o).min_connections &&
          in_count_[i] + in_left_[i] >= dsm_.input_bounds(i).min_connections &&
          group_consistent(out_group_[o]) && group_consistent(in_group_[i])) {
        keep_going = descend(k + 1);
      }
    }
    if (keep_going && (!pinned || *pinned)) {
      if (out_count_[o] < dsm_.output_bounds(o).max_connections &&
          in_count_[i] < dsm_.input_bounds(i).max_connections) {
        ++out_count_[o];
        ++in_count_[i];
        bits_[k] = 1;
        if (group_consistent(out_group_[o]) && group_consistent(in_group_[i])) {
          keep_going = descend(k + 1);
        }
        bits_[k] = 0;
        --out_count_[o];
        --in_count_[i];
      }
    }
    ++out_left_[o];
    ++in_left_[i];
    return keep_going;
  }

  bool emit() {
    const std::uint64_t id = produced_++;
    if (!visit_) return true;
    Design d;
    d.id = id;
    if (materialize_) {
      for (std::size_t k = 0; k < cells_.size(); ++k) {
        if (!bits_[k]) continue;
        d.connections.push_back(cells_[k]);
        d.active_modules.insert(dsm_.outputs()[cells_[k].output].module);
        d.active_modules.insert(dsm_.inputs()[cells_[k].input].module);
      }
    }
    return visit_(d);
  }

  const DesignSpaceMatrix& dsm_;
  const CellConstraints& constraints_;
  bool materialize_;
  const std::function<bool(const Design&)>& visit_;
  const std::vector<Connection>& cells_;
  std::vector<char> bits_;
  std::vector<int> out_count_, in_count_, out_left_, in_left_;
  std::vector<int> out_group_, in_group_;
  std::vector<Group> groups_;
  std::uint64_t produced_ = 0;
};

}  // namespace

std::uint64_t for_each_design(const DesignSpaceMatrix& dsm,
                              const std::function<bool(const Design&)>& visit,
                              const CellConstraints& constraints) {
  return Enumerator(dsm, constraints, true, visit).run();
}

std::vector<Design> enumerate_designs(const DesignSpaceMatrix& dsm) {
  std::vector<Design> out;
  for_each_design(dsm, [&out](const Design& d) {
    out.push_back(d);
    return true;
  });
  return out;
}

std::uint64_t count_designs(const DesignSpaceMatrix& dsm, const CellConstraints& constraints) {
  const std::function<bool(const Design&)> none;
  return Enumerator(dsm, constraints, false, none).run();
}

std::vector<Design> sample_designs(const DesignSpaceMatrix& dsm, std::size_t k,
                                   std::uint64_t seed) {
  std::vector<Design> reservoir;
  if (k == 0) return reservoir;
  reservoir.reserve(k);
  std::mt19937_64 rng(seed);
  std::uint64_t seen = 0;
  for_each_design(dsm, [&](const Design& d) {
    if (seen < k) {
      reservoir.push_back(d);
    } else {
      // uniform index in [0, seen]
      const std::uint64_t j = std::uniform_int_distribution<std::uint64_t>(0, seen)(rng);
      if (j < k) reservoir[j] = d;
    }
    ++seen;
    return true;
  });
  std::sort(reservoir.begin(), reservoir.end(),
            [](const Design& a, const Design& b) { return a.id < b.id; });
  return reservoir;
}

CellConstraints freeze_except(const DesignSpaceMatrix& dsm, const Design& design,
                              const std::set<std::string>& modules) {
  const auto& cells = dsm.allowed();
  std::vector<char> out_free(dsm.outputs().size(), 0);
  std::vector<char> in_free(dsm.inputs().size(), 0);
  for (const auto& c : cells) {
    if (modules.count(dsm.outputs()[c.output].module) ||
        modules.count(dsm.inputs()[c.input].module)) {
      out_free[c.output] = 1;
      in_free[c.input] = 1;
    }
  }
  std::set<Connection> chosen(design.connections.begin(), design.connections.end());
  CellConstraints constraints(cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (!out_free[cells[k].output] && !in_free[cells[k].input]) {
      constraints[k] = chosen.count(cells[k]) > 0;
    }
  }
  return constraints;
}

bool is_valid_design(const DesignSpaceMatrix& dsm, const std::vector<Connection>& connections) {
  std::vector<int> out_count(dsm.outputs().size(), 0);
  std::vector<int> in_count(dsm.inputs().size(), 0);
  std::set<Connection> seen;
  for (const auto& c : connections) {
    if (c.output >= out_count.size() || c.input >= in_count.size()) return false;
    if (!dsm.is_allowed(c.output, c.input) || !seen.insert(c).second) return false;
    ++out_count[c.output];
    ++in_count[c.input];
  }
  std::map<std::string, std::pair<bool, bool>> modules;  // connected, empty
  for (std::size_t o = 0; o < out_count.size(); ++o) {
    const auto& b = dsm.output_bounds(o);
    if (out_count[o] < b.min_connections || out_count[o] > b.max_connections) return false;
    auto& m = modules[dsm.outputs()[o].module];
    (out_count[o] > 0 ? m.first : m.second) = true;
  }
  for (std::size_t i = 0; i < in_count.size(); ++i) {
    const auto& b = dsm.input_bounds(i);
    if (in_count[i] < b.min_connections || in_count[i] > b.max_connections) return false;
    auto& m = modules[dsm.inputs()[i].module];
    (in_count[i] > 0 ? m.first : m.second) = true;
  }
  for (const auto& name : dsm.all_or_none_modules()) {
    const auto it = modules.find(name);
    if (it != modules.end() && it->second.first && it->second.second) return false;
  }
  return true;
}

Design make_design(const DesignSpaceMatrix& dsm,
                   const std::vector<std::pair<std::string, std::string>>& connections,
                   std::uint64_t id) {
  Design d;
  d.id = id;
  for (const auto& [from, to] : connections) {
    const auto o = dsm.find_output(from);
    const auto i = dsm.find_input(to);
    if (!o) throw InputError("unknown output port " + from);
    if (!i) throw InputError("unknown input port " + to);
    if (!dsm.is_allowed(*o, *i)) throw InputError("connection " + from + " -> " + to + " is not allowed");
    d.connections.push_back({*o, *i});
    d.active_modules.insert(dsm.outputs()[*o].module);
    d.active_modules.insert(dsm.inputs()[*i].module);
  }
  std::sort(d.connections.begin(), d.connections.end());
  if (!is_valid_design(dsm, d.connections)) {
    throw InputError("connection set violates the matrix bounds or the all-or-none rule");
  }
  return d;
}

std::optional<std::uint64_t> find_design_id(const DesignSpaceMatrix& dsm,
                                            const std::vector<Connection>& connections) {
  auto wanted = connections;
  std::sort(wanted.begin(), wanted.end());
  std::optional<std::uint64_t> found;
  for_each_design(dsm, [&](const Design& d) {
    if (d.connections == wanted) {
      found = d.id;
      return false;
    }
    return true;
  });
  return found;
}

std::vector<std::pair<std::string, std::string>> connection_labels(const DesignSpaceMatrix& dsm,
                                                                   const Design& design) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(design.connections.size());
  for (const auto& c : design.connections) {
    out.emplace_back(dsm.outputs()[c.output].label(), dsm.inputs()[c.input].label());
  }
  return out;
}

}  // namespace flowdse
