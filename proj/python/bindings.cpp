#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <sstream>

#include "flowdse/cli.hpp"
#include "flowdse/dsm.hpp"
#include "flowdse/error.hpp"
#include "flowdse/evaluate.hpp"
#include "flowdse/explorer.hpp"
#include "flowdse/plant.hpp"
#include "flowdse/scenario.hpp"
#include "flowdse/sim.hpp"

namespace py = pybind11;
using namespace flowdse;

namespace {

py::dict score_dict(const DesignScore& s) {
  py::dict d;
  d["design_id"] = s.design_id;
  d["s"] = s.s;
  d["w"] = s.w;
  d["t_trim"] = s.t_trim;
  d["trim_lanes"] = s.trim_lanes;
  d["roi"] = s.roi;
  d["pareto_swt"] = s.pareto_swt;
  d["pareto_sw"] = s.pareto_sw;
  py::dict cells;
  for (const auto& c : s.cells) cells[py::str(c.season + ":" + c.scenario_id + ":" + c.recipe)] = c.pct;
  d["cells"] = cells;
  return d;
}

py::dict record_dict(const PerformanceRecord& r) {
  py::dict d;
  d["design_id"] = r.design_id;
  d["scenario_id"] = r.scenario_id;
  d["replication"] = r.replication;
  d["generated_total"] = r.generated_total;
  d["delivered_after_warmup"] = r.delivered_after_warmup;
  d["trim_pieces"] = r.trim_pieces;
  d["trim_mass_g"] = r.trim_mass_g;
  d["performance"] = r.performance();
  py::dict recipes;
  for (const auto& st : r.recipes) {
    py::dict x;
    x["delivered"] = st.delivered;
    x["throughput_per_min"] = st.throughput_per_min;
    x["pct_of_target"] = st.pct_of_target;
    x["is_default"] = st.is_default;
    recipes[py::str(st.recipe)] = x;
  }
  d["recipes"] = recipes;
  return d;
}

Design design_by_id(const DesignSpaceMatrix& dsm, std::uint64_t id) {
  std::optional<Design> found;
  for_each_design(dsm, [&](const Design& d) {
    if (d.id != id) return true;
    found = d;
    return false;
  });
  if (!found) throw InputError("design id " + std::to_string(id) + " is out of range");
  return *found;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Design space exploration for flow-production plants";
  m.attr("__version__") = FLOWDSE_VERSION_STRING;

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

  m.def("count_designs", [](const std::filesystem::path& dsm) { return count_designs(load_dsm(dsm)); },
        py::arg("dsm"));

  m.def("design_connections",
        [](const std::filesystem::path& dsm, std::uint64_t design_id) {
          const auto matrix = load_dsm(dsm);
          return connection_labels(matrix, design_by_id(matrix, design_id));
        },
        py::arg("dsm"), py::arg("design_id"));

  m.def("simulate",
        [](const std::filesystem::path& dsm, const std::filesystem::path& catalog,
           const std::filesystem::path& scenarios, std::uint64_t design_id, const std::string& scenario_id,
           double duration_s, double warmup_s, int replications, std::uint64_t seed) {
          const auto matrix = load_dsm(dsm);
          const auto cat = load_catalog(catalog);
          const auto all = load_scenarios(scenarios);
          const auto it = std::find_if(all.begin(), all.end(), [&](const Scenario& s) { return s.id == scenario_id; });
          if (it == all.end()) throw InputError("unknown scenario id " + scenario_id);
          SimParams p;
          p.duration_s = duration_s;
          p.warmup_s = warmup_s;
          p.replications = replications;
          p.seed = seed;
          std::vector<PerformanceRecord> recs;
          {
            py::gil_scoped_release release;
            const auto topo = build_topology(design_by_id(matrix, design_id), matrix, cat);
            recs = replicate(topo, derive_routings(topo), *it, p, design_id);
          }
          py::list out;
          for (const auto& r : recs) out.append(record_dict(r));
          return out;
        },
        py::arg("dsm"), py::arg("catalog"), py::arg("scenarios"), py::arg("design_id"), py::arg("scenario_id"),
        py::arg("duration_s") = 3200.0, py::arg("warmup_s") = 200.0, py::arg("replications") = 1,
        py::arg("seed") = 0);

  m.def("explore",
        [](const std::string& config_json) {
          const auto config = parse_exploration_config(nlohmann::json::parse(config_json));
          ResultStore st;
          {
            py::gil_scoped_release release;
            st = explore(config);
          }
          py::dict out;
          py::list scores;
          for (const auto& s : st.scores) scores.append(score_dict(s));
          out["scores"] = scores;
          out["failed"] = st.failed.size();
          out["satisfying_design"] = st.satisfying_design ? py::cast(*st.satisfying_design) : py::none();
          out["dir"] = st.dir;
          return out;
        },
        py::arg("config_json"),
        "Runs an exploration described by a JSON configuration and returns its scores.");

  m.def("pareto_mask",
        [](const std::vector<std::vector<double>>& points, const std::vector<std::string>& senses) {
          std::vector<Sense> s;
          for (const auto& x : senses) {
            if (x == "max") {
              s.push_back(Sense::maximize);
            } else if (x == "min") {
              s.push_back(Sense::minimize);
            } else {
              throw InputError("sense must be 'max' or 'min'");
            }
          }
          return pareto_mask(points, s);
        },
        py::arg("points"), py::arg("senses"));

  m.def("roi_percent",
        [](double s, double w, int t_trim, double profit, double years, double base, double trimmer) {
          RoiParams p{profit, years, base, trimmer};
          p.validate();
          return roi_percent(s, w, t_trim, p);
        },
        py::arg("s"), py::arg("w"), py::arg("t_trim"), py::arg("profit_per_point") = 10000.0,
        py::arg("years") = 10.0, py::arg("base_cost") = 1e7, py::arg("trimmer_cost") = 50000.0);

  m.def("rank",
        [](const std::string& scores_csv, const std::string& objective) {
          std::istringstream in(scores_csv);
          py::list out;
          for (const auto& s : rank_by_objective(read_scores_csv(in), objective)) out.append(score_dict(s));
          return out;
        },
        py::arg("scores_csv"), py::arg("objective") = "roi");

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          int code;
          {
            py::gil_scoped_release release;
            code = run_cli(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line tool in process; returns (exit code, stdout, stderr).");
}
