#include "flowdse/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "flowdse/dsm.hpp"
#include "flowdse/error.hpp"
#include "flowdse/evaluate.hpp"
#include "flowdse/explorer.hpp"
#include "flowdse/plant.hpp"
#include "flowdse/scenario.hpp"
#include "flowdse/sim.hpp"
#include "text.hpp"

namespace flowdse {

namespace {

struct Options {
  std::string dsm, scenarios, catalog, config, out, scores;
  std::string design_file, scenario_id, objective = "roi", objectives, predicate, axes;
  std::string mode = "exhaustive", free_modules, designs_file, durations = "400,800,1600,3200";
  std::string design_ids, scenario_ids;
  std::optional<std::uint64_t> design_id, seed;
  std::optional<double> duration_s, warmup_s, min_s, min_w, min_roi;
  std::optional<int> reps;
  std::size_t workers = 1, k = 0, top = 0;
  bool resume = false, quiet = false;
};

std::ofstream open_out(const std::string& path) {
  if (path.empty()) throw InputError("--out is required");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

std::ifstream open_in(const std::string& path, const char* what) {
  if (path.empty()) throw InputError(std::string("missing ") + what);
  std::ifstream f(path);
  if (!f) throw InputError("cannot open " + path);
  return f;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw InputError(std::string(flag) + " is required");
}

SimParams sim_params(const Options& o) {
  SimParams p;
  if (!o.config.empty()) {
    auto in = open_in(o.config, "--config");
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(o.config + ": " + e.what());
    }
    p = parse_sim_params(doc);
  }
  if (o.duration_s) p.duration_s = *o.duration_s;
  if (o.warmup_s) p.warmup_s = *o.warmup_s;
  if (o.reps) p.replications = *o.reps;
  if (o.seed) p.seed = *o.seed;
  p.validate();
  return p;
}

Design chosen_design(const Options& o, const DesignSpaceMatrix& dsm) {
  if (!o.design_file.empty()) {
    auto in = open_in(o.design_file, "--design");
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(o.design_file + ": " + e.what());
    }
    std::vector<std::pair<std::string, std::string>> pairs;
    try {
      for (const auto& c : doc.at("connections")) {
        pairs.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(o.design_file + ": " + e.what());
    }
    Design d = make_design(dsm, pairs);
    d.id = find_design_id(dsm, d.connections).value_or(0);
    return d;
  }
  if (!o.design_id) throw InputError("--design-id or --design is required");
  std::optional<Design> found;
  for_each_design(dsm, [&](const Design& d) {
    if (d.id != *o.design_id) return true;
    found = d;
    return false;
  });
  if (!found) throw InputError("design id " + std::to_string(*o.design_id) + " is out of range");
  return *found;
}

const Scenario& chosen_scenario(const Options& o, const std::vector<Scenario>& all) {
  require(o.scenario_id, "--scenario-id");
  for (const auto& s : all) {
    if (s.id == o.scenario_id) return s;
  }
  throw InputError("unknown scenario id " + o.scenario_id);
}

std::set<std::string> split_set(const std::string& s) {
  std::set<std::string> out;
  for (const auto& x : text::split(s, ',')) {
    if (!text::trim(x).empty()) out.insert(text::trim(x));
  }
  return out;
}

std::vector<DesignScore> read_scores(const Options& o) {
  auto in = open_in(o.scores, "--scores");
  return read_scores_csv(in);
}

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.dsm, "--dsm");
  const auto dsm = load_dsm(o.dsm);
  for (const auto& w : dsm.warnings()) err << "warning: " << w << '\n';
  out << "ok " << dsm.outputs().size() << " outputs x " << dsm.inputs().size() << " inputs, "
      << dsm.allowed().size() << " allowed connections\n";
  if (!o.out.empty()) {
    auto f = open_out(o.out);
    if (o.out.size() > 4 && o.out.substr(o.out.size() - 4) == ".csv") {
      write_dsm_csv(dsm, f);
    } else {
      f << to_json(dsm).dump(2) << '\n';
    }
  }
  return kExitOk;
}

int cmd_count(const Options& o, std::ostream& out) {
  require(o.dsm, "--dsm");
  const auto dsm = load_dsm(o.dsm);
  if (!o.designs_file.empty()) {
    // Re-count an enumerate listing, checking every row against the matrix.
    auto in = open_in(o.designs_file, "--designs");
    std::string line;
    std::getline(in, line);
    std::uint64_t n = 0;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw InputError("malformed design row: " + line);
      std::vector<std::pair<std::string, std::string>> pairs;
      for (const auto& c : text::split(text::trim(line.substr(comma + 1)), ';')) {
        if (c.empty()) continue;
        const auto arrow = c.find('>');
        if (arrow == std::string::npos) throw InputError("malformed connection: " + c);
        pairs.emplace_back(c.substr(0, arrow), c.substr(arrow + 1));
      }
      make_design(dsm, pairs);
      ++n;
    }
    out << n << '\n';
    return kExitOk;
  }
  if (!o.free_modules.empty()) {
    const auto d = chosen_design(o, dsm);
    out << count_designs(dsm, freeze_except(dsm, d, split_set(o.free_modules))) << '\n';
    return kExitOk;
  }
  out << count_designs(dsm) << '\n';
  return kExitOk;
}

int cmd_enumerate(const Options& o) {
  require(o.dsm, "--dsm");
  const auto dsm = load_dsm(o.dsm);
  auto f = open_out(o.out);
  f << "design_id,connections\n";
  for_each_design(dsm, [&](const Design& d) {
    f << d.id << ',';
    bool first = true;
    for (const auto& [from, to] : connection_labels(dsm, d)) {
      if (!first) f << ';';
      f << from << '>' << to;
      first = false;
    }
    f << '\n';
    return true;
  });
  if (!f) throw std::runtime_error("write failed for " + o.out);
  return kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& err) {
  require(o.dsm, "--dsm");
  require(o.catalog, "--catalog");
  require(o.scenarios, "--scenarios");
  const auto dsm = load_dsm(o.dsm);
  const auto catalog = load_catalog(o.catalog);
  const auto scenarios = load_scenarios(o.scenarios);
  const auto& sc = chosen_scenario(o, scenarios);
  const auto params = sim_params(o);
  const auto design = chosen_design(o, dsm);
  const auto topo = build_topology(design, dsm, catalog);
  const auto routing = derive_routings(topo);
  const auto records = replicate(topo, routing, sc, params, design.id);
  auto f = open_out(o.out);
  f << records_csv_header();
  for (const auto& r : records) f << to_csv_rows(r);
  if (!o.quiet) {
    for (const auto& r : records) {
      err << "replication " << r.replication << ": " << r.generated_total << " fillets, performance "
          << text::format_double(r.performance()) << " %\n";
    }
  }
  return kExitOk;
}

int cmd_explore(const Options& o, std::ostream& err) {
  ProgressFn progress;
  if (!o.quiet) {
    progress = [&err](const ExploreProgress& p) {
      err << "explored " << p.designs_done << " / " << p.designs_total << " designs\n";
    };
  }
  ResultStore st;
  if (o.resume) {
    require(o.out, "--out");
    st = resume(o.out, o.workers, progress);
  } else {
    require(o.dsm, "--dsm");
    require(o.catalog, "--catalog");
    require(o.scenarios, "--scenarios");
    require(o.out, "--out");
    ExplorationConfig c;
    c.dsm_path = o.dsm;
    c.scenarios_path = o.scenarios;
    c.catalog_path = o.catalog;
    c.sim = sim_params(o);
    c.mode = parse_explore_mode(o.mode);
    c.sample_k = o.k;
    c.sample_seed = c.sim.seed;
    c.thresholds.s = o.min_s;
    c.thresholds.w = o.min_w;
    c.thresholds.roi = o.min_roi;
    for (const auto& id : split_set(o.design_ids)) c.design_ids.push_back(text::parse_u64(id));
    std::sort(c.design_ids.begin(), c.design_ids.end());
    for (const auto& s : text::split(o.scenario_ids, ',')) {
      if (!text::trim(s).empty()) c.scenario_ids.push_back(text::trim(s));
    }
    if (c.mode == ExploreMode::listed && c.design_ids.empty()) throw InputError("--design-ids is required for list mode");
    c.workers = o.workers;
    c.out_dir = o.out;
    st = explore(c, progress);
  }
  if (!o.quiet) {
    err << st.scores.size() << " designs scored, " << st.failed.size() << " failed\n";
    if (st.satisfying_design) err << "first satisfying design: " << *st.satisfying_design << '\n';
  }
  return kExitOk;
}

int cmd_sweep(const Options& o) {
  require(o.dsm, "--dsm");
  require(o.catalog, "--catalog");
  require(o.scenarios, "--scenarios");
  const auto dsm = load_dsm(o.dsm);
  const auto catalog = load_catalog(o.catalog);
  const auto scenarios = load_scenarios(o.scenarios);
  const auto& sc = chosen_scenario(o, scenarios);
  const auto params = sim_params(o);
  const auto design = chosen_design(o, dsm);
  const auto topo = build_topology(design, dsm, catalog);
  const auto routing = derive_routings(topo);
  std::vector<double> durations;
  for (const auto& d : text::split(o.durations, ',')) durations.push_back(text::parse_double(text::trim(d)));
  const auto rows = duration_sweep(topo, routing, sc, params, durations, o.reps.value_or(30), design.id);
  auto f = open_out(o.out);
  f << sweep_csv(rows);
  return kExitOk;
}

int cmd_pareto(const Options& o) {
  const auto scores = read_scores(o);
  const auto axes = parse_objectives(o.objectives.empty() ? "s:max,w:max,t_trim:min" : o.objectives);
  std::vector<Sense> senses;
  for (const auto& a : axes) senses.push_back(a.sense);
  std::vector<ParetoLabel> labels;
  for (const auto& s : scores) {
    ParetoLabel l;
    l.design_id = s.design_id;
    for (const auto& a : axes) l.objectives.push_back(objective_value(s, a.name));
    labels.push_back(std::move(l));
  }
  pareto_front(labels, senses);
  auto f = open_out(o.out.empty() ? "pareto.csv" : o.out);
  write_pareto_csv(labels, axes, f);
  return kExitOk;
}

int cmd_rank(const Options& o, std::ostream& out) {
  auto ranked = rank_by_objective(read_scores(o), o.objective);
  if (o.top && ranked.size() > o.top) ranked.resize(o.top);
  if (o.out.empty()) {
    write_scores_csv(ranked, out);
  } else {
    auto f = open_out(o.out);
    write_scores_csv(ranked, f);
  }
  return kExitOk;
}

int cmd_compare(const Options& o) {
  require(o.predicate, "--predicate");
  const auto scores = read_scores(o);
  const auto pred = Predicate::parse(o.predicate);
  const auto axes = parse_objectives(o.objectives.empty() ? "s:max,w:max" : o.objectives);
  const auto rows = partition_compare(scores, pred, axes);
  auto f = open_out(o.out);
  write_partition_csv(rows, axes, pred.text(), f);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Design space exploration for flow-production plants", "flowdse"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FLOWDSE_VERSION);
  Options o;

  auto add_dsm = [&](CLI::App* c) { c->add_option("--dsm", o.dsm, "Design space matrix (JSON or CSV)"); };
  auto add_inputs = [&](CLI::App* c) {
    add_dsm(c);
    c->add_option("--catalog", o.catalog, "Module catalog JSON");
    c->add_option("--scenarios", o.scenarios, "Scenario catalog JSON");
    c->add_option("--config", o.config, "Run configuration JSON");
  };
  auto add_sim = [&](CLI::App* c) {
    c->add_option("--duration-s", o.duration_s, "Simulated seconds per run");
    c->add_option("--warmup-s", o.warmup_s, "Seconds excluded from statistics");
    c->add_option("--reps", o.reps, "Replications");
    c->add_option("--seed", o.seed, "Global random seed");
  };
  auto add_design = [&](CLI::App* c) {
    c->add_option("--design-id", o.design_id, "Design id in enumeration order");
    c->add_option("--design", o.design_file, "Design JSON with a connections list");
  };
  auto add_quiet = [&](CLI::App* c) { c->add_flag("-q,--quiet", o.quiet, "No progress on stderr"); };

  auto* validate = app.add_subcommand("validate-dsm", "Check a design space matrix");
  add_dsm(validate);
  validate->add_option("--out", o.out, "Write the parsed matrix (.json or .csv)");

  auto* count = app.add_subcommand("count", "Count the valid designs");
  add_dsm(count);
  add_design(count);
  count->add_option("--free", o.free_modules,
                    "Comma-separated modules left free; everything else is pinned to --design/--design-id");
  count->add_option("--designs", o.designs_file, "Re-count an enumerate listing");

  auto* enumerate = app.add_subcommand("enumerate", "List every valid design");
  add_dsm(enumerate);
  enumerate->add_option("--out", o.out, "designs CSV")->required();

  auto* simulate = app.add_subcommand("simulate-one", "Simulate one design in one scenario");
  add_inputs(simulate);
  add_sim(simulate);
  add_design(simulate);
  add_quiet(simulate);
  simulate->add_option("--scenario-id", o.scenario_id, "Scenario id");
  simulate->add_option("--out", o.out, "records CSV")->required();

  auto* explore_cmd = app.add_subcommand("explore", "Explore the design space");
  add_inputs(explore_cmd);
  add_sim(explore_cmd);
  add_quiet(explore_cmd);
  explore_cmd->add_option("--mode", o.mode, "exhaustive, sample, satisfice or list")
      ->check(CLI::IsMember({"exhaustive", "sample", "satisfice", "list"}));
  explore_cmd->add_option("--k", o.k, "Sample size for sample mode");
  explore_cmd->add_option("--min-s", o.min_s, "Satisfice threshold on s");
  explore_cmd->add_option("--min-w", o.min_w, "Satisfice threshold on w");
  explore_cmd->add_option("--min-roi", o.min_roi, "Satisfice threshold on roi");
  explore_cmd->add_option("--design-ids", o.design_ids, "Comma-separated ids for list mode");
  explore_cmd->add_option("--scenario-ids", o.scenario_ids, "Comma-separated scenario subset");
  explore_cmd->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  explore_cmd->add_option("--out", o.out, "Store directory")->required();
  explore_cmd->add_flag("--resume", o.resume, "Continue the exploration recorded in --out");

  auto* sweep = app.add_subcommand("sweep-duration", "Replication study over run durations");
  add_inputs(sweep);
  add_sim(sweep);
  add_design(sweep);
  sweep->add_option("--scenario-id", o.scenario_id, "Scenario id");
  sweep->add_option("--durations", o.durations, "Comma-separated durations in seconds");
  sweep->add_option("--out", o.out, "sweep CSV")->required();

  auto* pareto = app.add_subcommand("pareto", "Label the Pareto front of a scores file");
  pareto->add_option("--scores", o.scores, "scores CSV")->required();
  pareto->add_option("--objectives", o.objectives, "e.g. s:max,w:max,t_trim:min");
  pareto->add_option("--out", o.out, "pareto CSV (default pareto.csv)");

  auto* rank = app.add_subcommand("rank", "Sort designs by one objective");
  rank->add_option("--scores", o.scores, "scores CSV")->required();
  rank->add_option("--objective", o.objective, "roi, s, w, t_trim, s[recipe] or w[recipe]");
  rank->add_option("--top", o.top, "Keep the first N rows");
  rank->add_option("--out", o.out, "Write to a file instead of stdout");

  auto* compare = app.add_subcommand("compare", "Pareto fronts of two design subsets");
  compare->add_option("--scores", o.scores, "scores CSV")->required();
  compare->add_option("--predicate", o.predicate, "trim_in_lane(k) or t_trim>=n")->required();
  compare->add_option("--objectives", o.objectives, "Axes, default s:max,w:max");
  compare->add_option("--out", o.out, "comparison CSV")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(o, out, err);
    if (count->parsed()) return cmd_count(o, out);
    if (enumerate->parsed()) return cmd_enumerate(o);
    if (simulate->parsed()) return cmd_simulate(o, err);
    if (explore_cmd->parsed()) return cmd_explore(o, err);
    if (sweep->parsed()) return cmd_sweep(o);
    if (pareto->parsed()) return cmd_pareto(o);
    if (rank->parsed()) return cmd_rank(o, out);
    if (compare->parsed()) return cmd_compare(o);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace flowdse
