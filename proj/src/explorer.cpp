#include "flowdse/explorer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "flowdse/dsm.hpp"
#include "flowdse/error.hpp"
#include "flowdse/plant.hpp"
#include "text.hpp"

#ifndef FLOWDSE_VERSION
#define FLOWDSE_VERSION "dev"
#endif

namespace flowdse {

namespace fs = std::filesystem;

std::string to_string(ExploreMode mode) {
  switch (mode) {
    case ExploreMode::exhaustive: return "exhaustive";
    case ExploreMode::sample: return "sample";
    case ExploreMode::satisfice: return "satisfice";
    case ExploreMode::listed: return "list";
  }
  return "?";
}

ExploreMode parse_explore_mode(const std::string& name) {
  if (name == "exhaustive") return ExploreMode::exhaustive;
  if (name == "sample") return ExploreMode::sample;
  if (name == "satisfice") return ExploreMode::satisfice;
  if (name == "list") return ExploreMode::listed;
  throw InputError("unknown exploration mode '" + name + "'");
}

bool Thresholds::met(const DesignScore& d) const {
  return (!s || d.s >= *s) && (!w || d.w >= *w) && (!roi || d.roi >= *roi);
}

namespace {

nlohmann::json thresholds_json(const Thresholds& t) {
  nlohmann::json j = nlohmann::json::object();
  if (t.s) j["s"] = *t.s;
  if (t.w) j["w"] = *t.w;
  if (t.roi) j["roi"] = *t.roi;
  return j;
}

nlohmann::json roi_json(const RoiParams& r) {
  return {{"profit_per_point", r.profit_per_point},
          {"years", r.years},
          {"base_cost", r.base_cost},
          {"trimmer_cost", r.trimmer_cost}};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& p, const std::string& content) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

void append_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + p.string());
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

// Drops a half-written last line left behind by an interrupted run.
std::string complete_lines(const fs::path& p) {
  if (!fs::exists(p)) return {};
  std::string s = read_file(p);
  const auto nl = s.rfind('\n');
  s.resize(nl == std::string::npos ? 0 : nl + 1);
  return s;
}

std::uint64_t leading_id(const std::string& line) {
  return text::parse_u64(line.substr(0, line.find(',')));
}

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const fs::path kManifest = "manifest.json";
const fs::path kRecords = "records.csv";
const fs::path kScores = "scores.csv";
const fs::path kPareto = "pareto.csv";

std::vector<Scenario> selected_scenarios(const ExplorationConfig& c) {
  auto all = load_scenarios(c.scenarios_path);
  if (c.scenario_ids.empty()) return all;
  std::vector<Scenario> out;
  for (const auto& id : c.scenario_ids) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const Scenario& s) { return s.id == id; });
    if (it == all.end()) throw InputError("unknown scenario id " + id);
    out.push_back(*it);
  }
  return out;
}

std::vector<Design> selected_designs(const ExplorationConfig& c, const DesignSpaceMatrix& dsm) {
  switch (c.mode) {
    case ExploreMode::sample:
      return sample_designs(dsm, c.sample_k, c.sample_seed);
    case ExploreMode::listed: {
      const std::set<std::uint64_t> wanted(c.design_ids.begin(), c.design_ids.end());
      std::vector<Design> out;
      for_each_design(dsm, [&](const Design& d) {
        if (wanted.count(d.id)) out.push_back(d);
        return out.size() < wanted.size();
      });
      if (out.size() != wanted.size()) throw InputError("design id out of range in the design list");
      return out;
    }
    case ExploreMode::exhaustive:
    case ExploreMode::satisfice:
      return enumerate_designs(dsm);
  }
  return {};
}

struct Job {
  const Design* design = nullptr;
  std::optional<PlantTopology> topology;
  RoutingTable routing;
  std::vector<PerformanceRecord> records;
  std::mutex mutex;
  std::string failure;
};

struct Unit {
  std::size_t job;
  std::size_t scenario;
  int replication;
};

}  // namespace

nlohmann::json to_json(const ExplorationConfig& c) {
  return {{"dsm", c.dsm_path.string()},
          {"scenarios", c.scenarios_path.string()},
          {"catalog", c.catalog_path.string()},
          {"sim", to_json(c.sim)},
          {"roi", roi_json(c.roi)},
          {"mode", to_string(c.mode)},
          {"sample_k", c.sample_k},
          {"sample_seed", c.sample_seed},
          {"thresholds", thresholds_json(c.thresholds)},
          {"design_ids", c.design_ids},
          {"scenario_ids", c.scenario_ids},
          {"workers", c.workers}};
}

ExplorationConfig parse_exploration_config(const nlohmann::json& j) {
  ExplorationConfig c;
  try {
    c.dsm_path = j.at("dsm").get<std::string>();
    c.scenarios_path = j.at("scenarios").get<std::string>();
    c.catalog_path = j.at("catalog").get<std::string>();
    c.sim = parse_sim_params(j.value("sim", nlohmann::json::object()));
    const auto r = j.value("roi", nlohmann::json::object());
    c.roi.profit_per_point = r.value("profit_per_point", c.roi.profit_per_point);
    c.roi.years = r.value("years", c.roi.years);
    c.roi.base_cost = r.value("base_cost", c.roi.base_cost);
    c.roi.trimmer_cost = r.value("trimmer_cost", c.roi.trimmer_cost);
    c.mode = parse_explore_mode(j.value("mode", std::string("exhaustive")));
    c.sample_k = j.value("sample_k", std::size_t{0});
    c.sample_seed = j.value("sample_seed", std::uint64_t{0});
    const auto t = j.value("thresholds", nlohmann::json::object());
    if (t.contains("s")) c.thresholds.s = t.at("s").get<double>();
    if (t.contains("w")) c.thresholds.w = t.at("w").get<double>();
    if (t.contains("roi")) c.thresholds.roi = t.at("roi").get<double>();
    c.design_ids = j.value("design_ids", std::vector<std::uint64_t>{});
    c.scenario_ids = j.value("scenario_ids", std::vector<std::string>{});
    c.workers = j.value("workers", std::size_t{1});
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("exploration config: ") + e.what());
  }
  return c;
}

std::string config_digest(const ExplorationConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("workers");
  j["dsm"] = text::hex64(text::fnv1a(read_file(c.dsm_path)));
  j["scenarios"] = text::hex64(text::fnv1a(read_file(c.scenarios_path)));
  j["catalog"] = text::hex64(text::fnv1a(read_file(c.catalog_path)));
  return text::hex64(text::fnv1a(j.dump()));
}

ResultStore load_store(const fs::path& dir) {
  ResultStore st;
  st.dir = dir;
  const auto manifest_text = read_file(dir / kManifest);
  try {
    st.manifest = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError((dir / kManifest).string() + ": " + e.what());
  }
  st.finished = st.manifest.value("finished", false);
  if (st.manifest.contains("satisfying_design") && !st.manifest["satisfying_design"].is_null()) {
    st.satisfying_design = st.manifest["satisfying_design"].get<std::uint64_t>();
  }
  for (const auto& f : st.manifest.value("failed", nlohmann::json::array())) {
    st.failed.push_back({f.at("design_id").get<std::uint64_t>(), f.at("reason").get<std::string>()});
  }
  const auto scores_text = complete_lines(dir / kScores);
  if (!scores_text.empty()) {
    std::istringstream in(scores_text);
    st.scores = read_scores_csv(in);
  }
  return st;
}

ResultStore explore(const ExplorationConfig& config_in, const ProgressFn& progress) {
  ExplorationConfig config = config_in;
  if (config.out_dir.empty()) throw InputError("exploration needs an output directory");
  if (config.workers < 1) throw InputError("worker count must be at least 1");
  if (config.mode == ExploreMode::sample && config.sample_k < 1) throw InputError("sample size must be positive");
  if (config.mode == ExploreMode::satisfice && !config.thresholds.any()) {
    throw InputError("satisfice mode needs at least one threshold");
  }
  config.sim.validate();
  config.roi.validate();
  config.dsm_path = fs::absolute(config.dsm_path);
  config.scenarios_path = fs::absolute(config.scenarios_path);
  config.catalog_path = fs::absolute(config.catalog_path);

  const auto dsm = load_dsm(config.dsm_path);
  const auto catalog = load_catalog(config.catalog_path);
  const auto scenarios = selected_scenarios(config);
  const auto digest = config_digest(config);

  const fs::path dir = config.out_dir;
  fs::create_directories(dir);

  // Pick up whatever an earlier session with the same configuration finished.
  std::map<std::uint64_t, DesignScore> done;
  nlohmann::json manifest;
  if (fs::exists(dir / kManifest)) {
    auto prior = load_store(dir);
    if (prior.manifest.value("config_digest", std::string()) != digest) {
      throw InputError("store " + dir.string() + " was written with a different configuration (digest " +
                       prior.manifest.value("config_digest", std::string("?")) + ", now " + digest + ")");
    }
    if (prior.finished) return prior;
    manifest = prior.manifest;
    for (auto& s : prior.scores) done.emplace(s.design_id, std::move(s));
    std::string kept;
    std::istringstream rec_in(complete_lines(dir / kRecords));
    std::string line;
    bool header = true;
    while (std::getline(rec_in, line)) {
      if (header || done.count(leading_id(line))) kept += line + '\n';
      header = false;
    }
    if (kept.empty()) kept = records_csv_header();
    write_file_atomic(dir / kRecords, kept);
    std::ostringstream sc;
    std::vector<DesignScore> prior_scores;
    for (const auto& [id, s] : done) prior_scores.push_back(s);
    write_scores_csv(prior_scores, sc);
    write_file_atomic(dir / kScores, done.empty() ? std::string() : sc.str());
  } else {
    write_file_atomic(dir / kRecords, records_csv_header());
    write_file_atomic(dir / kScores, std::string());
  }
  manifest["config"] = to_json(config);
  manifest["config_digest"] = digest;
  manifest["code_version"] = FLOWDSE_VERSION;
  manifest["seed"] = config.sim.seed;
  if (!manifest.contains("created_at")) manifest["created_at"] = now_utc();
  manifest["finished"] = false;
  write_file_atomic(dir / kManifest, manifest.dump(2) + "\n");

  const auto designs = selected_designs(config, dsm);
  std::optional<std::uint64_t> satisfier;
  if (config.mode == ExploreMode::satisfice) {
    for (const auto& [id, s] : done) {
      if (config.thresholds.met(s)) {
        satisfier = id;
        break;
      }
    }
  }
  std::vector<const Design*> pending;
  for (const auto& d : designs) {
    if (!done.count(d.id)) pending.push_back(&d);
  }

  std::vector<FailedDesign> failed;
  const std::size_t reps = static_cast<std::size_t>(config.sim.replications);
  const std::size_t chunk = config.mode == ExploreMode::satisfice
                                ? config.workers
                                : std::max<std::size_t>(32, 4 * config.workers);
  ExploreProgress prog{designs.size() - pending.size(), designs.size()};
  if (progress) progress(prog);

  for (std::size_t begin = 0; begin < pending.size() && !satisfier; begin += chunk) {
    const std::size_t end = std::min(pending.size(), begin + chunk);
    std::vector<Job> jobs(end - begin);
    std::vector<Unit> units;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      Job& job = jobs[k];
      job.design = pending[begin + k];
      try {
        job.topology = build_topology(*job.design, dsm, catalog);
        job.routing = derive_routings(*job.topology);
      } catch (const InputError& e) {
        job.failure = e.what();
        continue;
      }
      job.records.resize(scenarios.size() * reps);
      for (std::size_t s = 0; s < scenarios.size(); ++s) {
        for (std::size_t r = 0; r < reps; ++r) units.push_back({k, s, static_cast<int>(r)});
      }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      while (true) {
        const std::size_t u = next.fetch_add(1);
        if (u >= units.size()) return;
        const Unit& unit = units[u];
        Job& job = jobs[unit.job];
        try {
          job.records[unit.scenario * reps + static_cast<std::size_t>(unit.replication)] =
              run_simulation(*job.topology, job.routing, scenarios[unit.scenario], config.sim,
                             job.design->id, unit.replication);
        } catch (const std::exception& e) {
          const std::lock_guard lock(job.mutex);
          if (job.failure.empty()) job.failure = e.what();
        }
      }
    };
    const std::size_t n_threads = std::min(config.workers, std::max<std::size_t>(1, units.size()));
    if (n_threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }

    // Single writer: append in design order so the files never depend on
    // thread timing.
    std::string record_rows, score_rows;
    std::vector<DesignScore> chunk_scores;
    for (auto& job : jobs) {
      if (job.failure.empty()) {
        try {
          chunk_scores.push_back(score_design(job.records, *job.topology, scenarios, config.roi));
        } catch (const InputError& e) {
          job.failure = e.what();
        }
      }
      if (!job.failure.empty()) {
        failed.push_back({job.design->id, job.failure});
        continue;
      }
      for (const auto& rec : job.records) record_rows += to_csv_rows(rec);
      const bool stop = config.mode == ExploreMode::satisfice && config.thresholds.met(chunk_scores.back());
      if (stop) {
        satisfier = job.design->id;
        break;
      }
    }
    if (!chunk_scores.empty()) {
      std::ostringstream sc;
      write_scores_csv(chunk_scores, sc);
      std::string text_rows = sc.str();
      const bool need_header = done.empty();
      if (!need_header) text_rows.erase(0, text_rows.find('\n') + 1);
      score_rows = std::move(text_rows);
    }
    append_file(dir / kRecords, record_rows);
    append_file(dir / kScores, score_rows);
    for (auto& s : chunk_scores) done.emplace(s.design_id, std::move(s));
    prog.designs_done += end - begin;
    if (progress) progress(prog);
  }

  // Final pass: Pareto labels over everything completed, files in id order.
  ResultStore st;
  st.dir = dir;
  for (auto& [id, s] : done) st.scores.push_back(std::move(s));
  label_pareto(st.scores);
  std::sort(failed.begin(), failed.end(),
            [](const FailedDesign& a, const FailedDesign& b) { return a.design_id < b.design_id; });
  st.failed = failed;
  st.satisfying_design = satisfier;
  st.finished = true;

  std::ostringstream scores_out;
  write_scores_csv(st.scores, scores_out);
  write_file_atomic(dir / kScores, scores_out.str());

  std::vector<ParetoLabel> labels;
  for (const auto& s : st.scores) {
    labels.push_back({s.design_id, {s.s, s.w, static_cast<double>(s.t_trim)}, s.pareto_swt});
  }
  std::ostringstream pareto_out;
  write_pareto_csv(labels, parse_objectives("s:max,w:max,t_trim:min"), pareto_out);
  write_file_atomic(dir / kPareto, pareto_out.str());

  {
    std::istringstream rec_in(complete_lines(dir / kRecords));
    std::string header, line;
    std::getline(rec_in, header);
    std::vector<std::pair<std::uint64_t, std::string>> rows;
    while (std::getline(rec_in, line)) rows.emplace_back(leading_id(line), line);
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string out = header + '\n';
    for (const auto& r : rows) out += r.second + '\n';
    write_file_atomic(dir / kRecords, out);
  }

  manifest["finished"] = true;
  manifest["completed"] = st.scores.size();
  manifest["failed"] = nlohmann::json::array();
  for (const auto& f : st.failed) manifest["failed"].push_back({{"design_id", f.design_id}, {"reason", f.reason}});
  manifest["satisfying_design"] =
      satisfier ? nlohmann::json(*satisfier) : nlohmann::json(nullptr);
  manifest["pareto_swt"] = std::count_if(st.scores.begin(), st.scores.end(),
                                         [](const DesignScore& s) { return s.pareto_swt; });
  manifest["pareto_sw"] = std::count_if(st.scores.begin(), st.scores.end(),
                                        [](const DesignScore& s) { return s.pareto_sw; });
  manifest["finished_at"] = now_utc();
  write_file_atomic(dir / kManifest, manifest.dump(2) + "\n");
  st.manifest = manifest;
  return st;
}

ResultStore resume(const fs::path& store, std::size_t workers, const ProgressFn& progress) {
  const auto prior = load_store(store);
  if (!prior.manifest.contains("config")) throw InputError("manifest in " + store.string() + " has no config");
  auto config = parse_exploration_config(prior.manifest.at("config"));
  config.out_dir = store;
  if (workers) config.workers = workers;
  return explore(config, progress);
}

}  // namespace flowdse
