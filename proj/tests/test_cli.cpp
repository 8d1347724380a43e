#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "flowdse/cli.hpp"

using namespace flowdse;
namespace fs = std::filesystem;

namespace {

const std::string kData = FLOWDSE_DATA_DIR;
const std::string kDsm = kData + "/case_study_dsm.json";

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  const auto p = fs::temp_directory_path() / "flowdse_test_cli";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST_CASE("count") {
  const auto r = run({"count", "--dsm", kDsm});
  CHECK(r.code == 0);
  CHECK(r.out == "11520\n");
  const auto trims = run({"count", "--dsm", kDsm, "--design", kData + "/current_design.json", "--free",
                          "trim1,trim2,trim3,trim4,trim5"});
  CHECK(trims.out == "32\n");
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"count", "--bogus"}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"--version"}).code == kExitOk);
  CHECK(run({"count", "--dsm", "/no/such/file.json"}).code == kExitInput);
  CHECK(run({"count"}).code == kExitInput);
  const auto bad = run({"rank", "--scores", kData + "/../README.md", "--objective", "roi"});
  CHECK(bad.code == kExitInput);
  CHECK(bad.err.rfind("error: ", 0) == 0);
  CHECK(run({"enumerate", "--dsm", kDsm, "--out", "/no/such/dir/designs.csv"}).code == kExitRuntime);
}

TEST_CASE("rank and pareto on a scores file") {
  const auto dir = scratch();
  const auto scores = dir / "scores.csv";
  spit(scores, "design_id,s,w,t_trim\n1,50,50,0\n2,90,80,2\n3,60,70,1\n");
  const auto top = run({"rank", "--scores", scores.string(), "--objective", "roi", "--top", "1"});
  CHECK(top.code == 0);
  std::istringstream lines(top.out);
  std::string header, row, extra;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header.rfind("design_id,s,w,t_trim,roi", 0) == 0);
  CHECK(row.rfind("2,", 0) == 0);
  CHECK_FALSE(std::getline(lines, extra));

  spit(scores, "design_id,s,w,t_trim\n1,1,1,0\n2,2,2,0\n");
  const auto out = dir / "pareto.csv";
  CHECK(run({"pareto", "--scores", scores.string(), "--objectives", "s:max,w:max", "--out", out.string()}).code == 0);
  const auto first = slurp(out);
  CHECK(first == "design_id,s,w,is_pareto\n1,1,1,0\n2,2,2,1\n");
  // Same input, same bytes.
  CHECK(run({"pareto", "--scores", scores.string(), "--objectives", "s:max,w:max", "--out", out.string()}).code == 0);
  CHECK(slurp(out) == first);

  const auto cmp = dir / "compare.csv";
  CHECK(run({"compare", "--scores", scores.string(), "--predicate", "t_trim>=1", "--out", cmp.string()}).code == 0);
  CHECK(slurp(cmp).rfind("design_id,subset,s,w,pareto_union,pareto_subset\n", 0) == 0);
  CHECK(run({"compare", "--scores", scores.string(), "--predicate", "lane4", "--out", cmp.string()}).code ==
        kExitInput);
}

TEST_CASE("enumerate output counts back to the same number") {
  const auto dir = scratch();
  const auto listing = dir / "designs.csv";
  REQUIRE(run({"enumerate", "--dsm", kDsm, "--out", listing.string()}).code == 0);
  const auto text = slurp(listing);
  CHECK(text.rfind("design_id,connections\n0,", 0) == 0);
  const auto again = run({"count", "--dsm", kDsm, "--designs", listing.string()});
  CHECK(again.code == 0);
  CHECK(again.out == "11520\n");
}

TEST_CASE("simulate-one and a small exploration") {
  const auto dir = scratch();
  const auto rec = dir / "records.csv";
  const std::vector<std::string> base{"--dsm", kDsm, "--catalog", kData + "/case_study_catalog.json",
                                      "--scenarios", kData + "/scenarios.json"};
  auto args = std::vector<std::string>{"simulate-one"};
  args.insert(args.end(), base.begin(), base.end());
  for (const char* a : {"--design-id", "7549", "--scenario-id", "3", "--duration-s", "600", "--seed", "4", "-q",
                        "--out"}) {
    args.emplace_back(a);
  }
  args.push_back(rec.string());
  REQUIRE(run(args).code == 0);
  const auto first = slurp(rec);
  CHECK(first.rfind("design_id,scenario_id,replication,recipe_id", 0) == 0);
  CHECK(first.find("\n7549,3,0,batching1,") != std::string::npos);
  REQUIRE(run(args).code == 0);
  CHECK(slurp(rec) == first);

  const auto store = dir / "store";
  fs::remove_all(store);
  args = {"explore"};
  args.insert(args.end(), base.begin(), base.end());
  for (const char* a : {"--mode", "sample", "--k", "4", "--duration-s", "600", "--scenario-ids", "1,6", "-q",
                        "--out"}) {
    args.emplace_back(a);
  }
  args.push_back(store.string());
  REQUIRE(run(args).code == 0);
  CHECK(fs::exists(store / "manifest.json"));
  CHECK(fs::exists(store / "pareto.csv"));
  std::ifstream scores(store / "scores.csv");
  int rows = 0;
  std::string line;
  while (std::getline(scores, line)) ++rows;
  CHECK(rows == 5);
  CHECK(run({"explore", "--resume", "-q", "--out", store.string()}).code == 0);

  args.push_back("--mode");
  args.push_back("teleport");
  CHECK(run(args).code == kExitUsage);
  fs::remove_all(dir);
}
