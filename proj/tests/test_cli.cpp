/*
 * Copyright 2026 The cachesimo Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cachesimo/config.hpp"
#include "cachesimo/experiments.hpp"

using namespace cachesimo;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  static std::random_device rd;
  fs::path dir = fs::temp_directory_path() / ("cachesimo_" + tag + "_" + std::to_string(rd()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::string kCli = CACHESIMO_CLI;

const char* kBase = R"(# small MRC experiment
name = "base"
alpha = 4
lambda_h = 1e-3
M = 2
N = 5
zipf_gamma = 1.0
C = 3
T = [1, 0.8, 0.6, 0.4, 0.2]
sweep = "tau_db"
grid = [-5, 0, 5]
)";

}  // namespace

TEST_CASE("parser reads the flat syntax", "[cli][config]") {
  const auto m = config::parse(
      "a = 1\n"
      "b = -2.5e-3   # trailing comment\n"
      "\n"
      "  # whole-line comment\n"
      "c = \"x # not a comment\\n\"\n"
      "d = true\n"
      "e = [1, 2.5, 3]\n"
      "f = mrc\n"
      "g = [\"p\", q]\n");
  CHECK(m.integer("a") == 1);
  CHECK(m.number("a") == 1.0);
  CHECK(m.number("b") == -2.5e-3);
  CHECK(m.string("c") == "x # not a comment\n");
  CHECK(m.boolean("d", false));
  CHECK(m.numbers("e") == std::vector<double>{1, 2.5, 3});
  CHECK(m.string("f") == "mrc");
  CHECK(m.strings("g") == std::vector<std::string>{"p", "q"});
  CHECK(m.numbers("a") == std::vector<double>{1});
  CHECK(m.entries().at("e").line == 7);
  CHECK(m.number("missing", 4.0) == 4.0);
  CHECK(m.string("missing", "z") == "z");
}

TEST_CASE("parser reports the offending line", "[cli][config][errors]") {
  auto line_of = [](const std::string& text) {
    try {
      config::parse(text);
    } catch (const config::ConfigError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("a = 1\nb 2\n") == 2);
  CHECK(line_of("a = 1\na = 2\n") == 2);
  CHECK(line_of("a = 1\n\n[table]\n") == 3);
  CHECK(line_of("a = [1, 2\n") == 1);
  CHECK(line_of("a = \"open\n") == 1);
  CHECK(line_of("bad key = 1\n") == 1);
  CHECK(line_of("a = \n") == 1);
  CHECK(line_of("a = nan\n") == 1);  // non-finite numbers are rejected
  CHECK_THROWS_AS(config::parse_value("1e999"), config::ConfigError);
  try {
    config::parse("x = 1\ny = 2\nz = [1,\n");
  } catch (const config::ConfigError& e) {
    CHECK_THAT(std::string(e.what()), ContainsSubstring("line 3"));
  }
}

TEST_CASE("typed getters reject the wrong type", "[cli][config][errors]") {
  const auto m = config::parse("a = \"text\"\nb = 1.5\nc = [1, \"x\"]\n");
  CHECK_THROWS_AS(m.number("a"), config::ConfigError);
  CHECK_THROWS_AS(m.integer("b"), config::ConfigError);
  CHECK_THROWS_AS(m.string("b"), config::ConfigError);
  CHECK_THROWS_AS(m.numbers("c"), config::ConfigError);
  CHECK_THROWS_AS(m.number("zzz"), config::ConfigError);
  CHECK_THROWS_AS(m.boolean("b", true), config::ConfigError);
  try {
    m.integer("b");
  } catch (const config::ConfigError& e) {
    CHECK(e.key() == "b");
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(m.require_known({"a", "b"}), config::ConfigError);
  CHECK_NOTHROW(m.require_known({"a", "b", "c"}));
}

TEST_CASE("JSON input and sidecar unwrapping", "[cli][config]") {
  const auto direct = config::parse(R"({"M": 3, "tau_db": [0, 1]})");
  CHECK(direct.integer("M") == 3);
  const auto wrapped = config::parse(R"({"command": "run", "config": {"M": 4}, "version": "x"})");
  CHECK(wrapped.integer("M") == 4);
  CHECK_FALSE(wrapped.has("command"));
  CHECK_THROWS_AS(config::parse("{not json"), config::ConfigError);
}

TEST_CASE("overrides and merge", "[cli][config]") {
  auto m = config::parse("M = 2\nC = 1\n");
  config::ConfigMap o;
  o.set_text("M", "4");
  o.set_text("grid", "[0, 5]");
  m.merge(o);
  CHECK(m.integer("M") == 4);
  CHECK(m.numbers("grid") == std::vector<double>{0, 5});
  m.erase("C");
  CHECK_FALSE(m.has("C"));
}

TEST_CASE("dB conversion", "[cli][config]") {
  CHECK(config::db_to_linear(0.0) == 1.0);
  CHECK_THAT(config::db_to_linear(10.0), WithinRel(10.0, 1e-15));
  CHECK_THAT(config::db_to_linear(-3.0), WithinRel(0.501187233627272, 1e-12));
  for (double x : {1e-4, 0.3, 7.0}) CHECK_THAT(config::db_to_linear(config::linear_to_db(x)), WithinRel(x, 1e-14));
}

TEST_CASE("experiment resolution", "[cli][experiment]") {
  const auto cfg = ExperimentConfig::from_map(config::parse(kBase));
  CHECK(cfg.name == "base");
  CHECK(cfg.params.M == 2);
  CHECK(cfg.N == 5);
  CHECK(cfg.design == CacheDesign::explicit_T);
  CHECK(cfg.receiver == ReceiverMode::mrc);
  CHECK(cfg.grid == std::vector<double>{-5, 0, 5});
  const auto s = scenario_at(cfg, 0.0);
  CHECK(s.params.tau == 1.0);
  CHECK(s.pop.size() == 5);
  const auto d = design_at(cfg, s);
  CHECK(d.T[1] == 0.8);
  CHECK_FALSE(d.K.has_value());
}

TEST_CASE("experiment errors", "[cli][experiment][errors]") {
  auto fails = [](const std::string& extra, const std::string& drop = {}) {
    auto m = config::parse(kBase);
    if (!drop.empty()) m.erase(drop);
    const auto o = config::parse(extra);
    m.merge(o);
    try {
      ExperimentConfig::from_map(m);
    } catch (const config::ConfigError& e) {
      return std::string(e.key().empty() ? "?" : e.key());
    }
    return std::string();
  };
  CHECK(fails("bogus = 1\n") == "bogus");
  CHECK_FALSE(fails("tau = 1\ntau_db = 1\n").empty());
  CHECK_FALSE(fails("popularity = [0.5, 0.5]\n").empty());
  CHECK_FALSE(fails("", "C").empty());
  CHECK_FALSE(fails("C = 5\n").empty());
  CHECK_FALSE(fails("grid = [5, 0]\n").empty());
  CHECK_FALSE(fails("sweep = \"nope\"\n").empty());
  CHECK_FALSE(fails("receiver = \"pzf\"\n").empty());
  CHECK_FALSE(fails("receiver = \"pzf\"\nK = 3\n").empty());
  CHECK_FALSE(fails("alpha = 2\n").empty());
  CHECK_FALSE(fails("T = [1, 1, 1, 1, 1]\n").empty());
  CHECK_FALSE(fails("trials = 0\n").empty());
  CHECK_FALSE(fails("engine = \"magic\"\n").empty());
  CHECK_FALSE(fails("eps = -1\n").empty());
  CHECK_FALSE(fails("sweep = \"gamma\"\nzipf_gamma = 1\npopularity = [1]\n").empty());
  CHECK_FALSE(fails("sweep = \"M\"\ngrid = [0, 1]\n").empty());
  CHECK(fails("receiver = \"pzf\"\nK = 1\n").empty());
  CHECK(fails("receiver = \"pzf\"\nK = [1, 2, 2, 1, 1]\n").empty());
}

TEST_CASE("config round trip", "[cli][experiment][property]") {
  auto m = config::parse(kBase);
  m.set_text("receiver", "pzf");
  m.set_text("K", "[1, 2, 2, 1, 1]");
  m.set_text("engine", "[analytic, bound, monte_carlo, bound]");
  m.set_text("trials", "123");
  m.set_text("seed", "9");
  const auto a = ExperimentConfig::from_map(m);
  CHECK(a.engines.size() == 3);
  const auto b = ExperimentConfig::from_map(a.to_map());
  CHECK(b.to_map().to_json() == a.to_map().to_json());
  CHECK(b.K == a.K);
  CHECK(b.sim.trials == 123);
  CHECK(b.sim.seed == 9);
  CHECK(b.grid == a.grid);
}

TEST_CASE("run writes curves and a sidecar that reproduces them", "[cli][experiment]") {
  const auto dir = scratch("run");
  auto m = config::parse(kBase);
  m.set_text("engine", "[analytic, bound, monte_carlo]");
  m.set_text("trials", "300");
  m.set("output", dir.string());
  const auto cfg = ExperimentConfig::from_map(m);
  const auto paths = run(cfg);
  REQUIRE(paths.size() == 4);
  const auto csv = slurp(dir / "base_analytic.csv");
  CHECK(csv.rfind("sweep_value,stp,error,kind\n", 0) == 0);
  std::istringstream lines(csv);
  std::string line;
  int rows = -1;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 3);
  const auto bound = slurp(dir / "base_bound.csv");
  CHECK_THAT(bound, ContainsSubstring("upper_bound"));
  CHECK_THAT(bound, ContainsSubstring("lower_bound"));

  const auto sidecar = nlohmann::json::parse(slurp(dir / "base.json"));
  CHECK(sidecar["command"] == "run");
  CHECK(sidecar["version"] == version());
  CHECK(sidecar["outputs"].size() == 3);

  const auto again = scratch("rerun");
  auto m2 = config::load(dir / "base.json");
  m2.set("output", again.string());
  run(ExperimentConfig::from_map(m2));
  for (const char* f : {"base_analytic.csv", "base_bound.csv", "base_monte_carlo.csv"}) {
    CHECK(slurp(dir / f) == slurp(again / f));
  }
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST_CASE("evaluate agrees with the analysis layer", "[cli][experiment]") {
  auto m = config::parse(kBase);
  m.set_text("engine", "[analytic]");
  const auto cfg = ExperimentConfig::from_map(m);
  const auto curves = evaluate(cfg);
  REQUIRE(curves.size() == 1);
  CHECK(curves[0].name == "base_analytic");
  REQUIRE(curves[0].rows.size() == 3);
  const auto s = scenario_at(cfg, 0.0);
  const auto d = design_at(cfg, s);
  CHECK_THAT(curves[0].rows[1].value, WithinAbs(stp_mrc_exact(d.T, s.pop, s.params).value, 1e-12));
  CHECK(curves[0].rows[1].kind == "exact");
}

TEST_CASE("optimizer and baseline runs", "[cli][experiment]") {
  const auto dir = scratch("opt");
  auto m = config::parse(kBase);
  m.erase("T");
  m.set_text("cache", "cccp");
  m.set("output", dir.string());
  m.set_text("grid", "[0]");
  const auto cfg = ExperimentConfig::from_map(m);
  const auto mrc = run_optimizer(cfg, parse_optimizer("mrc"));
  CHECK(fs::exists(dir / "base_cccp_trace.csv"));
  CHECK(slurp(dir / "base_cccp_trace.csv").rfind("iteration,objective,multiplier,T1,T2,T3,T4,T5\n", 0) == 0);
  run_optimizer(cfg, parse_optimizer("mrc-asymptotic"));
  CHECK(fs::exists(dir / "base_asymptotic.json"));
  run_optimizer(cfg, parse_optimizer("pzf"));
  CHECK(fs::exists(dir / "base_pzf_trace.csv"));
  run_baselines(cfg);
  CHECK(fs::exists(dir / "base_baselines.json"));
  CHECK_THROWS_AS(parse_optimizer("simplex"), std::invalid_argument);
  fs::remove_all(dir);
}

TEST_CASE("figure entry points", "[cli][figure]") {
  CHECK(figure_ids().size() == 10);
  FigureOptions o;
  o.output = scratch("fig");
  CHECK_THROWS_AS(figure("9", o), std::invalid_argument);
  CHECK_THROWS_AS(parse_scale("huge"), std::invalid_argument);

  figure("4", o);
  const auto fig4 = slurp(o.output / "fig4_M2.csv");
  CHECK(fig4.rfind("sweep_value,T,error,kind\n", 0) == 0);
  // the optimized T from CCCP is sorted like the popularity
  std::istringstream in(fig4);
  std::string line;
  std::getline(in, line);
  std::vector<double> cccp;
  while (std::getline(in, line)) {
    if (line.find(",cccp") == std::string::npos) continue;
    const auto c1 = line.find(',');
    cccp.push_back(std::stod(line.substr(c1 + 1, line.find(',', c1 + 1) - c1 - 1)));
  }
  REQUIRE(cccp.size() == 5);
  for (std::size_t i = 1; i < cccp.size(); ++i) CHECK(cccp[i] <= cccp[i - 1] + 1e-12);
  const auto side = nlohmann::json::parse(slurp(o.output / "fig4.json"));
  CHECK(side["figure"] == "4");
  CHECK(side["scale"] == "desk");
  fs::remove_all(o.output);
}

TEST_CASE("exception mapping", "[cli][errors]") {
  std::ostringstream err;
  CHECK(guarded([] {}, err) == 0);
  CHECK(guarded([] { throw config::ConfigError("bad", "k", 3); }, err) == 2);
  CHECK(guarded([] { validate({2.0}, 1); }, err) == 2);
  CHECK(guarded([] { throw ConvergenceError("slow", 1.0, 0.1); }, err) == 3);
  CHECK(guarded([] { throw BracketError("b", 0, 1); }, err) == 3);
  CHECK(guarded([] { throw std::runtime_error("x"); }, err) == 3);
  CHECK_THAT(err.str(), ContainsSubstring("bad"));
  CHECK(run_file("/nonexistent/file.toml", {}, err) == 2);
}

TEST_CASE("command-line binary", "[cli][binary]") {
  const auto dir = scratch("bin");
  spit(dir / "ok.toml", kBase);
  spit(dir / "bad.toml", "M = 2\nM = 3\n");
  const std::string out = " --out " + dir.string();

  CHECK(shell(kCli + " --help") == 0);
  CHECK(shell(kCli + " analyze mrc --config " + (dir / "ok.toml").string() + out) == 0);
  CHECK(fs::exists(dir / "base_analytic.csv"));
  CHECK(fs::exists(dir / "base_bound.csv"));
  CHECK(shell(kCli + " analyze mrc --config " + (dir / "bad.toml").string() + out) == 2);
  CHECK(shell(kCli + " figure 11" + out) == 2);
  CHECK(shell(kCli + " no-such-command") == 2);
  CHECK(shell(kCli + " simulate --config " + (dir / "ok.toml").string() + " --trials 200 --seed 3" + out) == 0);
  CHECK(fs::exists(dir / "base_monte_carlo.csv"));

  spit(dir / "opt.toml", std::string(kBase).substr(0, std::string(kBase).find("T = ")) + "cache = \"cccp\"\ngrid = [0]\n");
  const std::string optcmd = kCli + " optimize mrc --config " + (dir / "opt.toml").string() + out;
  REQUIRE(shell(optcmd) == 0);
  const auto first = slurp(dir / "base_cccp_trace.csv");
  REQUIRE(shell(optcmd) == 0);
  CHECK(slurp(dir / "base_cccp_trace.csv") == first);
  CHECK_FALSE(first.empty());

  spit(dir / "big.toml", "name = \"big\"\nM = 4\nN = 9\nzipf_gamma = 1\nC = 3\ncache = \"cccp\"\ngrid = [0]\n");
  CHECK(shell(kCli + " optimize pzf-exhaustive --config " + (dir / "big.toml").string() + out) == 3);
  fs::remove_all(dir);
}
