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

#include "cachesimo/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <thread>

#include "cachesimo/analysis_mrc.hpp"

#ifndef CACHESIMO_VERSION
#define CACHESIMO_VERSION "unknown"
#endif

namespace cachesimo {

using config::ConfigError;
using config::ConfigMap;
namespace fs = std::filesystem;

std::string version() { return CACHESIMO_VERSION; }

namespace {

const std::vector<std::pair<CacheDesign, std::string>> kDesignNames{
    {CacheDesign::explicit_T, "explicit"},        {CacheDesign::cccp, "cccp"},
    {CacheDesign::asymptotic, "asymptotic"},      {CacheDesign::pzf, "pzf"},
    {CacheDesign::pzf_exhaustive, "pzf_exhaustive"}, {CacheDesign::most_popular, "most_popular"},
    {CacheDesign::iid_popularity, "iid_popularity"}, {CacheDesign::uniform, "uniform"}};
const std::vector<std::pair<ReceiverMode, std::string>> kReceiverNames{
    {ReceiverMode::mrc, "mrc"}, {ReceiverMode::pzf, "pzf"}, {ReceiverMode::optimize_k, "optimize_k"}};
const std::vector<std::pair<Engine, std::string>> kEngineNames{
    {Engine::analytic, "analytic"}, {Engine::bound, "bound"}, {Engine::monte_carlo, "monte_carlo"}};
const std::vector<std::pair<SweepVariable, std::string>> kSweepNames{
    {SweepVariable::tau_db, "tau_db"}, {SweepVariable::M, "M"}, {SweepVariable::C, "C"},
    {SweepVariable::alpha, "alpha"}, {SweepVariable::gamma, "gamma"}};

template <class E>
std::string name_of(const std::vector<std::pair<E, std::string>>& table, E value) {
  for (const auto& [v, n] : table)
    if (v == value) return n;
  return "?";
}

template <class E>
E parse_name(const std::vector<std::pair<E, std::string>>& table, const ConfigMap& m, const std::string& key,
             const std::string& text) {
  for (const auto& [v, n] : table)
    if (n == text) return v;
  std::string options;
  for (const auto& [v, n] : table) options += (options.empty() ? "" : ", ") + n;
  const int line = m.has(key) ? m.entries().at(key).line : 0;
  throw ConfigError("unknown value '" + text + "' (expected one of " + options + ")", key, line);
}

bool is_baseline(CacheDesign d) {
  return d == CacheDesign::most_popular || d == CacheDesign::iid_popularity || d == CacheDesign::uniform;
}

BaselineKind baseline_kind(CacheDesign d) {
  switch (d) {
    case CacheDesign::most_popular: return BaselineKind::most_popular;
    case CacheDesign::iid_popularity: return BaselineKind::iid_popularity;
    default: return BaselineKind::uniform;
  }
}

bool is_pzf_design(CacheDesign d) { return d == CacheDesign::pzf || d == CacheDesign::pzf_exhaustive; }

int line_of(const ConfigMap& m, const std::string& key) {
  return m.has(key) ? m.entries().at(key).line : 0;
}

int bounded_int(const ConfigMap& m, const std::string& key, long long fallback, long long lo, long long hi) {
  const long long v = m.integer(key, fallback);
  if (v < lo || v > hi)
    throw ConfigError("must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]", key, line_of(m, key));
  return static_cast<int>(v);
}

int as_count(double v, const char* what) {
  if (std::floor(v) != v || v < 1.0 || v > 1e6) throw DomainError(std::string(what) + " must be a positive integer");
  return static_cast<int>(v);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Short label for file names: 0.5 -> "0.5", 1 -> "1".
std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

template <class F>
void parallel_for(std::size_t n, int lanes, F&& body) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(lanes, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<double> db_grid(double lo, double hi, double step) {
  std::vector<double> out;
  const int n = static_cast<int>(std::lround((hi - lo) / step));
  for (int i = 0; i <= n; ++i) out.push_back(lo + step * i);
  return out;
}

// Lazily built R table for one scenario.
class TableSource {
 public:
  TableSource(const ExperimentConfig& cfg, const NetworkParams& params) : cfg_(cfg), params_(params) {}
  const RTable& get() {
    if (!table_) {
      table_ = cfg_.r_cache.empty() ? r_table(params_, cfg_.L) : r_table_cached(params_, cfg_.L, cfg_.r_cache);
    }
    return *table_;
  }

 private:
  const ExperimentConfig& cfg_;
  NetworkParams params_;
  std::optional<RTable> table_;
};

Design design_with(const ExperimentConfig& cfg, const Scenario& s, TableSource& tables) {
  std::optional<CachingDistribution> T;
  std::optional<DofAllocation> K;
  switch (cfg.design) {
    case CacheDesign::explicit_T: T = validate(cfg.T, s.C); break;
    case CacheDesign::cccp: T = cccp(s.pop, s.params, s.C, cfg.eps).final(); break;
    case CacheDesign::asymptotic: T = optimize_mrc_asymptotic(s.pop, s.C).T; break;
    case CacheDesign::pzf:
    case CacheDesign::pzf_exhaustive: {
      auto sol = cfg.design == CacheDesign::pzf ? pzf_alternating(s.pop, tables.get(), s.C)
                                                : exhaustive_pzf(s.pop, tables.get(), s.C);
      T = sol.T;
      K = sol.K;
      break;
    }
    default: T = baseline(baseline_kind(cfg.design), s.pop, s.C); break;
  }
  if (cfg.receiver == ReceiverMode::pzf) {
    K = cfg.K.size() == 1 ? DofAllocation::uniform(s.pop.size(), cfg.K[0], s.params.M)
                          : DofAllocation(cfg.K, s.params.M);
  } else if (cfg.receiver == ReceiverMode::optimize_k && !K) {
    K = pzf_discrete(*T, s.pop, tables.get());
  }
  return Design{*T, K};
}

CacheLaw law_for(const ExperimentConfig& cfg, const Scenario& s, const Design& d) {
  if (is_baseline(cfg.design)) return CacheLaw::for_baseline(baseline_kind(cfg.design), s.pop, s.C);
  return CacheLaw::for_design(d.T, s.pop);
}

Receiver receiver_for(const Design& d) {
  if (d.K) return PzfReceiver{*d.K};
  return MrcReceiver{};
}

bool design_depends_on_tau(const ExperimentConfig& cfg) {
  return cfg.design == CacheDesign::cccp || is_pzf_design(cfg.design) || cfg.receiver == ReceiverMode::optimize_k;
}

nlohmann::json to_json(const CachingDistribution& T) {
  return nlohmann::json(std::vector<double>(T.values().begin(), T.values().end()));
}

nlohmann::json to_json(const DofAllocation& K) {
  return nlohmann::json(std::vector<int>(K.values().begin(), K.values().end()));
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace

std::string to_string(CacheDesign d) { return name_of(kDesignNames, d); }
std::string to_string(ReceiverMode r) { return name_of(kReceiverNames, r); }
std::string to_string(Engine e) { return name_of(kEngineNames, e); }
std::string to_string(SweepVariable s) { return name_of(kSweepNames, s); }

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "name",   "output",   "r_cache", "lambda_h", "alpha",  "tau",    "tau_db", "M",      "N",
      "zipf_gamma", "popularity", "C", "cache",    "T",      "receiver", "K",    "L",      "sweep",
      "grid",   "engine",   "trials",  "seed",     "radius", "threads", "eps"};
  return keys;
}

ExperimentConfig ExperimentConfig::from_map(const ConfigMap& m) {
  m.require_known(config_keys());
  ExperimentConfig c;
  c.name = m.string("name", c.name);
  if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos)
    throw ConfigError("name must be a non-empty file stem", "name", line_of(m, "name"));
  c.output = m.string("output", ".");
  c.r_cache = m.string("r_cache", "");

  c.params.lambda_h = m.number("lambda_h", c.params.lambda_h);
  c.params.alpha = m.number("alpha", c.params.alpha);
  if (m.has("tau") && m.has("tau_db")) throw ConfigError("set tau or tau_db, not both", "tau_db", line_of(m, "tau_db"));
  c.params.tau = m.has("tau_db") ? config::db_to_linear(m.number("tau_db")) : m.number("tau", 1.0);
  c.params.M = bounded_int(m, "M", 1, 1, 64);
  try {
    c.params.check();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }

  if (m.has("zipf_gamma") && m.has("popularity"))
    throw ConfigError("set zipf_gamma or popularity, not both", "popularity", line_of(m, "popularity"));
  if (m.has("popularity")) {
    c.popularity = m.numbers("popularity");
    c.N = static_cast<int>(c.popularity.size());
    if (m.has("N") && m.integer("N") != c.N)
      throw ConfigError("N disagrees with the popularity vector", "N", line_of(m, "N"));
  } else if (m.has("zipf_gamma")) {
    c.zipf_gamma = m.number("zipf_gamma");
    if (!m.has("N")) throw ConfigError("N is required with zipf_gamma", "N");
    c.N = bounded_int(m, "N", 0, 1, 100000);
  } else {
    throw ConfigError("set zipf_gamma (with N) or popularity", "popularity");
  }
  if (!m.has("C")) throw ConfigError("required key missing", "C");
  c.C = bounded_int(m, "C", 0, 1, c.N);

  const std::string cache = m.string("cache", m.has("T") ? "explicit" : "");
  if (cache.empty()) throw ConfigError("required key missing", "cache");
  c.design = parse_name(kDesignNames, m, "cache", cache);
  if (c.design == CacheDesign::explicit_T) {
    if (!m.has("T")) throw ConfigError("explicit cache needs T", "T");
    c.T = m.numbers("T");
  } else if (m.has("T")) {
    throw ConfigError("T is only used with cache = explicit", "T", line_of(m, "T"));
  }

  const std::string receiver = m.string("receiver", is_pzf_design(c.design) ? "optimize_k" : "mrc");
  c.receiver = parse_name(kReceiverNames, m, "receiver", receiver);
  if (is_pzf_design(c.design) && c.receiver != ReceiverMode::optimize_k)
    throw ConfigError("pzf designs choose K themselves; use receiver = optimize_k", "receiver",
                      line_of(m, "receiver"));
  if (c.receiver == ReceiverMode::pzf) {
    if (!m.has("K")) throw ConfigError("receiver = pzf needs K", "K");
    for (double k : m.numbers("K")) {
      if (std::floor(k) != k || k < 1 || k > 64) throw ConfigError("K entries must be integers in [1, 64]", "K", line_of(m, "K"));
      c.K.push_back(static_cast<int>(k));
    }
    if (c.K.size() != 1 && static_cast<int>(c.K.size()) != c.N)
      throw ConfigError("K must be one integer or one per file", "K", line_of(m, "K"));
  } else if (m.has("K")) {
    throw ConfigError("K is only used with receiver = pzf", "K", line_of(m, "K"));
  }
  c.L = bounded_int(m, "L", 3, 1, kMaxBoundOrder);

  c.sweep = parse_name(kSweepNames, m, "sweep", m.string("sweep", "tau_db"));
  if (m.has("grid")) {
    c.grid = m.numbers("grid");
  } else if (m.has("sweep")) {
    throw ConfigError("sweep needs a grid", "grid");
  } else {
    c.grid = {config::linear_to_db(c.params.tau)};
  }
  if (c.grid.empty()) throw ConfigError("grid must be non-empty", "grid", line_of(m, "grid"));
  if (!std::is_sorted(c.grid.begin(), c.grid.end()))
    throw ConfigError("grid must be sorted ascending", "grid", line_of(m, "grid"));
  if (c.sweep == SweepVariable::gamma && !c.zipf_gamma)
    throw ConfigError("sweep = gamma needs zipf_gamma", "sweep", line_of(m, "sweep"));

  c.engines.clear();
  for (const auto& e : m.has("engine") ? m.strings("engine") : std::vector<std::string>{"analytic"}) {
    const Engine engine = parse_name(kEngineNames, m, "engine", e);
    if (std::find(c.engines.begin(), c.engines.end(), engine) == c.engines.end()) c.engines.push_back(engine);
  }
  if (c.engines.empty()) throw ConfigError("engine list is empty", "engine", line_of(m, "engine"));

  const long long trials = m.integer("trials", static_cast<long long>(c.sim.trials));
  const long long seed = m.integer("seed", static_cast<long long>(c.sim.seed));
  if (trials < 1) throw ConfigError("must be positive", "trials", line_of(m, "trials"));
  if (seed < 0) throw ConfigError("must be non-negative", "seed", line_of(m, "seed"));
  c.sim.trials = static_cast<std::uint64_t>(trials);
  c.sim.seed = static_cast<std::uint64_t>(seed);
  c.sim.radius = m.number("radius", 0.0);
  c.sim.lanes = bounded_int(m, "threads", 0, 0, 1024);
  c.eps = m.number("eps", c.eps);
  if (!(c.eps > 0.0)) throw ConfigError("must be positive", "eps", line_of(m, "eps"));
  try {
    c.sim.check();
  } catch (const std::exception& e) {
    throw ConfigError(e.what(), "radius", line_of(m, "radius"));
  }

  // Every sweep point must describe a valid scenario and design input.
  for (double v : c.grid) {
    try {
      const Scenario s = scenario_at(c, v);
      s.params.check();
      if (s.C > static_cast<int>(s.pop.size())) throw DomainError("C exceeds N");
      if (c.design == CacheDesign::explicit_T) validate(c.T, s.C);
      if (c.receiver == ReceiverMode::pzf) {
        if (c.K.size() == 1) DofAllocation::uniform(s.pop.size(), c.K[0], s.params.M);
        else DofAllocation(c.K, s.params.M);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("at ") + to_string(c.sweep) + " = " + label(v) + ": " + e.what(), "grid",
                        line_of(m, "grid"));
    }
  }
  return c;
}

ConfigMap ExperimentConfig::to_map() const {
  ConfigMap m;
  m.set("name", name);
  m.set("output", output.string());
  if (!r_cache.empty()) m.set("r_cache", r_cache.string());
  m.set("lambda_h", params.lambda_h);
  m.set("alpha", params.alpha);
  m.set("tau", params.tau);
  m.set("M", params.M);
  m.set("N", N);
  if (zipf_gamma) m.set("zipf_gamma", *zipf_gamma);
  else m.set("popularity", popularity);
  m.set("C", C);
  m.set("cache", to_string(design));
  if (design == CacheDesign::explicit_T) m.set("T", T);
  m.set("receiver", to_string(receiver));
  if (receiver == ReceiverMode::pzf) m.set("K", K);
  m.set("L", L);
  m.set("sweep", to_string(sweep));
  m.set("grid", grid);
  std::vector<std::string> e;
  for (auto engine : engines) e.push_back(to_string(engine));
  m.set("engine", e);
  m.set("trials", sim.trials);
  m.set("seed", sim.seed);
  m.set("radius", sim.radius);
  m.set("threads", sim.lanes);
  m.set("eps", eps);
  return m;
}

Scenario scenario_at(const ExperimentConfig& cfg, double v) {
  NetworkParams params = cfg.params;
  int C = cfg.C;
  double gamma = cfg.zipf_gamma.value_or(0.0);
  switch (cfg.sweep) {
    case SweepVariable::tau_db: params.tau = config::db_to_linear(v); break;
    case SweepVariable::M: params.M = as_count(v, "M"); break;
    case SweepVariable::C: C = as_count(v, "C"); break;
    case SweepVariable::alpha: params.alpha = v; break;
    case SweepVariable::gamma: gamma = v; break;
  }
  if (cfg.zipf_gamma) return Scenario{params, zipf(cfg.N, gamma), C};
  return Scenario{params, Popularity(cfg.popularity), C};
}

Design design_at(const ExperimentConfig& cfg, const Scenario& s) {
  TableSource tables(cfg, s.params);
  return design_with(cfg, s, tables);
}

void write_csv(const Curve& curve, std::ostream& out) {
  out << "sweep_value," << curve.metric << ",error,kind\n";
  for (const auto& r : curve.rows) out << fmt(r.sweep_value) << ',' << fmt(r.value) << ',' << fmt(r.error) << ',' << r.kind << '\n';
}

std::vector<fs::path> write_outputs(const fs::path& dir, const std::string& stem, const std::vector<Curve>& curves,
                                    nlohmann::json sidecar) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  auto names = nlohmann::json::array();
  for (const auto& c : curves) {
    const fs::path path = dir / (c.name + ".csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_csv(c, out);
    written.push_back(path);
    names.push_back(path.filename().string());
  }
  sidecar["version"] = version();
  if (!sidecar.contains("outputs")) sidecar["outputs"] = names;
  else for (const auto& n : names) sidecar["outputs"].push_back(n);
  const fs::path side = dir / (stem + ".json");
  write_json(side, sidecar);
  written.push_back(side);
  return written;
}

std::vector<Curve> evaluate(const ExperimentConfig& cfg) {
  const std::size_t P = cfg.grid.size();
  std::vector<std::optional<Scenario>> scenarios(P);
  std::vector<std::optional<Design>> designs(P);
  // rows[point][engine]
  std::vector<std::vector<std::vector<CurveRow>>> rows(P, std::vector<std::vector<CurveRow>>(cfg.engines.size()));

  parallel_for(P, resolve_lanes(cfg.sim.lanes), [&](std::size_t i) {
    const double v = cfg.grid[i];
    scenarios[i] = scenario_at(cfg, v);
    const Scenario& s = *scenarios[i];
    TableSource tables(cfg, s.params);
    designs[i] = design_with(cfg, s, tables);
    const Design& d = *designs[i];
    for (std::size_t e = 0; e < cfg.engines.size(); ++e) {
      auto& out = rows[i][e];
      if (cfg.engines[e] == Engine::analytic) {
        const StpEstimate est = d.K ? stp_pzf_exact(*d.K, d.T, s.pop, s.params) : stp_mrc_exact(d.T, s.pop, s.params);
        out.push_back({v, est.value, est.error, to_string(EstimateKind::exact)});
      } else if (cfg.engines[e] == Engine::bound) {
        if (d.K) {
          const StpEstimate up = stp_pzf_upper(*d.K, d.T, s.pop, tables.get());
          out.push_back({v, up.value, 0.0, to_string(EstimateKind::upper_bound)});
        } else {
          const MrcBounds b = stp_mrc_bounds(d.T, s.pop, s.params);
          out.push_back({v, b.upper.value, 0.0, to_string(EstimateKind::upper_bound)});
          out.push_back({v, b.lower.value, 0.0, to_string(EstimateKind::lower_bound)});
        }
      }
    }
  });

  // Monte Carlo runs after the analytic points; it parallelizes over trials itself.
  const auto mc_it = std::find(cfg.engines.begin(), cfg.engines.end(), Engine::monte_carlo);
  if (mc_it != cfg.engines.end()) {
    const std::size_t e = static_cast<std::size_t>(mc_it - cfg.engines.begin());
    const std::string kind = to_string(EstimateKind::monte_carlo);
    if (cfg.sweep == SweepVariable::tau_db && !design_depends_on_tau(cfg)) {
      const Scenario& s = *scenarios[0];
      const Design& d = *designs[0];
      std::vector<double> taus;
      for (const auto& sc : scenarios) taus.push_back(sc->params.tau);
      const SimulationResult r = simulate(receiver_for(d), law_for(cfg, s, d), s.pop, s.params, taus, cfg.sim);
      for (std::size_t i = 0; i < P; ++i)
        rows[i][e].push_back({cfg.grid[i], r.per_tau[i].value, r.per_tau[i].error, kind});
    } else {
      for (std::size_t i = 0; i < P; ++i) {
        const Scenario& s = *scenarios[i];
        const Design& d = *designs[i];
        const StpEstimate est = estimate_stp(receiver_for(d), law_for(cfg, s, d), s.pop, s.params, cfg.sim);
        rows[i][e].push_back({cfg.grid[i], est.value, est.error, kind});
      }
    }
  }

  std::vector<Curve> curves;
  for (std::size_t e = 0; e < cfg.engines.size(); ++e) {
    Curve c{cfg.name + "_" + to_string(cfg.engines[e]), "stp", {}};
    for (std::size_t i = 0; i < P; ++i) c.rows.insert(c.rows.end(), rows[i][e].begin(), rows[i][e].end());
    curves.push_back(std::move(c));
  }
  return curves;
}

std::vector<fs::path> run(const ExperimentConfig& cfg) {
  nlohmann::json sidecar{{"command", "run"}, {"config", cfg.to_map().to_json()}};
  return write_outputs(cfg.output, cfg.name, evaluate(cfg), std::move(sidecar));
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "mrc") return OptimizerKind::mrc;
  if (name == "mrc-asymptotic") return OptimizerKind::mrc_asymptotic;
  if (name == "pzf") return OptimizerKind::pzf;
  if (name == "pzf-exhaustive") return OptimizerKind::pzf_exhaustive;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

std::vector<fs::path> run_optimizer(const ExperimentConfig& cfg, OptimizerKind kind) {
  const Scenario s = scenario_at(cfg, cfg.grid.front());
  fs::create_directories(cfg.output);
  nlohmann::json result{{"config", cfg.to_map().to_json()}, {"version", version()}};
  std::vector<fs::path> written;
  auto trace_file = [&](const std::string& suffix) {
    written.push_back(cfg.output / (cfg.name + suffix));
    std::ofstream out(written.back());
    if (!out) throw std::runtime_error("cannot write " + written.back().string());
    return out;
  };
  std::string stem;
  switch (kind) {
    case OptimizerKind::mrc: {
      const CccpTrace trace = cccp(s.pop, s.params, s.C, cfg.eps);
      auto out = trace_file("_cccp_trace.csv");
      trace.write_csv(out);
      result["optimizer"] = "cccp";
      result["T"] = to_json(trace.final());
      result["objective"] = trace.objectives.back();
      result["iterations"] = trace.iterations;
      result["converged"] = trace.converged;
      stem = "_cccp.json";
      break;
    }
    case OptimizerKind::mrc_asymptotic: {
      const AsymptoticOptimum opt = optimize_mrc_asymptotic(s.pop, s.C);
      result["optimizer"] = "asymptotic";
      result["T"] = to_json(opt.T);
      result["nu"] = opt.nu;
      result["residual"] = opt.residual;
      stem = "_asymptotic.json";
      break;
    }
    case OptimizerKind::pzf:
    case OptimizerKind::pzf_exhaustive: {
      TableSource tables(cfg, s.params);
      const bool alt = kind == OptimizerKind::pzf;
      const PzfSolution sol = alt ? pzf_alternating(s.pop, tables.get(), s.C) : exhaustive_pzf(s.pop, tables.get(), s.C);
      if (alt) {
        auto out = trace_file("_pzf_trace.csv");
        sol.write_csv(out);
      }
      result["optimizer"] = alt ? "pzf_alternating" : "pzf_exhaustive";
      result["K"] = to_json(sol.K);
      result["T"] = to_json(sol.T);
      result["objective"] = sol.objective;
      result["iterations"] = sol.iterations;
      result["continuous_solves"] = sol.continuous_solves;
      stem = alt ? "_pzf.json" : "_pzf_exhaustive.json";
      break;
    }
  }
  written.push_back(cfg.output / (cfg.name + stem));
  write_json(written.back(), result);
  return written;
}

std::vector<fs::path> run_baselines(const ExperimentConfig& cfg) {
  std::vector<Curve> curves;
  auto configs = nlohmann::json::object();
  for (auto design : {CacheDesign::most_popular, CacheDesign::iid_popularity, CacheDesign::uniform}) {
    ExperimentConfig b = cfg;
    b.design = design;
    b.T.clear();
    b.receiver = ReceiverMode::mrc;
    b.K.clear();
    b.name = cfg.name + "_" + to_string(design);
    for (auto& c : evaluate(b)) curves.push_back(std::move(c));
    configs[to_string(design)] = b.to_map().to_json();
  }
  nlohmann::json sidecar{{"command", "baselines"}, {"config", cfg.to_map().to_json()}, {"baselines", configs}};
  return write_outputs(cfg.output, cfg.name + "_baselines", curves, std::move(sidecar));
}

Scale parse_scale(const std::string& name) {
  if (name == "paper") return Scale::paper;
  if (name == "desk") return Scale::desk;
  throw std::invalid_argument("unknown scale '" + name + "' (expected paper or desk)");
}

// ---------------------------------------------------------------------------------------------
// Figures

namespace {

constexpr int kDeskN = 20;

struct FigureContext {
  const FigureOptions& opt;
  std::string id;
  nlohmann::json parameters = nlohmann::json::object();
  nlohmann::json substitutions = nlohmann::json::array();
  nlohmann::json configs = nlohmann::json::object();
  std::vector<Curve> curves;

  std::uint64_t trials() const {
    if (opt.trials > 0) return opt.trials;
    return opt.scale == Scale::desk ? 10000 : 100000;
  }

  ExperimentConfig base(int N, int C, double gamma) const {
    ExperimentConfig c;
    c.output = opt.output;
    c.params.lambda_h = 1e-3;
    c.params.alpha = 4.0;
    c.N = N;
    c.C = C;
    c.zipf_gamma = gamma;
    c.sim.trials = trials();
    c.sim.seed = opt.seed;
    c.sim.lanes = opt.lanes;
    return c;
  }

  // Evaluates cfg and stores its curves merged into one (rows ordered by sweep point).
  void add_merged(const ExperimentConfig& cfg) {
    configs[cfg.name] = cfg.to_map().to_json();
    auto parts = evaluate(cfg);
    Curve merged{cfg.name, "stp", {}};
    for (std::size_t i = 0; i < cfg.grid.size(); ++i)
      for (const auto& p : parts)
        for (const auto& r : p.rows)
          if (r.sweep_value == cfg.grid[i]) merged.rows.push_back(r);
    curves.push_back(std::move(merged));
  }

  std::vector<fs::path> finish() {
    nlohmann::json sidecar{{"command", "figure"},
                           {"figure", id},
                           {"scale", opt.scale == Scale::desk ? "desk" : "paper"},
                           {"trials", trials()},
                           {"seed", opt.seed},
                           {"parameters", parameters},
                           {"substitutions", substitutions},
                           {"configs", configs}};
    return write_outputs(opt.output, "fig" + id, curves, std::move(sidecar));
  }
};

const std::vector<double> kFig2T{1.0, 0.8, 0.6, 0.4, 0.2};

void figure2(FigureContext& f) {
  f.parameters = {{"N", 5}, {"C", 3}, {"alpha", 4}, {"lambda_h", 1e-3}, {"T", kFig2T}, {"zipf_gamma", 1}};
  for (int M : {1, 2, 4}) {
    ExperimentConfig c = f.base(5, 3, 1.0);
    c.name = "fig2_M" + std::to_string(M);
    c.params.M = M;
    c.design = CacheDesign::explicit_T;
    c.T = kFig2T;
    c.sweep = SweepVariable::tau_db;
    c.grid = db_grid(-10, 10, 1);
    c.engines = {Engine::analytic, Engine::bound, Engine::monte_carlo};
    f.add_merged(c);
  }
}

void figure3(FigureContext& f) {
  f.parameters = {{"N", 5}, {"C", 3}, {"alpha", 4}, {"lambda_h", 1e-3}, {"T", kFig2T}, {"zipf_gamma", 1}};
  const Popularity pop = zipf(5, 1.0);
  const CachingDistribution T = validate(kFig2T, 3);
  for (int M : {1, 2, 4}) {
    Curve c{"fig3_M" + std::to_string(M), "outage", {}};
    for (double db : db_grid(-40, 0, 2.5)) {
      NetworkParams p;
      p.M = M;
      p.tau = config::db_to_linear(db);
      const StpEstimate est = stp_mrc_exact(T, pop, p);
      c.rows.push_back({db, 1.0 - est.value, est.error, "exact"});
      c.rows.push_back({db, outage_asymptotic(T, pop, p).value_at_tau, 0.0, "asymptotic"});
    }
    f.curves.push_back(std::move(c));
  }
}

void figure4(FigureContext& f) {
  f.parameters = {{"N", 5}, {"C", 2}, {"alpha", 4}, {"tau", 0.5}, {"lambda_h", 1e-3}, {"zipf_gamma", 0.4}, {"L", 3}};
  const Popularity pop = zipf(5, 0.4);
  for (int M : {1, 2, 4, 8}) {
    NetworkParams p;
    p.M = M;
    p.tau = 0.5;
    Curve c{"fig4_M" + std::to_string(M), "T", {}};
    const CachingDistribution mrc = cccp(pop, p, 2).final();
    const PzfSolution pzf = pzf_alternating(pop, r_table(p, 3), 2);
    for (std::size_t n = 0; n < pop.size(); ++n) c.rows.push_back({double(n + 1), mrc[n], 0.0, "cccp"});
    for (std::size_t n = 0; n < pop.size(); ++n) c.rows.push_back({double(n + 1), pzf.T[n], 0.0, "pzf_alternating"});
    f.curves.push_back(std::move(c));
  }
}

constexpr double kFig5Eps = 1e-8;

void figure5(FigureContext& f) {
  const std::vector<double> gammas{0.5, 1.0, 1.5};
  f.parameters = {{"N", 5}, {"C", 3}, {"M", 4}, {"alpha", 4}, {"lambda_h", 1e-3}, {"zipf_gamma", gammas}};
  f.substitutions.push_back("zipf exponents are not listed in the caption; using 0.5, 1, 1.5");
  f.substitutions.push_back("CCCP tolerance 1e-8: at low tau the objective changes by less than 1e-4 per step");
  for (double g : gammas) {
    const Popularity pop = zipf(5, g);
    const CachingDistribution T0 = optimize_mrc_asymptotic(pop, 3).T;
    Curve c{"fig5_gamma" + label(g), "outage", {}};
    for (double db : db_grid(-30, 10, 2.5)) {
      NetworkParams p;
      p.M = 4;
      p.tau = config::db_to_linear(db);
      const StpEstimate cc = stp_mrc_exact(cccp(pop, p, 3, kFig5Eps).final(), pop, p);
      const StpEstimate as = stp_mrc_exact(T0, pop, p);
      c.rows.push_back({db, 1.0 - cc.value, cc.error, "cccp"});
      c.rows.push_back({db, 1.0 - as.value, as.error, "asymptotic_optimum"});
    }
    f.curves.push_back(std::move(c));
  }
}

void figure6(FigureContext& f) {
  f.parameters = {{"N", 5}, {"C", 3}, {"alpha", 4}, {"lambda_h", 1e-3}, {"L", 3}, {"T", kFig2T}, {"zipf_gamma", 1}};
  for (auto [M, K] : std::vector<std::pair<int, int>>{{2, 1}, {2, 2}, {4, 1}, {4, 2}, {4, 4}}) {
    ExperimentConfig c = f.base(5, 3, 1.0);
    c.name = "fig6_M" + std::to_string(M) + "_K" + std::to_string(K);
    c.params.M = M;
    c.design = CacheDesign::explicit_T;
    c.T = kFig2T;
    c.receiver = ReceiverMode::pzf;
    c.K = {K};
    c.L = 3;
    c.sweep = SweepVariable::tau_db;
    c.grid = db_grid(-10, 10, 1);
    c.engines = {Engine::analytic, Engine::bound, Engine::monte_carlo};
    f.add_merged(c);
  }
}

void figure7(FigureContext& f) {
  f.parameters = {{"N", 5}, {"C", 3}, {"alpha", 4}, {"lambda_h", 1e-3}, {"M", 4}, {"L", 3}, {"zipf_gamma", 1}};
  const auto grid = f.opt.scale == Scale::desk ? db_grid(-10, 10, 5) : db_grid(-10, 10, 2.5);
  const Popularity pop = zipf(5, 1.0);
  Curve c{"fig7", "stp", {}};
  auto solves = nlohmann::json::array();
  for (double db : grid) {
    NetworkParams p;
    p.M = 4;
    p.tau = config::db_to_linear(db);
    const RTable table = r_table(p, 3);
    const PzfSolution alt = pzf_alternating(pop, table, 3);
    const PzfSolution opt = exhaustive_pzf(pop, table, 3);
    c.rows.push_back({db, alt.objective, 0.0, "alternating_upper_bound"});
    c.rows.push_back({db, opt.objective, 0.0, "exhaustive_upper_bound"});
    const StpEstimate ae = stp_pzf_exact(alt.K, alt.T, pop, p);
    const StpEstimate oe = stp_pzf_exact(opt.K, opt.T, pop, p);
    c.rows.push_back({db, ae.value, ae.error, "alternating_exact"});
    c.rows.push_back({db, oe.value, oe.error, "exhaustive_exact"});
    solves.push_back({{"tau_db", db}, {"alternating", alt.continuous_solves}, {"exhaustive", opt.continuous_solves}});
  }
  f.parameters["continuous_solves"] = solves;
  f.curves.push_back(std::move(c));
}

void figure8(FigureContext& f, char panel) {
  const bool desk = f.opt.scale == Scale::desk;
  const int N = desk ? kDeskN : 100;
  const int C = desk ? 6 : 30;
  if (desk) {
    f.substitutions.push_back("N = 100 reduced to 20");
    f.substitutions.push_back("C = 30 reduced to 6 (same fraction of N)");
  }
  f.substitutions.push_back("bound order L is not listed in the caption; using L = 3");
  ExperimentConfig c = f.base(N, C, 0.6);
  c.params.tau = 1.0;
  c.params.M = 6;
  c.L = 3;
  c.engines = {Engine::analytic};
  switch (panel) {
    case 'a':
      c.sweep = SweepVariable::M;
      c.grid = {1, 2, 3, 4, 5, 6, 7, 8};
      break;
    case 'b':
      c.sweep = SweepVariable::C;
      c.grid = desk ? std::vector<double>{2, 4, 6, 8, 10, 12, 14, 16, 18}
                    : std::vector<double>{10, 20, 30, 40, 50, 60, 70, 80, 90};
      break;
    case 'c':
      c.sweep = SweepVariable::alpha;
      c.grid = {3.0, 3.5, 4.0, 4.5, 5.0};
      break;
    default:
      c.sweep = SweepVariable::gamma;
      c.grid = {0.0, 0.3, 0.6, 0.9, 1.2, 1.5};
      break;
  }
  f.parameters = {{"N", N}, {"C", C}, {"tau", 1}, {"lambda_h", 1e-3}, {"alpha", 4}, {"M", 6}, {"zipf_gamma", 0.6},
                  {"sweep", to_string(c.sweep)}, {"grid", c.grid}};
  const std::string stem = std::string("fig8") + panel;
  const std::vector<std::pair<CacheDesign, std::string>> schemes{{CacheDesign::pzf, "opt_pzf"},
                                                                 {CacheDesign::cccp, "opt_mrc"},
                                                                 {CacheDesign::most_popular, "most_popular"},
                                                                 {CacheDesign::iid_popularity, "iid_popularity"},
                                                                 {CacheDesign::uniform, "uniform"}};
  for (const auto& [design, tag] : schemes) {
    ExperimentConfig s = c;
    s.design = design;
    s.receiver = design == CacheDesign::pzf ? ReceiverMode::optimize_k : ReceiverMode::mrc;
    s.name = stem + "_" + tag;
    f.add_merged(s);
  }
}

}  // namespace

const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"2", "3", "4", "5", "6", "7", "8a", "8b", "8c", "8d"};
  return ids;
}

std::vector<fs::path> figure(const std::string& id, const FigureOptions& options) {
  if (std::find(figure_ids().begin(), figure_ids().end(), id) == figure_ids().end())
    throw std::invalid_argument("unknown figure id '" + id + "'");
  FigureContext f{options, id, {}, {}, {}, {}};
  if (id == "2") figure2(f);
  else if (id == "3") figure3(f);
  else if (id == "4") figure4(f);
  else if (id == "5") figure5(f);
  else if (id == "6") figure6(f);
  else if (id == "7") figure7(f);
  else figure8(f, id[1]);
  return f.finish();
}

int guarded(const std::function<void()>& action, std::ostream& err) {
  try {
    action();
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ConvergenceError& e) {
    err << "numerical error: " << e.what() << " (estimate " << e.estimate() << ", error " << e.error() << ")\n";
    return 3;
  } catch (const BracketError& e) {
    err << "numerical error: " << e.what() << " (bracket " << e.lo() << ", " << e.hi() << ")\n";
    return 3;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << '\n';
    return 3;
  }
}

int run_file(const fs::path& file, const ConfigMap& overrides, std::ostream& err) {
  return guarded(
      [&] {
        ConfigMap m = config::load(file);
        m.merge(overrides);
        run(ExperimentConfig::from_map(m));
      },
      err);
}

}  // namespace cachesimo
