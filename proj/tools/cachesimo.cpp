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

// cachesimo command-line front end.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cachesimo/config.hpp"
#include "cachesimo/experiments.hpp"

namespace cs = cachesimo;
namespace cfg = cachesimo::config;

namespace {

struct Globals {
  long long seed = -1;
  int threads = -1;
  double tol = 0.0;
  long long trials = 0;
  std::string out;
  std::vector<std::string> sets;
};

cfg::ConfigMap overrides(const Globals& g) {
  cfg::ConfigMap m;
  for (const auto& s : g.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw cfg::ConfigError("--set expects key=value, got '" + s + "'");
    m.set_text(s.substr(0, eq), s.substr(eq + 1));
  }
  if (g.seed >= 0) m.set("seed", g.seed);
  if (g.threads >= 0) m.set("threads", g.threads);
  if (g.tol > 0.0) m.set("eps", g.tol);
  if (g.trials > 0) m.set("trials", g.trials);
  if (!g.out.empty()) m.set("output", g.out);
  return m;
}

cs::ExperimentConfig load(const std::string& path, const cfg::ConfigMap& extra, const Globals& g) {
  if (path.empty()) throw cfg::ConfigError("--config is required");
  cfg::ConfigMap m = cfg::load(path);
  m.merge(extra);
  m.merge(overrides(g));
  return cs::ExperimentConfig::from_map(m);
}

void report(const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) std::cout << f.string() << '\n';
}

cs::FigureOptions figure_options(const Globals& g, const std::string& scale) {
  cs::FigureOptions o;
  o.scale = cs::parse_scale(scale);
  if (g.trials > 0) o.trials = static_cast<std::uint64_t>(g.trials);
  if (g.seed >= 0) o.seed = static_cast<std::uint64_t>(g.seed);
  if (g.threads >= 0) o.lanes = g.threads;
  if (!g.out.empty()) o.output = g.out;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random caching STP analysis, simulation and optimization for SIMO networks"};
  app.set_version_flag("--version", cs::version());
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Monte Carlo seed")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", g.threads, "worker threads (default: CACHE_SIMO_THREADS or hardware)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--tol", g.tol, "optimizer stopping tolerance")->check(CLI::PositiveNumber);
  app.add_option("--trials", g.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory");
  app.add_option("--set", g.sets, "override a config key (key=value)");

  std::string config_path;
  std::string scale = "desk";

  auto* analyze = app.add_subcommand("analyze", "analytic STP and bounds over a sweep");
  analyze->require_subcommand(1);
  bool fig2 = false;
  bool fig6 = false;
  auto* analyze_mrc = analyze->add_subcommand("mrc", "MRC receiver");
  analyze_mrc->add_option("--config", config_path, "experiment file");
  analyze_mrc->add_flag("--fig2", fig2, "emit the MRC figure data (three CSVs, M = 1, 2, 4)");
  analyze_mrc->add_option("--scale", scale, "desk or paper (with --fig2)");
  auto* analyze_pzf = analyze->add_subcommand("pzf", "PZF receiver");
  analyze_pzf->add_option("--config", config_path, "experiment file");
  analyze_pzf->add_flag("--fig6", fig6, "emit the PZF figure data");
  analyze_pzf->add_option("--scale", scale, "desk or paper (with --fig6)");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo STP over a sweep");
  simulate->add_option("--config", config_path, "experiment file")->required();

  auto* optimize = app.add_subcommand("optimize", "caching (and DoF) optimization");
  std::string method;
  double eps = 0.0;
  optimize->add_option("method", method, "mrc | mrc-asymptotic | pzf | pzf-exhaustive")
      ->required()
      ->check(CLI::IsMember({"mrc", "mrc-asymptotic", "pzf", "pzf-exhaustive"}));
  optimize->add_option("--config", config_path, "experiment file")->required();
  optimize->add_option("--eps", eps, "CCCP stopping tolerance")->check(CLI::PositiveNumber);

  auto* baselines = app.add_subcommand("baselines", "exact STP of the three baseline designs");
  baselines->add_option("--config", config_path, "experiment file")->required();

  auto* fig = app.add_subcommand("figure", "emit the data behind one figure");
  std::string fig_id;
  fig->add_option("id", fig_id, "2, 3, 4, 5, 6, 7, 8a, 8b, 8c or 8d")->required();
  fig->add_option("--scale", scale, "desk or paper");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  return cs::guarded(
      [&] {
        if (fig->parsed()) {
          report(cs::figure(fig_id, figure_options(g, scale)));
        } else if (analyze_mrc->parsed() || analyze_pzf->parsed()) {
          const bool mrc = analyze_mrc->parsed();
          if (fig2 || fig6) {
            if (!config_path.empty()) throw cfg::ConfigError("--fig2/--fig6 do not take --config");
            report(cs::figure(mrc ? "2" : "6", figure_options(g, scale)));
            return;
          }
          cfg::ConfigMap extra;
          const cfg::ConfigMap file = config_path.empty() ? cfg::ConfigMap{} : cfg::load(config_path);
          if (mrc) extra.set("receiver", "mrc");
          else if (!file.has("receiver")) extra.set("receiver", "pzf");
          if (!file.has("engine")) extra.set("engine", std::vector<std::string>{"analytic", "bound"});
          report(cs::run(load(config_path, extra, g)));
        } else if (simulate->parsed()) {
          cfg::ConfigMap extra;
          extra.set("engine", "monte_carlo");
          report(cs::run(load(config_path, extra, g)));
        } else if (optimize->parsed()) {
          cfg::ConfigMap extra;
          if (eps > 0.0) extra.set("eps", eps);
          report(cs::run_optimizer(load(config_path, extra, g), cs::parse_optimizer(method)));
        } else if (baselines->parsed()) {
          report(cs::run_baselines(load(config_path, {}, g)));
        }
      },
      std::cerr);
}
