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

/**
 * @file experiments.hpp
 * @brief Experiment configs, sweeps, CSV emission and figure data.
 *
 * Every CSV has the header `sweep_value,<metric>,error,kind` in long format:
 * one row per (sweep point, estimate kind). Each batch of CSVs gets a JSON
 * sidecar with the resolved config and the tool version.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cachesimo/analysis_pzf.hpp"
#include "cachesimo/config.hpp"
#include "cachesimo/model.hpp"
#include "cachesimo/montecarlo.hpp"
#include "cachesimo/optimize.hpp"

namespace cachesimo {

std::string version();

enum class CacheDesign { explicit_T, cccp, asymptotic, pzf, pzf_exhaustive, most_popular, iid_popularity, uniform };
enum class ReceiverMode { mrc, pzf, optimize_k };
enum class Engine { analytic, bound, monte_carlo };
enum class SweepVariable { tau_db, M, C, alpha, gamma };

std::string to_string(CacheDesign d);
std::string to_string(ReceiverMode r);
std::string to_string(Engine e);
std::string to_string(SweepVariable s);

struct ExperimentConfig {
  std::string name = "experiment";
  std::filesystem::path output = ".";
  std::filesystem::path r_cache;  ///< directory for cached R tables; empty disables caching

  NetworkParams params;
  int N = 0;
  std::optional<double> zipf_gamma;
  std::vector<double> popularity;  ///< explicit a, used when zipf_gamma is unset
  int C = 1;
  CacheDesign design = CacheDesign::explicit_T;
  std::vector<double> T;  ///< explicit design only

  ReceiverMode receiver = ReceiverMode::mrc;
  std::vector<int> K;  ///< one entry means uniform
  int L = 3;

  SweepVariable sweep = SweepVariable::tau_db;
  std::vector<double> grid;
  std::vector<Engine> engines{Engine::analytic};

  SimConfig sim;
  double eps = 1e-4;  ///< CCCP stopping tolerance

  /// Resolves and validates a parsed file; all failures surface as ConfigError.
  static ExperimentConfig from_map(const config::ConfigMap& map);
  /// Fully explicit form; from_map(to_map()) reproduces this config.
  config::ConfigMap to_map() const;
};

/// Known config keys.
const std::vector<std::string>& config_keys();

/// One sweep point.
struct Scenario {
  NetworkParams params;
  Popularity pop;
  int C;
};

Scenario scenario_at(const ExperimentConfig& cfg, double sweep_value);

/// Caching distribution and (for PZF receivers) DoF allocation used at a point.
struct Design {
  CachingDistribution T;
  std::optional<DofAllocation> K;
};

Design design_at(const ExperimentConfig& cfg, const Scenario& s);

struct CurveRow {
  double sweep_value;
  double value;
  double error;
  std::string kind;
};

struct Curve {
  std::string name;            ///< file stem
  std::string metric = "stp";  ///< second CSV column
  std::vector<CurveRow> rows;
};

void write_csv(const Curve& curve, std::ostream& out);

/// Writes <dir>/<curve.name>.csv for every curve and <dir>/<stem>.json holding sidecar plus
/// "version" and "outputs". Returns every path written.
std::vector<std::filesystem::path> write_outputs(const std::filesystem::path& dir, const std::string& stem,
                                                 const std::vector<Curve>& curves, nlohmann::json sidecar);

/// One curve per engine, named <name>_<engine>.
std::vector<Curve> evaluate(const ExperimentConfig& cfg);

/// Evaluates and writes the curves and sidecar.
std::vector<std::filesystem::path> run(const ExperimentConfig& cfg);

enum class OptimizerKind { mrc, mrc_asymptotic, pzf, pzf_exhaustive };
OptimizerKind parse_optimizer(const std::string& name);

/// Runs an optimizer at the first sweep point and writes its trace CSV (iterative methods)
/// and a result JSON.
std::vector<std::filesystem::path> run_optimizer(const ExperimentConfig& cfg, OptimizerKind kind);

/// Exact STP of the three baselines (MRC receiver) over the sweep, plus Monte Carlo if requested.
std::vector<std::filesystem::path> run_baselines(const ExperimentConfig& cfg);

enum class Scale { paper, desk };
Scale parse_scale(const std::string& name);

struct FigureOptions {
  Scale scale = Scale::desk;
  std::uint64_t trials = 0;  ///< 0 selects the per-scale default
  std::uint64_t seed = 1;
  int lanes = 0;
  std::filesystem::path output = ".";
};

const std::vector<std::string>& figure_ids();

/// Emits the data for one figure; throws std::invalid_argument for an unknown id.
std::vector<std::filesystem::path> figure(const std::string& id, const FigureOptions& options);

/// Runs action and maps its exceptions to an exit status: 0 ok, 2 config error, 3 numerical
/// error. Diagnostics go to err.
int guarded(const std::function<void()>& action, std::ostream& err);

/// Loads a config file, applies overrides, evaluates and writes outputs. Returns the exit status.
int run_file(const std::filesystem::path& file, const config::ConfigMap& overrides, std::ostream& err);

}  // namespace cachesimo
