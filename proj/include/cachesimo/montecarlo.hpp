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
 * @file montecarlo.hpp
 * @brief Simulation of the typical user in a finite disk of helpers.
 *
 * Every trial derives its own generator from (seed, trial index), so an
 * estimate does not depend on how trials are spread over threads.
 */
#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "cachesimo/analysis_mrc.hpp"
#include "cachesimo/model.hpp"

namespace cachesimo {

struct SimConfig {
  std::uint64_t trials = 10000;
  std::uint64_t seed = 1;
  double radius = 0.0;  ///< 0 selects the automatic rule
  int lanes = 0;        ///< worker threads; 0 selects CACHE_SIMO_THREADS or the hardware count

  void check() const;
};

/// How each helper fills its cache.
struct CacheLaw {
  /// Exactly-C systematic sampling with the given marginals.
  static CacheLaw marginals(const CachingDistribution& T);
  /// C independent popularity draws per helper (duplicates collapse).
  static CacheLaw iid(const Popularity& pop, int C);
  /// Cache law matching a baseline design.
  static CacheLaw for_baseline(BaselineKind kind, const Popularity& pop, int C);
  /// marginals(T), or iid(pop, C) when T holds iid effective marginals.
  static CacheLaw for_design(const CachingDistribution& T, const Popularity& pop);

  std::size_t files() const;
  /// Smallest positive presence probability of any file.
  double min_positive_presence() const;
  std::vector<int> draw(std::mt19937_64& rng) const;

  std::optional<CachingDistribution> T;
  std::optional<Popularity> pop;
  int C = 0;
};

/// One snapshot of the network seen from the typical user at the origin.
struct NetworkRealization {
  std::vector<double> x, y;              ///< helper positions
  std::vector<double> distance;          ///< non-decreasing
  std::vector<std::vector<int>> caches;  ///< 0-based file indices per helper
  /// helper-major channel entries: helper i occupies [i*M, (i+1)*M)
  std::vector<std::complex<double>> channels;
  int M = 1;
  double radius = 0.0;
  int enlargements = 0;

  std::size_t size() const { return distance.size(); }
  std::span<const std::complex<double>> channel(std::size_t i) const {
    return std::span<const std::complex<double>>(channels).subspan(i * static_cast<std::size_t>(M),
                                                                    static_cast<std::size_t>(M));
  }
  /// Index of the nearest helper holding file n, if any.
  std::optional<std::size_t> nearest_cacher(int n) const;
};

/// R = max(√(ln 10⁶ / (πλ_h T_min⁺)), √(500 / (πλ_h))).
double auto_radius(const NetworkParams& params, double min_positive_presence);

/// Random generator for (seed, trial, stream).
std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream);

/// Draws a realization. When required_file is set the disk is doubled (adding helpers in the
/// new annulus) until some helper caches it and at least min_helpers exist.
NetworkRealization realize(const NetworkParams& params, const CacheLaw& law, const SimConfig& cfg,
                           std::uint64_t trial, std::optional<int> required_file = std::nullopt,
                           std::size_t min_helpers = 1);

/// Received signal and interference for one link. Powers include path loss.
struct LinkSample {
  double signal = 0.0;
  double interference = 0.0;
  double signal_fading = 0.0;  ///< |w^H h_serving|²
  std::size_t serving = 0;
  double sir() const;
};

/// MRC link; throws DomainError if nobody caches n.
LinkSample link_mrc(const NetworkRealization& r, int n, const NetworkParams& params);

/// PZF link with K boost DoF; throws DomainError if fewer than M-K+1 helpers exist.
LinkSample link_pzf(const NetworkRealization& r, int n, int K, const NetworkParams& params);

double sir_mrc(const NetworkRealization& r, int n, const NetworkParams& params);
double sir_pzf(const NetworkRealization& r, int n, int K, const NetworkParams& params);

/// Receive projection of the PZF filter: returns w (unit norm) for a serving index.
std::vector<std::complex<double>> pzf_filter(const NetworkRealization& r, std::size_t serving, int K, int M);

struct MrcReceiver {};
struct PzfReceiver {
  DofAllocation K;
};
using Receiver = std::variant<MrcReceiver, PzfReceiver>;

struct SimulationResult {
  std::vector<StpEstimate> per_tau;  ///< one estimate per threshold, same trials
  std::uint64_t trials = 0;
  std::uint64_t enlarged_trials = 0;
  std::uint64_t infinite_sir = 0;
};

/// Simulates the given thresholds on shared realizations (SIR does not depend on τ).
SimulationResult simulate(const Receiver& receiver, const CacheLaw& law, const Popularity& pop,
                          const NetworkParams& params, std::span<const double> taus, const SimConfig& cfg);

/// Single-threshold form using params.tau.
StpEstimate estimate_stp(const Receiver& receiver, const CacheLaw& law, const Popularity& pop,
                         const NetworkParams& params, const SimConfig& cfg);

StpEstimate estimate_stp(const Receiver& receiver, const CachingDistribution& T, const Popularity& pop,
                         const NetworkParams& params, const SimConfig& cfg);

/// Number of worker threads for a requested count (0 = CACHE_SIMO_THREADS or hardware).
int resolve_lanes(int requested);

}  // namespace cachesimo
