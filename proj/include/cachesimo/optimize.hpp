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
 * @file optimize.hpp
 * @brief Caching and DoF optimizers.
 *
 * Every continuous step is a separable problem max Σ_n u_n(T_n) s.t. box and
 * Σ T_n = C with each u_n concave. Its KKT point is found by bisection on the
 * multiplier with an inner per-file root search (see kkt_allocate).
 */
#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cachesimo/analysis_pzf.hpp"
#include "cachesimo/model.hpp"

namespace cachesimo {

/// Thrown when a multiplier bracket does not straddle the cache budget.
class BracketError : public std::runtime_error {
 public:
  BracketError(const std::string& what, double lo, double hi) : std::runtime_error(what), lo_(lo), hi_(hi) {}
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// Per-file marginal utility g(n, x), non-increasing in x on [0,1].
using Marginal = std::function<double(std::size_t, double)>;

struct KktSolution {
  std::vector<double> T;
  double multiplier = 0.0;
};

/// Solves g(n, T_n) = v on interior coordinates, T_n = 0 if g(n,0) <= v, T_n = 1 if g(n,1) >= v,
/// with v chosen so that Σ T_n = C. When the total jumps across v (flat marginals) the two
/// one-sided solutions are blended so the budget is met exactly.
KktSolution kkt_allocate(std::size_t N, int C, const Marginal& g, double v_lo, double v_hi);

/// Convex split of the q^{mrc,u} derivative: f_o over odd k, f_e over even k >= 2.
struct DcSplit {
  double f_o;
  double f_e;
};

DcSplit dc_split_derivatives(double x, const NetworkParams& params);

/// Coefficients c_{1,k}(S_M), c_{2,k}(S_M) for k = 0..M, reused across many derivative calls.
struct DcCoefficients {
  explicit DcCoefficients(const NetworkParams& params);
  DcSplit operator()(double x) const;
  int M;
  std::vector<double> c1, c2;
};

struct CccpStep {
  CachingDistribution T;
  double multiplier;
};

/// One convexified subproblem around T_prev. The returned multiplier is v†.
CccpStep cccp_subproblem(const CachingDistribution& T_prev, const Popularity& pop, const NetworkParams& params);

struct CccpTrace {
  std::vector<CachingDistribution> iterates;
  std::vector<double> objectives;
  std::vector<double> multipliers;  ///< multipliers[0] is NaN for the initial point
  bool converged = false;
  int iterations = 0;

  const CachingDistribution& final() const { return iterates.back(); }
  void write_csv(std::ostream& out) const;
};

inline constexpr int kCccpMaxIterations = 500;

/// Algorithm starting from T_n = C/N; stops when the objective improves by less than epsilon.
CccpTrace cccp(const Popularity& pop, const NetworkParams& params, int C, double epsilon = 1e-4,
               int max_iterations = kCccpMaxIterations);

/// Maximizes Σ a_n T_n/(c_1 T_n + c_2) directly (M = 1 is already concave).
CachingDistribution optimize_mrc_m1(const Popularity& pop, const NetworkParams& params, int C);

struct AsymptoticOptimum {
  CachingDistribution T;
  double nu;
  double residual;  ///< |Σ min(√(a_n/ν), 1) - C|
};

/// Low-SIR optimum T_n = min(√(a_n/ν), 1); independent of every physical parameter.
AsymptoticOptimum optimize_mrc_asymptotic(const Popularity& pop, int C);

/// Maximizes Σ a_n q^{pzf,u}_n(K_n, T_n) over T for fixed K.
CachingDistribution pzf_continuous(const DofAllocation& K, const Popularity& pop, const RTable& table, int C);

/// Per file, K_n = argmax_K q^{pzf,u}_n(K, T_n) with ties toward larger K. evaluations counts objective terms.
DofAllocation pzf_discrete(const CachingDistribution& T, const Popularity& pop, const RTable& table,
                           long* evaluations = nullptr);

struct PzfIterate {
  DofAllocation K;
  CachingDistribution T;
  double objective;
};

struct PzfSolution {
  DofAllocation K{std::vector<int>{1}, 1};
  CachingDistribution T;
  double objective = 0.0;
  int iterations = 0;
  int continuous_solves = 0;
  std::vector<PzfIterate> trace;

  void write_csv(std::ostream& out) const;
};

inline constexpr int kAlternatingMaxIterations = 100;
inline constexpr double kExhaustiveLimit = 1e5;

PzfSolution pzf_alternating(const Popularity& pop, const RTable& table, int C);
PzfSolution pzf_alternating(const Popularity& pop, const NetworkParams& params, int C, int L);

PzfSolution exhaustive_pzf(const Popularity& pop, const RTable& table, int C);
PzfSolution exhaustive_pzf(const Popularity& pop, const NetworkParams& params, int C, int L);

}  // namespace cachesimo
