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
 * @file analysis_pzf.hpp
 * @brief Successful transmission probability with the partial zero-forcing receiver.
 *
 * A PZF receiver with K boost DoF cancels the D = M - K nearest interferers.
 * stp_pzf_exact evaluates the exact per-file STP; r_table and stp_pzf_upper
 * give the L-parameterized upper bound, which is a polynomial in T_n once the
 * table R_{M,K,m} is known.
 *
 * Two routes exist for every double integral. The literal one integrates the
 * order-distance pdfs over the ordered region. The reduced one substitutes the
 * distance ratio ρ = (near/far)², so the unbounded radial integral collapses to
 * a Gamma moment and only a 1-D integral over ρ ∈ (0,1) remains.
 */
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cachesimo/analysis_mrc.hpp"
#include "cachesimo/model.hpp"

namespace cachesimo {

/// Density h_{d_j}(x) of the distance to the j-th nearest point of a PPP with density lambda.
double order_distance_pdf(int j, double x, double lambda);

/// Joint density of (d_i, d_j), j > i, at (x, y); zero unless x < y.
double joint_pdf_f(int i, int j, double x, double y, double lambda);

/// Joint density of the serving distance x and the distance y of the j-th nearest
/// non-storing helper, normalized over 0 < y < x; zero unless y < x. Throws at T = 1.
double joint_pdf_g(double T, double x, double y, int j, double lambda);

enum class PzfMethod {
  reduced,  ///< 1-D integrals over the distance ratio
  nested,   ///< literal 2-D integrals over (x, y)
};

/// Exact per-file STP with K boost DoF; K == M delegates to stp_mrc_file.
double stp_pzf_file(int K, double T, const NetworkParams& params, PzfMethod method = PzfMethod::reduced,
                    double* error = nullptr);

StpEstimate stp_pzf_exact(const DofAllocation& K, const CachingDistribution& T, const Popularity& pop,
                          const NetworkParams& params, PzfMethod method = PzfMethod::reduced);

/// Largest supported bound order; higher orders need integrals above three dimensions.
inline constexpr int kMaxBoundOrder = 3;

/// R_{M,K,m} for K ∈ {1..M}, m ∈ {1..M-K+L}. Immutable once built.
class RTable {
 public:
  RTable(NetworkParams params, int L, std::vector<std::vector<double>> values);

  int M() const { return params_.M; }
  int L() const { return L_; }
  const NetworkParams& params() const { return params_; }
  /// Number of ranks stored for K: M - K + L.
  int ranks(int K) const { return params_.M - K + L_; }
  double operator()(int K, int m) const;
  const std::vector<std::vector<double>>& values() const { return values_; }

  /// True if the table was built for the same (λ_h, α, τ, M).
  bool matches(const NetworkParams& params) const;

  std::string to_json() const;
  static RTable from_json(const std::string& text);

 private:
  NetworkParams params_;
  int L_;
  std::vector<std::vector<double>> values_;  // values_[K-1][m-1]
};

enum class RTableMethod {
  reduced,  ///< ratio substitution, at most 1-D quadrature per entry
  nested,   ///< literal nested quadrature (up to 3-D)
};

/// One entry R_{M,K,m} with M = params.M.
double r_entry(const NetworkParams& params, int K, int m, RTableMethod method = RTableMethod::reduced);

/// Throws DomainError for L outside 1..kMaxBoundOrder.
RTable r_table(const NetworkParams& params, int L, RTableMethod method = RTableMethod::reduced);

/// Reads the table for (params, L) from cache_dir if present, else computes and stores it.
RTable r_table_cached(const NetworkParams& params, int L, const std::filesystem::path& cache_dir);

/// Per-file bound Σ_{m=1}^{J} T(1-T)^{m-1}R_m + (1-T)^J R_{J+1}, J = M-K+L-1.
double pzf_upper_file(int K, double T, const RTable& table);

/// d/dT of pzf_upper_file; nonnegative and non-increasing on [0,1].
double pzf_upper_derivative(int K, double T, const RTable& table);

StpEstimate stp_pzf_upper(const DofAllocation& K, const CachingDistribution& T, const Popularity& pop,
                          const RTable& table);

/// Σ_n a_n pzf_upper_file on raw vectors (no validation).
double pzf_upper_objective(std::span<const int> K, std::span<const double> T, const Popularity& pop,
                           const RTable& table);

}  // namespace cachesimo
