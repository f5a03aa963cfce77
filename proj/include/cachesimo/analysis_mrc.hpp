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
 * @file analysis_mrc.hpp
 * @brief Successful transmission probability with the MRC receiver.
 *
 * Distances enter only through u = πλ_h x², the mean number of helpers inside
 * radius x. In that unit the serving distance of file n has density
 * T_n e^{-T_n u} and every interference Laplace term is e^{-rate·u} times a
 * polynomial in u, so the STP integrals either reduce to Gamma moments or are
 * evaluated by quadrature over u.
 */
#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cachesimo/model.hpp"
#include "cachesimo/numerics.hpp"

namespace cachesimo {

enum class EstimateKind { exact, upper_bound, lower_bound, asymptotic, monte_carlo };

std::string to_string(EstimateKind kind);

/// A successful transmission probability together with its provenance.
struct StpEstimate {
  double value = 0.0;
  EstimateKind kind = EstimateKind::exact;
  double error = 0.0;  ///< numerical error bound, or 95% half-width for monte_carlo
  std::vector<double> per_file;
};

/// Building blocks of the interference Laplace transform and its normalized derivatives.
namespace laplace {

/// Interferers start at distance y from a user served at distance x; onset = (x/y)^α.
/// onset = ∞ (y = 0) means interferers may be arbitrarily close.
inline constexpr double kFromOrigin = std::numeric_limits<double>::infinity();

/// Exponent rate β: L_I = exp(-T·β·u), β = δ τ^δ B'(δ, 1-δ, 1/(1+τ·onset)).
double rate(double tau, double delta, double onset);

/// Partition-term weight γ_j = δ τ^δ B'(δ+1, j-δ, 1/(1+τ·onset)).
double weight(int j, double tau, double delta, double onset);

/// Coefficients A_p (p = 0..k) of the normalized k-th derivative term, so that
/// L̃^k(T) = e^{-T β u} Σ_p A_p u^p. weights[j-1] = γ_j for j = 1..k.
std::vector<double> derivative_poly(int k, double T, const std::vector<double>& weights);

/// Product of two polynomials given by coefficient vectors.
std::vector<double> poly_mul(const std::vector<double>& p, const std::vector<double>& q);

/// p += scale * q
void poly_axpy(std::vector<double>& p, double scale, const std::vector<double>& q);

double poly_eval(const std::vector<double>& p, double u);

}  // namespace laplace

/// 𝓛_I(T,x,y) for k = 0, else the normalized derivative term 𝓛̃^k_I(T,x,y).
/// y = 0 selects interferers from the origin, y = x those beyond the serving helper.
double laplace_terms(double T, double x, double y, int k, const NetworkParams& params);

enum class MrcMethod {
  closed_form,  ///< Gamma-moment reduction of the polynomial-times-exponential integrand
  quadrature,   ///< adaptive quadrature over u using laplace_terms
  dual,         ///< both; value from the closed form, error covers their disagreement
};

/// Per-file STP for one storage probability.
double stp_mrc_file(double T, const NetworkParams& params, MrcMethod method = MrcMethod::closed_form,
                    double* error = nullptr);

/// Σ_n a_n q_{M,n}(T_n). Throws ConvergenceError when the two routes of MrcMethod::dual disagree.
StpEstimate stp_mrc_exact(const CachingDistribution& T, const Popularity& pop, const NetworkParams& params,
                          MrcMethod method = MrcMethod::dual);

/// (c_{1,k}(x), c_{2,k}(x)); k = 0 gives (1, 0).
std::pair<double, double> c_coeffs(int k, double x, const NetworkParams& params);

/// M = 1 closed form T_n / (c_{1,1}(1) T_n + c_{2,1}(1)).
StpEstimate stp_mrc_m1(const CachingDistribution& T, const Popularity& pop, const NetworkParams& params);

/// Per-file bound 1 - Σ_{k=0}^M (M choose k)(-1)^k T/(c_{1,k}(x)T + c_{2,k}(x)) with x = S_M (upper) or 1 (lower).
double mrc_bound_file(double T, const NetworkParams& params, bool upper);

struct MrcBounds {
  StpEstimate upper;
  StpEstimate lower;
};

MrcBounds stp_mrc_bounds(const CachingDistribution& T, const Popularity& pop, const NetworkParams& params);

/// q^{mrc,u} on a raw vector (no validation); used inside the optimizers.
double mrc_upper_objective(std::span<const double> T, const Popularity& pop, const NetworkParams& params);

struct AsymptoticOutage {
  double coefficient;   ///< e^mrc; +∞ when some requested file is never cached
  double order_gain;    ///< 2/α
  double value_at_tau;  ///< τ^{2/α} e^mrc
  int series_terms;     ///< explicit terms summed before the exact tail
};

/// Σ_{m=M}^∞ B(δ+1, m-δ): explicit terms plus the telescoped remainder.
double outage_series(int M, double delta, int* terms = nullptr);

/// Low-SIR outage τ^{2/α}·(2/α)Σ_n a_n(1/T_n - 1)Σ_{m>=M} B(2/α+1, m-2/α).
AsymptoticOutage outage_asymptotic(const CachingDistribution& T, const Popularity& pop,
                                   const NetworkParams& params);

}  // namespace cachesimo
