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
 * @file numerics.hpp
 * @brief Special functions, integer partitions and adaptive quadrature.
 *
 * Everything here is pure and reentrant.
 */
#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cachesimo {

/// Thrown when an argument falls outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Thrown when an adaptive quadrature exhausts its subdivision budget.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double estimate, double error)
      : std::runtime_error(what), estimate_(estimate), error_(error) {}

  double estimate() const noexcept { return estimate_; }
  double error() const noexcept { return error_; }

 private:
  double estimate_;
  double error_;
};

namespace numerics {

/// B(a, b) = ∫₀¹ u^{a-1}(1-u)^{b-1} du.
double beta(double a, double b);

/// B'(a, b, z) = ∫_z¹ u^{a-1}(1-u)^{b-1} du for 0 < z < 1.
double comp_inc_beta(double a, double b, double z);

/// Same as comp_inc_beta but accepts the closed interval: z = 0 gives B(a,b), z = 1 gives 0.
double comp_inc_beta_closed(double a, double b, double z);

/// S_a = Γ(a+1)^{-1/a}, the constant in the Alzer incomplete-gamma bounds.
double s_const(double a);

/// n choose k as a double (exact for the small arguments used here).
double binomial(int n, int k);

/// n! as a double.
double factorial(int n);

/// All (b_1, ..., b_k) with b_j >= 0 and Σ j·b_j = k.
struct PartitionSet {
  int k = 0;
  std::vector<std::vector<int>> elements;
};

/// Largest k for which partitions() is served from the precomputed table.
inline constexpr int kMaxPartitionOrder = 15;

/// Enumerates the multiplicity vectors of integer partitions of k.
/// k = 0 yields one empty element. Results for k <= kMaxPartitionOrder are cached.
const PartitionSet& partitions(int k);

enum class SemiInfiniteMap {
  rational,  ///< x = t / (1 - t)
  exponential,  ///< x = -log(1 - t); only for integrands with exponential tails
};

struct QuadratureSpec {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  int max_subdivisions = 2000;
  SemiInfiniteMap semi_infinite = SemiInfiniteMap::rational;

  /// Throws DomainError unless both tolerances are strictly positive.
  void check() const;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int subdivisions = 0;
};

using Integrand = std::function<double(double)>;

/// Globally adaptive Gauss-Kronrod (21 point) quadrature on [a, b].
QuadratureResult integrate(const Integrand& f, double a, double b, const QuadratureSpec& spec = {});

/// ∫₀^∞ f(x) dx through the variable change selected by spec.semi_infinite.
QuadratureResult integrate_semi_infinite(const Integrand& f, const QuadratureSpec& spec = {});

struct Interval {
  double lo;
  double hi;
};

using IntegrandND = std::function<double(std::span<const double>)>;

/// Nested adaptive quadrature over a rectangle of dimension 1 to 3; box[0] is the outermost axis.
/// Inner axes run at a tolerance one decade tighter than the axis enclosing them.
QuadratureResult integrate_box(const IntegrandND& f, std::span<const Interval> box,
                               const QuadratureSpec& spec = {});

}  // namespace numerics
}  // namespace cachesimo
