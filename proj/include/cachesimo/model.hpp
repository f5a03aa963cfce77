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
 * @file model.hpp
 * @brief Scenario parameters, popularity, caching distributions and DoF allocations.
 */
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cachesimo/numerics.hpp"

namespace cachesimo {

/// Physical-layer scenario. SIR is power free so only geometry and thresholds appear.
struct NetworkParams {
  double lambda_h = 1e-3;  ///< helper density per unit area
  double alpha = 4.0;      ///< path-loss exponent, > 2
  double tau = 1.0;        ///< SIR threshold, linear scale
  int M = 1;               ///< receive antennas

  /// Throws DomainError if any field is out of range.
  void check() const;
  /// 2/α
  double delta() const { return 2.0 / alpha; }
};

/// A file request distribution, ordered from most to least popular.
class Popularity {
 public:
  /// Validates Σa = 1 and non-increasing order. Strict ordering is recorded in strictly_ordered().
  explicit Popularity(std::vector<double> a);

  std::size_t size() const { return a_.size(); }
  double operator[](std::size_t n) const { return a_[n]; }
  std::span<const double> values() const { return a_; }
  /// False when some a_n == a_{n+1}; accepted, but sortedness results then only hold weakly.
  bool strictly_ordered() const { return strict_; }

 private:
  std::vector<double> a_;
  bool strict_ = true;
};

/// a_n ∝ n^{-γ}.
Popularity zipf(int N, double gamma);

enum class Violation { none, box, sum, cache_size, length };

/// Thrown by validate(); carries the first constraint that failed.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(Violation kind, std::size_t index, double amount, const std::string& what)
      : std::invalid_argument(what), kind_(kind), index_(index), amount_(amount) {}
  Violation kind() const noexcept { return kind_; }
  /// Offending file index (0-based) for box violations.
  std::size_t index() const noexcept { return index_; }
  /// Magnitude of the violation.
  double amount() const noexcept { return amount_; }

 private:
  Violation kind_;
  std::size_t index_;
  double amount_;
};

inline constexpr double kSumTolerance = 1e-9;

/// Per-file storage probabilities T with 0 <= T_n <= 1 and Σ T_n = C.
class CachingDistribution {
 public:
  std::size_t size() const { return T_.size(); }
  double operator[](std::size_t n) const { return T_[n]; }
  std::span<const double> values() const { return T_; }
  int cache_size() const { return C_; }
  /// True for distributions built by baseline(iid_popularity): Σ T_n <= C instead of == C.
  bool effective_marginals() const { return effective_; }

  friend CachingDistribution validate(std::vector<double> T, int C);
  friend CachingDistribution effective_marginal_distribution(std::vector<double> T, int C);

 private:
  std::vector<double> T_;
  int C_ = 0;
  bool effective_ = false;
};

/// Checks the box and sum constraints; throws ValidationError describing the violation.
CachingDistribution validate(std::vector<double> T, int C);

/// Builds an exempt distribution (only 0 <= T_n <= 1 and Σ T_n <= C are checked).
CachingDistribution effective_marginal_distribution(std::vector<double> T, int C);

/// Per-file boost DoF K_n ∈ {1..M}.
class DofAllocation {
 public:
  DofAllocation(std::vector<int> K, int M);
  static DofAllocation uniform(std::size_t N, int K, int M);

  std::size_t size() const { return K_.size(); }
  int operator[](std::size_t n) const { return K_[n]; }
  std::span<const int> values() const { return K_; }
  int antennas() const { return M_; }
  bool operator==(const DofAllocation& other) const = default;

 private:
  std::vector<int> K_;
  int M_ = 1;
};

enum class BaselineKind { most_popular, iid_popularity, uniform };

BaselineKind parse_baseline(const std::string& name);
std::string to_string(BaselineKind kind);

/// Baseline caching designs. iid_popularity returns the effective presence marginals 1-(1-a_n)^C.
CachingDistribution baseline(BaselineKind kind, const Popularity& pop, int C);

/// Draws one helper cache for the iid_popularity baseline: C independent draws from a, duplicates collapse.
std::vector<int> sample_iid_cache(const Popularity& pop, int C, std::mt19937_64& rng);

/// Exactly C distinct file indices (0-based, ascending) with Pr[n selected] = T_n, by systematic sampling.
std::vector<int> sample_cache(const CachingDistribution& T, std::mt19937_64& rng);

}  // namespace cachesimo
