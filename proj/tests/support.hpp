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

// Helpers shared by the test programs.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace cachesimo::testing {

/// Asymptotic Kolmogorov distribution tail with the Stephens small-sample correction.
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

/// One-sample KS p-value of samples against the continuous CDF.
inline double ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    d = std::max({d, F - i / n, (i + 1) / n - F});
  }
  return ks_pvalue(d, samples.size());
}

/// Regularized lower incomplete gamma P(k, x) for integer k (Erlang CDF).
inline double erlang_cdf(int k, double x) {
  if (x <= 0.0) return 0.0;
  double term = 1.0;
  double sum = 1.0;
  for (int i = 1; i < k; ++i) {
    term *= x / i;
    sum += term;
  }
  return 1.0 - std::exp(-x) * sum;
}

/// Composite midpoint rule with n cells; deliberately independent of the library quadrature.
inline double midpoint(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += f(a + (i + 0.5) * h);
  return s * h;
}

/// Composite Simpson rule with an even number n of cells.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * ((i % 2) ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Multiplicity vectors (b_1..b_k) with Σ j b_j = k, by brute-force search.
inline std::vector<std::vector<int>> brute_partitions(int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> b(static_cast<std::size_t>(k), 0);
  std::function<void(int, int)> rec = [&](int j, int left) {
    if (j > k) {
      if (left == 0) out.push_back(b);
      return;
    }
    for (int c = 0; c * j <= left; ++c) {
      b[static_cast<std::size_t>(j - 1)] = c;
      rec(j + 1, left - c * j);
    }
    b[static_cast<std::size_t>(j - 1)] = 0;
  };
  rec(1, k);
  return out;
}

}  // namespace cachesimo::testing
