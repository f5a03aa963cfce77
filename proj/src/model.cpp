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
#include "cachesimo/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cachesimo {

void NetworkParams::check() const {
  if (!(lambda_h > 0.0)) throw DomainError("NetworkParams: lambda_h must be > 0");
  if (!(alpha > 2.0)) throw DomainError("NetworkParams: alpha must be > 2");
  if (!(tau > 0.0)) throw DomainError("NetworkParams: tau must be > 0");
  if (M < 1) throw DomainError("NetworkParams: M must be >= 1");
  if (M > numerics::kMaxPartitionOrder + 1) {
    throw DomainError("NetworkParams: M above " + std::to_string(numerics::kMaxPartitionOrder + 1) +
                      " is not supported");
  }
}

Popularity::Popularity(std::vector<double> a) : a_(std::move(a)) {
  if (a_.size() < 2) throw DomainError("Popularity: need at least 2 files");
  double sum = 0.0;
  for (double v : a_) {
    if (!(v >= 0.0)) throw DomainError("Popularity: probabilities must be nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "Popularity: probabilities sum to " << sum << ", expected 1";
    throw DomainError(os.str());
  }
  for (std::size_t n = 1; n < a_.size(); ++n) {
    if (a_[n] > a_[n - 1]) throw DomainError("Popularity: files must be ordered by non-increasing popularity");
    if (a_[n] == a_[n - 1]) strict_ = false;
  }
}

Popularity zipf(int N, double gamma) {
  if (N < 2) throw DomainError("zipf: N must be >= 2");
  if (!(gamma >= 0.0)) throw DomainError("zipf: gamma must be >= 0");
  std::vector<double> a(static_cast<std::size_t>(N));
  for (int n = 1; n <= N; ++n) a[static_cast<std::size_t>(n - 1)] = std::pow(static_cast<double>(n), -gamma);
  const double norm = std::accumulate(a.begin(), a.end(), 0.0);
  for (double& v : a) v /= norm;
  if (gamma == 0.0) std::fill(a.begin(), a.end(), 1.0 / N);
  // renormalize once more so the sum is within rounding of 1
  const double again = std::accumulate(a.begin(), a.end(), 0.0);
  for (double& v : a) v /= again;
  return Popularity(std::move(a));
}

namespace {

void check_cache_size(std::size_t N, int C) {
  if (C < 1 || static_cast<std::size_t>(C) >= N) {
    throw ValidationError(Violation::cache_size, 0, static_cast<double>(C),
                          "cache size C=" + std::to_string(C) + " outside [1, " + std::to_string(N - 1) + "]");
  }
}

void check_box(const std::vector<double>& T) {
  for (std::size_t n = 0; n < T.size(); ++n) {
    const double v = T[n];
    if (!(v >= 0.0 && v <= 1.0)) {
      const double amount = v < 0.0 ? -v : v - 1.0;
      std::ostringstream os;
      os << "box violation on file " << n + 1 << ": T=" << v << " (off by " << amount << ")";
      throw ValidationError(Violation::box, n, amount, os.str());
    }
  }
}

}  // namespace

CachingDistribution validate(std::vector<double> T, int C) {
  if (T.size() < 2) throw ValidationError(Violation::length, 0, static_cast<double>(T.size()), "need at least 2 files");
  check_cache_size(T.size(), C);
  check_box(T);
  const double sum = std::accumulate(T.begin(), T.end(), 0.0);
  if (std::abs(sum - C) > kSumTolerance) {
    std::ostringstream os;
    os << "sum violation: sum(T)=" << sum << " but C=" << C;
    throw ValidationError(Violation::sum, 0, sum - C, os.str());
  }
  CachingDistribution d;
  d.T_ = std::move(T);
  d.C_ = C;
  return d;
}

CachingDistribution effective_marginal_distribution(std::vector<double> T, int C) {
  if (T.size() < 2) throw ValidationError(Violation::length, 0, static_cast<double>(T.size()), "need at least 2 files");
  check_cache_size(T.size(), C);
  check_box(T);
  const double sum = std::accumulate(T.begin(), T.end(), 0.0);
  if (sum > C + kSumTolerance) throw ValidationError(Violation::sum, 0, sum - C, "effective marginals exceed C");
  CachingDistribution d;
  d.T_ = std::move(T);
  d.C_ = C;
  d.effective_ = true;
  return d;
}

DofAllocation::DofAllocation(std::vector<int> K, int M) : K_(std::move(K)), M_(M) {
  if (M < 1) throw DomainError("DofAllocation: M must be >= 1");
  for (int k : K_) {
    if (k < 1 || k > M) {
      throw DomainError("DofAllocation: K_n=" + std::to_string(k) + " outside {1.." + std::to_string(M) + "}");
    }
  }
}

DofAllocation DofAllocation::uniform(std::size_t N, int K, int M) { return DofAllocation(std::vector<int>(N, K), M); }

BaselineKind parse_baseline(const std::string& name) {
  if (name == "most_popular" || name == "most-popular") return BaselineKind::most_popular;
  if (name == "iid_popularity" || name == "iid-popularity" || name == "iid") return BaselineKind::iid_popularity;
  if (name == "uniform") return BaselineKind::uniform;
  throw DomainError("unknown baseline '" + name + "'");
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::most_popular:
      return "most_popular";
    case BaselineKind::iid_popularity:
      return "iid_popularity";
    case BaselineKind::uniform:
      return "uniform";
  }
  return "?";
}

CachingDistribution baseline(BaselineKind kind, const Popularity& pop, int C) {
  const std::size_t N = pop.size();
  check_cache_size(N, C);
  std::vector<double> T(N, 0.0);
  switch (kind) {
    case BaselineKind::most_popular:
      std::fill(T.begin(), T.begin() + C, 1.0);
      return validate(std::move(T), C);
    case BaselineKind::uniform:
      std::fill(T.begin(), T.end(), static_cast<double>(C) / static_cast<double>(N));
      return validate(std::move(T), C);
    case BaselineKind::iid_popularity:
      for (std::size_t n = 0; n < N; ++n) T[n] = 1.0 - std::pow(1.0 - pop[n], C);
      return effective_marginal_distribution(std::move(T), C);
  }
  throw DomainError("baseline: unknown kind");
}

std::vector<int> sample_iid_cache(const Popularity& pop, int C, std::mt19937_64& rng) {
  std::discrete_distribution<int> pick(pop.values().begin(), pop.values().end());
  std::vector<int> files;
  files.reserve(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) files.push_back(pick(rng));
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  return files;
}

std::vector<int> sample_cache(const CachingDistribution& T, std::mt19937_64& rng) {
  // Madow systematic sampling: points U, U+1, ..., U+C-1 on the cumulative T line.
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double start = unif(rng);
  const int C = T.cache_size();
  std::vector<int> files;
  files.reserve(static_cast<std::size_t>(C));
  double lo = 0.0;
  int next = 0;
  for (std::size_t n = 0; n < T.size() && next < C; ++n) {
    const double hi = lo + T[n];
    if (start + next >= lo && start + next < hi) {
      files.push_back(static_cast<int>(n));
      ++next;
    }
    lo = hi;
  }
  // Σ T_n may fall short of C by rounding; the remaining point lands past the end.
  for (std::size_t n = T.size(); next < C && n-- > 0;) {
    if (std::find(files.begin(), files.end(), static_cast<int>(n)) == files.end() && T[n] > 0.0) {
      files.push_back(static_cast<int>(n));
      ++next;
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace cachesimo
