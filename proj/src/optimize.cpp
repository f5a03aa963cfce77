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
#include "cachesimo/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace cachesimo {

namespace {

constexpr int kInnerSteps = 200;
constexpr int kOuterSteps = 400;

double root_on_unit(std::size_t n, const Marginal& g, double v) {
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < kInnerSteps; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (g(n, mid) > v) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> response(std::size_t N, const Marginal& g, double v) {
  std::vector<double> T(N);
  for (std::size_t n = 0; n < N; ++n) {
    if (g(n, 0.0) <= v) {
      T[n] = 0.0;
    } else if (g(n, 1.0) >= v) {
      T[n] = 1.0;
    } else {
      T[n] = root_on_unit(n, g, v);
    }
  }
  return T;
}

double total(const std::vector<double>& T) { return std::accumulate(T.begin(), T.end(), 0.0); }

}  // namespace

KktSolution kkt_allocate(std::size_t N, int C, const Marginal& g, double v_lo, double v_hi) {
  if (C < 1 || static_cast<std::size_t>(C) >= N) throw DomainError("kkt_allocate: C outside [1, N-1]");
  if (!(v_lo < v_hi)) throw BracketError("kkt_allocate: empty multiplier bracket", v_lo, v_hi);
  std::vector<double> T_lo = response(N, g, v_lo);
  std::vector<double> T_hi = response(N, g, v_hi);
  double s_lo = total(T_lo);
  double s_hi = total(T_hi);
  if (s_lo < C || s_hi > C) {
    std::ostringstream os;
    os << "kkt_allocate: bracket [" << v_lo << ", " << v_hi << "] gives totals " << s_lo << " and " << s_hi
       << ", which do not straddle C=" << C;
    throw BracketError(os.str(), v_lo, v_hi);
  }
  for (int it = 0; it < kOuterSteps; ++it) {
    if (std::abs(s_lo - C) <= 1e-13 || std::abs(s_hi - C) <= 1e-13) break;
    const double mid = 0.5 * (v_lo + v_hi);
    if (!(mid > v_lo && mid < v_hi)) break;
    auto T_mid = response(N, g, mid);
    const double s_mid = total(T_mid);
    if (s_mid >= C) {
      v_lo = mid;
      T_lo = std::move(T_mid);
      s_lo = s_mid;
    } else {
      v_hi = mid;
      T_hi = std::move(T_mid);
      s_hi = s_mid;
    }
  }
  KktSolution sol;
  if (std::abs(s_lo - C) <= std::abs(s_hi - C) && std::abs(s_lo - C) <= 1e-13) {
    sol.T = std::move(T_lo);
    sol.multiplier = v_lo;
  } else if (std::abs(s_hi - C) <= 1e-13) {
    sol.T = std::move(T_hi);
    sol.multiplier = v_hi;
  } else {
    // the total jumps at the multiplier: mix the one-sided solutions
    const double theta = (s_lo - C) / (s_lo - s_hi);
    sol.T.resize(N);
    for (std::size_t n = 0; n < N; ++n) sol.T[n] = (1.0 - theta) * T_lo[n] + theta * T_hi[n];
    sol.multiplier = 0.5 * (v_lo + v_hi);
  }
  for (double& t : sol.T) t = std::clamp(t, 0.0, 1.0);
  return sol;
}

DcCoefficients::DcCoefficients(const NetworkParams& params) : M(params.M) {
  params.check();
  const double S = numerics::s_const(params.M);
  for (int k = 0; k <= M; ++k) {
    const auto [a, b] = c_coeffs(k, S, params);
    c1.push_back(a);
    c2.push_back(b);
  }
}

DcSplit DcCoefficients::operator()(double x) const {
  DcSplit s{0.0, 0.0};
  for (int k = 1; k <= M; ++k) {
    const double d = c1[static_cast<std::size_t>(k)] * x + c2[static_cast<std::size_t>(k)];
    const double term = numerics::binomial(M, k) * c2[static_cast<std::size_t>(k)] / (d * d);
    (k % 2 == 1 ? s.f_o : s.f_e) += term;
  }
  return s;
}

DcSplit dc_split_derivatives(double x, const NetworkParams& params) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("dc_split_derivatives: x must lie in [0,1]");
  return DcCoefficients(params)(x);
}

namespace {

CccpStep cccp_step(const std::vector<double>& T_prev, const Popularity& pop, const DcCoefficients& dc, int C) {
  const std::size_t N = T_prev.size();
  std::vector<double> fe_prev(N);
  for (std::size_t n = 0; n < N; ++n) fe_prev[n] = dc(T_prev[n]).f_e;
  const double fo0 = dc(0.0).f_o;
  const double fo1 = dc(1.0).f_o;
  const double fe0 = dc(0.0).f_e;
  const double fe1 = dc(1.0).f_e;
  double v_lo = std::numeric_limits<double>::infinity();
  double v_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < N; ++n) {
    v_lo = std::min(v_lo, pop[n] * (fo1 - fe0));
    v_hi = std::max(v_hi, pop[n] * (fo0 - fe1));
  }
  v_lo -= 1.0;
  v_hi += 1.0;
  const Marginal g = [&](std::size_t n, double x) { return pop[n] * (dc(x).f_o - fe_prev[n]); };
  auto sol = kkt_allocate(N, C, g, v_lo, v_hi);
  return CccpStep{validate(std::move(sol.T), C), sol.multiplier};
}

}  // namespace

CccpStep cccp_subproblem(const CachingDistribution& T_prev, const Popularity& pop, const NetworkParams& params) {
  if (T_prev.size() != pop.size()) throw DomainError("cccp_subproblem: length mismatch");
  const DcCoefficients dc(params);
  std::vector<double> prev(T_prev.values().begin(), T_prev.values().end());
  return cccp_step(prev, pop, dc, T_prev.cache_size());
}

CccpTrace cccp(const Popularity& pop, const NetworkParams& params, int C, double epsilon, int max_iterations) {
  params.check();
  if (!(epsilon > 0.0)) throw DomainError("cccp: epsilon must be > 0");
  if (max_iterations < 1) throw DomainError("cccp: max_iterations must be >= 1");
  const std::size_t N = pop.size();
  const DcCoefficients dc(params);
  CccpTrace trace;
  trace.iterates.push_back(validate(std::vector<double>(N, static_cast<double>(C) / static_cast<double>(N)), C));
  trace.objectives.push_back(mrc_upper_objective(trace.iterates.back().values(), pop, params));
  trace.multipliers.push_back(std::numeric_limits<double>::quiet_NaN());
  while (trace.iterations < max_iterations) {
    const auto& prev = trace.iterates.back().values();
    auto step = cccp_step(std::vector<double>(prev.begin(), prev.end()), pop, dc, C);
    const double obj = mrc_upper_objective(step.T.values(), pop, params);
    const double gain = obj - trace.objectives.back();
    trace.iterates.push_back(std::move(step.T));
    trace.objectives.push_back(obj);
    trace.multipliers.push_back(step.multiplier);
    ++trace.iterations;
    if (gain < epsilon) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

void CccpTrace::write_csv(std::ostream& out) const {
  out << "iteration,objective,multiplier";
  const std::size_t N = iterates.empty() ? 0 : iterates.front().size();
  for (std::size_t n = 0; n < N; ++n) out << ",T" << n + 1;
  out << "\n" << std::setprecision(17);
  for (std::size_t t = 0; t < iterates.size(); ++t) {
    out << t << "," << objectives[t] << ",";
    if (!std::isnan(multipliers[t])) out << multipliers[t];
    for (double v : iterates[t].values()) out << "," << v;
    out << "\n";
  }
}

CachingDistribution optimize_mrc_m1(const Popularity& pop, const NetworkParams& params, int C) {
  params.check();
  const auto [c1, c2] = c_coeffs(1, 1.0, params);
  const Marginal g = [&, c1 = c1, c2 = c2](std::size_t n, double x) {
    const double d = c1 * x + c2;
    return pop[n] * c2 / (d * d);
  };
  double v_lo = std::numeric_limits<double>::infinity();
  double v_hi = 0.0;
  for (std::size_t n = 0; n < pop.size(); ++n) {
    v_lo = std::min(v_lo, g(n, 1.0));
    v_hi = std::max(v_hi, g(n, 0.0));
  }
  auto sol = kkt_allocate(pop.size(), C, g, v_lo - 1.0, v_hi + 1.0);
  return validate(std::move(sol.T), C);
}

AsymptoticOptimum optimize_mrc_asymptotic(const Popularity& pop, int C) {
  const std::size_t N = pop.size();
  if (C < 1 || static_cast<std::size_t>(C) >= N) throw DomainError("optimize_mrc_asymptotic: C outside [1, N-1]");
  auto share = [&](double nu) {
    std::vector<double> T(N);
    for (std::size_t n = 0; n < N; ++n) T[n] = std::min(std::sqrt(pop[n] / nu), 1.0);
    return T;
  };
  double root_sum = 0.0;
  double a_min = 1.0;
  for (std::size_t n = 0; n < N; ++n) {
    root_sum += std::sqrt(pop[n]);
    if (pop[n] > 0.0) a_min = std::min(a_min, pop[n]);
  }
  // at ν = a_min every positive file is clipped to 1; at ν_hi the unclipped sum equals C
  double lo = std::log(a_min) - 1.0;
  double hi = 2.0 * std::log(root_sum / C) + 1.0;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (total(share(std::exp(mid))) >= C) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double s_lo = total(share(std::exp(lo)));
  const double s_hi = total(share(std::exp(hi)));
  const double nu = std::abs(s_lo - C) <= std::abs(s_hi - C) ? std::exp(lo) : std::exp(hi);
  auto T = share(nu);
  const double residual = std::abs(total(T) - C);
  return AsymptoticOptimum{validate(std::move(T), C), nu, residual};
}

CachingDistribution pzf_continuous(const DofAllocation& K, const Popularity& pop, const RTable& table, int C) {
  if (K.size() != pop.size()) throw DomainError("pzf_continuous: length mismatch");
  if (K.antennas() != table.M()) throw DomainError("pzf_continuous: table built for a different M");
  const Marginal g = [&](std::size_t n, double x) { return pop[n] * pzf_upper_derivative(K[n], x, table); };
  double v_lo = std::numeric_limits<double>::infinity();
  double v_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < pop.size(); ++n) {
    v_lo = std::min(v_lo, g(n, 1.0));
    v_hi = std::max(v_hi, g(n, 0.0));
  }
  auto sol = kkt_allocate(pop.size(), C, g, v_lo - 1.0, v_hi + 1.0);
  return validate(std::move(sol.T), C);
}

DofAllocation pzf_discrete(const CachingDistribution& T, const Popularity& pop, const RTable& table, long* evaluations) {
  if (T.size() != pop.size()) throw DomainError("pzf_discrete: length mismatch");
  std::vector<int> K(T.size(), 1);
  long count = 0;
  for (std::size_t n = 0; n < T.size(); ++n) {
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 1; k <= table.M(); ++k) {
      const double v = pzf_upper_file(k, T[n], table);
      ++count;
      if (v >= best) {
        best = v;
        K[n] = k;
      }
    }
  }
  if (evaluations != nullptr) *evaluations = count;
  return DofAllocation(std::move(K), table.M());
}

namespace {

double pzf_objective(const DofAllocation& K, const CachingDistribution& T, const Popularity& pop, const RTable& table) {
  return pzf_upper_objective(K.values(), T.values(), pop, table);
}

}  // namespace

PzfSolution pzf_alternating(const Popularity& pop, const RTable& table, int C) {
  const int M = table.M();
  const std::size_t N = pop.size();
  PzfSolution sol;
  DofAllocation K = DofAllocation::uniform(N, std::max(M - 1, 1), M);
  for (int it = 0; it < kAlternatingMaxIterations; ++it) {
    CachingDistribution T = pzf_continuous(K, pop, table, C);
    ++sol.continuous_solves;
    const double obj = pzf_objective(K, T, pop, table);
    sol.trace.push_back(PzfIterate{K, T, obj});
    sol.iterations = it + 1;
    DofAllocation next = M == 1 ? K : pzf_discrete(T, pop, table);
    if (next == K) {
      sol.K = K;
      sol.T = std::move(T);
      sol.objective = obj;
      return sol;
    }
    K = std::move(next);
  }
  throw ConvergenceError("pzf_alternating: iteration cap reached", sol.trace.back().objective, 0.0);
}

PzfSolution pzf_alternating(const Popularity& pop, const NetworkParams& params, int C, int L) {
  return pzf_alternating(pop, r_table(params, L), C);
}

PzfSolution exhaustive_pzf(const Popularity& pop, const RTable& table, int C) {
  const int M = table.M();
  const std::size_t N = pop.size();
  if (N < 2) throw DomainError("exhaustive_pzf: need at least 2 files");
  if (std::pow(static_cast<double>(M), static_cast<double>(N)) > kExhaustiveLimit) {
    throw DomainError("exhaustive_pzf: M^N exceeds the search limit");
  }
  std::vector<int> digits(N, 1);
  PzfSolution best;
  best.objective = -std::numeric_limits<double>::infinity();
  for (;;) {
    DofAllocation K(digits, M);
    CachingDistribution T = pzf_continuous(K, pop, table, C);
    ++best.continuous_solves;
    const double obj = pzf_objective(K, T, pop, table);
    if (obj > best.objective) {
      best.objective = obj;
      best.K = K;
      best.T = T;
    }
    std::size_t pos = 0;
    while (pos < N && digits[pos] == M) digits[pos++] = 1;
    if (pos == N) break;
    ++digits[pos];
  }
  best.iterations = best.continuous_solves;
  best.trace.push_back(PzfIterate{best.K, best.T, best.objective});
  return best;
}

PzfSolution exhaustive_pzf(const Popularity& pop, const NetworkParams& params, int C, int L) {
  return exhaustive_pzf(pop, r_table(params, L), C);
}

void PzfSolution::write_csv(std::ostream& out) const {
  const std::size_t N = T.size();
  out << "iteration,objective";
  for (std::size_t n = 0; n < N; ++n) out << ",K" << n + 1;
  for (std::size_t n = 0; n < N; ++n) out << ",T" << n + 1;
  out << "\n" << std::setprecision(17);
  for (std::size_t t = 0; t < trace.size(); ++t) {
    out << t + 1 << "," << trace[t].objective;
    for (int k : trace[t].K.values()) out << "," << k;
    for (double v : trace[t].T.values()) out << "," << v;
    out << "\n";
  }
}

}  // namespace cachesimo
