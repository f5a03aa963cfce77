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
#include "cachesimo/analysis_mrc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cachesimo {

std::string to_string(EstimateKind kind) {
  switch (kind) {
    case EstimateKind::exact:
      return "exact";
    case EstimateKind::upper_bound:
      return "upper_bound";
    case EstimateKind::lower_bound:
      return "lower_bound";
    case EstimateKind::asymptotic:
      return "asymptotic";
    case EstimateKind::monte_carlo:
      return "monte_carlo";
  }
  return "?";
}

namespace laplace {

namespace {

double onset_z(double tau, double onset) {
  if (std::isinf(onset)) return 0.0;
  return 1.0 / (1.0 + tau * onset);
}

}  // namespace

double rate(double tau, double delta, double onset) {
  if (!(onset >= 0.0)) throw DomainError("laplace::rate: onset must be >= 0");
  return delta * std::pow(tau, delta) * numerics::comp_inc_beta_closed(delta, 1.0 - delta, onset_z(tau, onset));
}

double weight(int j, double tau, double delta, double onset) {
  if (j < 1) throw DomainError("laplace::weight: j must be >= 1");
  if (!(onset >= 0.0)) throw DomainError("laplace::weight: onset must be >= 0");
  return delta * std::pow(tau, delta) * numerics::comp_inc_beta_closed(delta + 1.0, j - delta, onset_z(tau, onset));
}

std::vector<double> derivative_poly(int k, double T, const std::vector<double>& weights) {
  if (k < 0) throw DomainError("derivative_poly: k must be >= 0");
  if (static_cast<int>(weights.size()) < k) throw DomainError("derivative_poly: need k weights");
  std::vector<double> coeff(static_cast<std::size_t>(k) + 1, 0.0);
  const double kfact = numerics::factorial(k);
  for (const auto& b : numerics::partitions(k).elements) {
    double term = kfact;
    int power = 0;
    for (int j = 1; j <= k; ++j) {
      const int bj = b[static_cast<std::size_t>(j - 1)];
      if (bj == 0) continue;
      term *= std::pow(T * weights[static_cast<std::size_t>(j - 1)], bj) / numerics::factorial(bj);
      power += bj;
    }
    coeff[static_cast<std::size_t>(power)] += term;
  }
  return coeff;
}

std::vector<double> poly_mul(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.empty() || q.empty()) return {};
  std::vector<double> r(p.size() + q.size() - 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
  }
  return r;
}

void poly_axpy(std::vector<double>& p, double scale, const std::vector<double>& q) {
  if (p.size() < q.size()) p.resize(q.size(), 0.0);
  for (std::size_t i = 0; i < q.size(); ++i) p[i] += scale * q[i];
}

double poly_eval(const std::vector<double>& p, double u) {
  double acc = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * u + *it;
  return acc;
}

}  // namespace laplace

double laplace_terms(double T, double x, double y, int k, const NetworkParams& params) {
  params.check();
  if (!(T >= 0.0 && T <= 1.0)) throw DomainError("laplace_terms: T must lie in [0,1]");
  if (!(x >= 0.0) || !(y >= 0.0)) throw DomainError("laplace_terms: distances must be >= 0");
  if (k < 0) throw DomainError("laplace_terms: k must be >= 0");
  if (x == 0.0) return k == 0 ? 1.0 : 0.0;
  const double delta = params.delta();
  const double onset = y == 0.0 ? laplace::kFromOrigin : std::pow(x / y, params.alpha);
  const double u = std::numbers::pi * params.lambda_h * x * x;
  const double decay = std::exp(-T * laplace::rate(params.tau, delta, onset) * u);
  if (k == 0) return decay;
  std::vector<double> w(static_cast<std::size_t>(k));
  for (int j = 1; j <= k; ++j) w[static_cast<std::size_t>(j - 1)] = laplace::weight(j, params.tau, delta, onset);
  return decay * laplace::poly_eval(laplace::derivative_poly(k, T, w), u);
}

namespace {

struct MrcKernel {
  std::vector<double> poly;  ///< conditional success = e^{-rate·u} Σ poly_p u^p
  double rate;               ///< includes the serving-distance term T
};

MrcKernel mrc_kernel(double T, const NetworkParams& params) {
  const int M = params.M;
  const double delta = params.delta();
  const double beta_near = laplace::rate(params.tau, delta, 1.0);
  const double beta_far = laplace::rate(params.tau, delta, laplace::kFromOrigin);
  std::vector<double> w_near(static_cast<std::size_t>(M)), w_far(static_cast<std::size_t>(M));
  for (int j = 1; j < M; ++j) {
    w_near[static_cast<std::size_t>(j - 1)] = laplace::weight(j, params.tau, delta, 1.0);
    w_far[static_cast<std::size_t>(j - 1)] = laplace::weight(j, params.tau, delta, laplace::kFromOrigin);
  }
  std::vector<std::vector<double>> near(static_cast<std::size_t>(M)), far(static_cast<std::size_t>(M));
  for (int k = 0; k < M; ++k) {
    near[static_cast<std::size_t>(k)] = laplace::derivative_poly(k, T, w_near);
    far[static_cast<std::size_t>(k)] = laplace::derivative_poly(k, 1.0 - T, w_far);
  }
  MrcKernel kern;
  kern.poly.assign(static_cast<std::size_t>(M), 0.0);
  for (int m = 0; m < M; ++m) {
    const double inv = 1.0 / numerics::factorial(m);
    for (int k = 0; k <= m; ++k) {
      laplace::poly_axpy(kern.poly, inv * numerics::binomial(m, k),
                         laplace::poly_mul(near[static_cast<std::size_t>(k)], far[static_cast<std::size_t>(m - k)]));
    }
  }
  kern.rate = T + T * beta_near + (1.0 - T) * beta_far;
  return kern;
}

double mrc_closed_form(double T, const NetworkParams& params) {
  if (T == 0.0) return 0.0;
  const MrcKernel kern = mrc_kernel(T, params);
  // ∫ T e^{-c u} u^p du = T p!/c^{p+1}
  double acc = 0.0;
  for (std::size_t p = 0; p < kern.poly.size(); ++p) {
    acc += kern.poly[p] * numerics::factorial(static_cast<int>(p)) / std::pow(kern.rate, static_cast<double>(p) + 1.0);
  }
  return T * acc;
}

numerics::QuadratureResult mrc_quadrature(double T, const NetworkParams& params) {
  if (T == 0.0) return {};
  const int M = params.M;
  const double delta = params.delta();
  // stretch u so the slowest exponential decays on the unit scale
  const double c = T + T * laplace::rate(params.tau, delta, 1.0) +
                   (1.0 - T) * laplace::rate(params.tau, delta, laplace::kFromOrigin);
  const double to_x = 1.0 / (std::numbers::pi * params.lambda_h);
  auto integrand = [&](double w) {
    const double u = w / c;
    const double x = std::sqrt(u * to_x);
    double sum = 0.0;
    for (int m = 0; m < M; ++m) {
      double inner = 0.0;
      for (int k = 0; k <= m; ++k) {
        inner += numerics::binomial(m, k) * laplace_terms(T, x, x, k, params) *
                 laplace_terms(1.0 - T, x, 0.0, m - k, params);
      }
      sum += inner / numerics::factorial(m);
    }
    return T * std::exp(-T * u) * sum / c;
  };
  numerics::QuadratureSpec spec;
  spec.rel_tol = 1e-10;
  spec.abs_tol = 1e-13;
  return numerics::integrate_semi_infinite(integrand, spec);
}

double per_file_mrc_check(double T) {
  if (!(T >= 0.0 && T <= 1.0)) throw DomainError("storage probability must lie in [0,1]");
  return T;
}

}  // namespace

double stp_mrc_file(double T, const NetworkParams& params, MrcMethod method, double* error) {
  params.check();
  per_file_mrc_check(T);
  double err = 0.0;
  double value = 0.0;
  switch (method) {
    case MrcMethod::closed_form:
      value = mrc_closed_form(T, params);
      err = 1e-14 * std::max(1.0, std::abs(value)) * std::pow(10.0, params.M / 4.0);
      break;
    case MrcMethod::quadrature: {
      const auto r = mrc_quadrature(T, params);
      value = r.value;
      err = r.error;
      break;
    }
    case MrcMethod::dual: {
      value = mrc_closed_form(T, params);
      const auto r = mrc_quadrature(T, params);
      const double gap = std::abs(value - r.value);
      if (gap > 1e-7 * std::max(std::abs(value), 1e-3) + 10.0 * r.error) {
        throw ConvergenceError("stp_mrc_exact: closed form and quadrature disagree", value, gap);
      }
      err = std::max(gap, r.error);
      break;
    }
  }
  if (error != nullptr) *error = err;
  return std::clamp(value, 0.0, 1.0);
}

StpEstimate stp_mrc_exact(const CachingDistribution& T, const Popularity& pop, const NetworkParams& params,
                          MrcMethod method) {
  params.check();
  if (T.size() != pop.size()) throw DomainError("stp_mrc_exact: T and popularity lengths differ");
  StpEstimate est;
  est.kind = EstimateKind::exact;
  est.per_file.resize(T.size());
  for (std::size_t n = 0; n < T.size(); ++n) {
    double err = 0.0;
    est.per_file[n] = stp_mrc_file(T[n], params, method, &err);
    est.value += pop[n] * est.per_file[n];
    est.error += pop[n] * err;
  }
  est.value = std::clamp(est.value, 0.0, 1.0);
  return est;
}

std::pair<double, double> c_coeffs(int k, double x, const NetworkParams& params) {
  params.check();
  if (k < 0) throw DomainError("c_coeffs: k must be >= 0");
  if (!(x > 0.0)) throw DomainError("c_coeffs: x must be > 0");
  if (k == 0) return {1.0, 0.0};
  const double delta = params.delta();
  const double s = k * x * params.tau;
  const double scale = delta * std::pow(s, delta);
  const double full = numerics::beta(delta, 1.0 - delta);
  const double c2 = scale * full;
  const double c1 = scale * (numerics::comp_inc_beta(delta, 1.0 - delta, 1.0 / (1.0 + s)) - full) + 1.0;
  return {c1, c2};
}

StpEstimate stp_mrc_m1(const CachingDistribution& T, const Popularity& pop, const NetworkParams& params) {
  params.check();
  if (params.M != 1) throw DomainError("stp_mrc_m1: requires M = 1");
  if (T.size() != pop.size()) throw DomainError("stp_mrc_m1: T and popularity lengths differ");
  const auto [c1, c2] = c_coeffs(1, 1.0, params);
  StpEstimate est;
  est.kind = EstimateKind::exact;
  est.per_file.resize(T.size());
  for (std::size_t n = 0; n < T.size(); ++n) {
    est.per_file[n] = T[n] == 0.0 ? 0.0 : T[n] / (c1 * T[n] + c2);
    est.value += pop[n] * est.per_file[n];
  }
  return est;
}

namespace {

double bound_file(double T, const std::vector<std::pair<double, double>>& c, int M) {
  if (T == 0.0) return 0.0;
  // the k = 0 term equals 1 and cancels the leading 1
  double acc = 0.0;
  for (int k = 1; k <= M; ++k) {
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;
    const auto [c1, c2] = c[static_cast<std::size_t>(k)];
    acc += sign * numerics::binomial(M, k) * T / (c1 * T + c2);
  }
  return acc;
}

std::vector<std::pair<double, double>> bound_coeffs(const NetworkParams& params, bool upper) {
  const double x = upper ? numerics::s_const(params.M) : 1.0;
  std::vector<std::pair<double, double>> c(static_cast<std::size_t>(params.M) + 1);
  for (int k = 0; k <= params.M; ++k) c[static_cast<std::size_t>(k)] = c_coeffs(k, x, params);
  return c;
}

}  // namespace

double mrc_bound_file(double T, const NetworkParams& params, bool upper) {
  params.check();
  per_file_mrc_check(T);
  return bound_file(T, bound_coeffs(params, upper), params.M);
}

MrcBounds stp_mrc_bounds(const CachingDistribution& T, const Popularity& pop, const NetworkParams& params) {
  params.check();
  if (T.size() != pop.size()) throw DomainError("stp_mrc_bounds: T and popularity lengths differ");
  const auto cu = bound_coeffs(params, true);
  const auto cl = bound_coeffs(params, false);
  MrcBounds b;
  b.upper.kind = EstimateKind::upper_bound;
  b.lower.kind = EstimateKind::lower_bound;
  b.upper.per_file.resize(T.size());
  b.lower.per_file.resize(T.size());
  for (std::size_t n = 0; n < T.size(); ++n) {
    b.upper.per_file[n] = bound_file(T[n], cu, params.M);
    b.lower.per_file[n] = bound_file(T[n], cl, params.M);
    b.upper.value += pop[n] * b.upper.per_file[n];
    b.lower.value += pop[n] * b.lower.per_file[n];
  }
  // alternating binomial sums lose about log10(C(M, M/2)) digits
  const double err = 1e-15 * numerics::binomial(params.M, params.M / 2) * 4.0;
  b.upper.error = err;
  b.lower.error = err;
  return b;
}

double mrc_upper_objective(std::span<const double> T, const Popularity& pop, const NetworkParams& params) {
  const auto cu = bound_coeffs(params, true);
  double acc = 0.0;
  for (std::size_t n = 0; n < T.size(); ++n) acc += pop[n] * bound_file(T[n], cu, params.M);
  return acc;
}

double outage_series(int M, double delta, int* terms) {
  if (M < 1) throw DomainError("outage_series: M must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("outage_series: delta must lie in (0,1)");
  // B(δ+1, m-δ) decays like m^{-1-δ}, far too slowly for naive truncation. The remainder
  // telescopes through B(a,b) = B(a+1,b) + B(a,b+1): Σ_{m>=m0} B(δ+1, m-δ) = B(δ, m0-δ).
  constexpr int kExplicit = 64;
  double partial = 0.0;
  for (int m = M; m < M + kExplicit; ++m) partial += numerics::beta(delta + 1.0, m - delta);
  const double tail = numerics::beta(delta, M + kExplicit - delta);
  if (terms != nullptr) *terms = kExplicit;
  return partial + tail;
}

AsymptoticOutage outage_asymptotic(const CachingDistribution& T, const Popularity& pop, const NetworkParams& params) {
  params.check();
  if (T.size() != pop.size()) throw DomainError("outage_asymptotic: T and popularity lengths differ");
  const double delta = params.delta();
  AsymptoticOutage out{};
  out.order_gain = delta;
  const double series = outage_series(params.M, delta, &out.series_terms);
  double spread = 0.0;
  for (std::size_t n = 0; n < T.size(); ++n) {
    if (pop[n] == 0.0) continue;
    if (T[n] == 0.0) {
      spread = std::numeric_limits<double>::infinity();
      break;
    }
    spread += pop[n] * (1.0 / T[n] - 1.0);
  }
  out.coefficient = delta * spread * series;
  out.value_at_tau = std::pow(params.tau, delta) * out.coefficient;
  return out;
}

}  // namespace cachesimo
