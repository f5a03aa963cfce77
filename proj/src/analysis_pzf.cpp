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
#include "cachesimo/analysis_pzf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

namespace cachesimo {

namespace {

constexpr double kPi = std::numbers::pi;

void require_density(double lambda) {
  if (!(lambda > 0.0)) throw DomainError("density must be > 0");
}

}  // namespace

double order_distance_pdf(int j, double x, double lambda) {
  require_density(lambda);
  if (j < 1) throw DomainError("order_distance_pdf: j must be >= 1");
  if (!(x >= 0.0)) throw DomainError("order_distance_pdf: x must be >= 0");
  if (x == 0.0) return 0.0;
  const double mu = kPi * lambda * x * x;
  return std::exp(std::log(2.0) + j * std::log(kPi * lambda) + (2.0 * j - 1.0) * std::log(x) -
                  boost::math::lgamma(static_cast<double>(j)) - mu);
}

double joint_pdf_f(int i, int j, double x, double y, double lambda) {
  require_density(lambda);
  if (i < 1 || j <= i) throw DomainError("joint_pdf_f: need j > i >= 1");
  if (!(x >= 0.0) || !(y >= 0.0)) throw DomainError("joint_pdf_f: distances must be >= 0");
  if (x >= y || x == 0.0) return 0.0;
  const double gap = y * y - x * x;
  const double log_val = std::log(4.0) + j * std::log(kPi * lambda) + (2.0 * i - 1.0) * std::log(x) + std::log(y) +
                         (j - i - 1) * std::log(gap) - boost::math::lgamma(static_cast<double>(i)) -
                         boost::math::lgamma(static_cast<double>(j - i)) - kPi * lambda * y * y;
  return std::exp(log_val);
}

double joint_pdf_g(double T, double x, double y, int j, double lambda) {
  require_density(lambda);
  if (j < 1) throw DomainError("joint_pdf_g: j must be >= 1");
  if (!(T >= 0.0 && T < 1.0)) throw DomainError("joint_pdf_g: T must lie in [0,1); T = 1 leaves no non-storing helper");
  if (!(x >= 0.0) || !(y >= 0.0)) throw DomainError("joint_pdf_g: distances must be >= 0");
  if (y >= x || y == 0.0 || T == 0.0) return 0.0;
  const double log_val = std::log(4.0) + (j + 1) * std::log(kPi * lambda) + std::log(T) + std::log(x) +
                         (2.0 * j - 1.0) * std::log(y) - boost::math::lgamma(static_cast<double>(j)) -
                         kPi * lambda * (T * x * x + (1.0 - T) * y * y);
  return std::exp(log_val);
}

namespace {

struct Weights {
  double rate;
  std::vector<double> w;
};

Weights weights_at(double tau, double delta, double onset, int count) {
  Weights r;
  r.rate = laplace::rate(tau, delta, onset);
  r.w.resize(static_cast<std::size_t>(std::max(count, 0)));
  for (int j = 1; j <= count; ++j) r.w[static_cast<std::size_t>(j - 1)] = laplace::weight(j, tau, delta, onset);
  return r;
}

/// Onset (x/y)^α written through the ratio ρ = (y/x)² of normalized distances.
double onset_from_ratio(double rho, double alpha, bool far_over_near) {
  if (rho <= 0.0) return far_over_near ? laplace::kFromOrigin : 0.0;
  return far_over_near ? std::pow(rho, -0.5 * alpha) : std::pow(rho, 0.5 * alpha);
}

numerics::QuadratureSpec reduced_spec() {
  numerics::QuadratureSpec s;
  s.rel_tol = 1e-10;
  s.abs_tol = 1e-13;
  return s;
}

double pzf_reduced(int K, double T, const NetworkParams& params, double* error) {
  const int M = params.M;
  const int D = M - K;
  const double delta = params.delta();
  const double tau = params.tau;
  double err = 0.0;
  double total = 0.0;

  if (T < 1.0) {
    // serving helper beyond the D nearest non-storing helpers; ρ = (d_D / d_serving)²
    const Weights near = weights_at(tau, delta, 1.0, K - 1);
    std::vector<std::vector<double>> near_poly(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) near_poly[static_cast<std::size_t>(k)] = laplace::derivative_poly(k, T, near.w);
    const double lead = T * std::pow(1.0 - T, D) / numerics::factorial(D - 1);
    auto branch1 = [&](double rho) {
      const Weights far = weights_at(tau, delta, onset_from_ratio(rho, params.alpha, true), K - 1);
      std::vector<double> poly;
      for (int m = 0; m < K; ++m) {
        for (int k = 0; k <= m; ++k) {
          laplace::poly_axpy(poly, numerics::binomial(m, k) / numerics::factorial(m),
                             laplace::poly_mul(near_poly[static_cast<std::size_t>(k)],
                                               laplace::derivative_poly(m - k, 1.0 - T, far.w)));
        }
      }
      const double c = T + (1.0 - T) * rho + T * near.rate + (1.0 - T) * far.rate;
      double acc = 0.0;
      for (std::size_t p = 0; p < poly.size(); ++p) {
        const int order = D + static_cast<int>(p);
        acc += poly[p] * std::exp(boost::math::lgamma(order + 1.0) - (order + 1.0) * std::log(c));
      }
      return std::pow(rho, D - 1) * acc;
    };
    if (lead > 0.0) {
      const auto r = numerics::integrate(branch1, 0.0, 1.0, reduced_spec());
      total += lead * r.value;
      err += lead * r.error;
    }
  }

  // serving helper among the D+1 nearest; ρ = (d_serving / d_{D+1})²
  std::vector<double> mix(static_cast<std::size_t>(D) + 1, 0.0);
  bool any = false;
  for (int m = 1; m <= D; ++m) {
    mix[static_cast<std::size_t>(m)] =
        T * std::pow(1.0 - T, m - 1) / (numerics::factorial(m - 1) * numerics::factorial(D - m));
    any = any || mix[static_cast<std::size_t>(m)] > 0.0;
  }
  if (any) {
    auto branch2 = [&](double rho) {
      const Weights w = weights_at(tau, delta, onset_from_ratio(rho, params.alpha, false), K - 1);
      std::vector<double> poly;
      for (int k = 0; k < K; ++k) {
        laplace::poly_axpy(poly, 1.0 / numerics::factorial(k), laplace::derivative_poly(k, 1.0, w.w));
      }
      const double c = 1.0 + rho * w.rate;
      double acc = 0.0;
      for (std::size_t p = 0; p < poly.size(); ++p) {
        const int order = D + static_cast<int>(p);
        acc += poly[p] * std::pow(rho, static_cast<double>(p)) *
               std::exp(boost::math::lgamma(order + 1.0) - (order + 1.0) * std::log(c));
      }
      double weight = 0.0;
      for (int m = 1; m <= D; ++m) {
        weight += mix[static_cast<std::size_t>(m)] * std::pow(rho, m - 1) * std::pow(1.0 - rho, D - m);
      }
      return weight * acc;
    };
    const auto r = numerics::integrate(branch2, 0.0, 1.0, reduced_spec());
    total += r.value;
    err += r.error;
  }
  if (error != nullptr) *error = err;
  return total;
}

/// ∫₀^∞ f(x) dx for an integrand living on the helper length scale.
numerics::QuadratureResult radial(const std::function<double(double)>& f, double lambda,
                                  const numerics::QuadratureSpec& spec) {
  const double scale = 1.0 / std::sqrt(kPi * lambda);
  auto r = numerics::integrate_semi_infinite([&](double t) { return scale * f(scale * t); }, spec);
  return r;
}

numerics::QuadratureSpec nested_spec(double rel) {
  numerics::QuadratureSpec s;
  s.rel_tol = rel;
  s.abs_tol = rel * 1e-2;
  s.max_subdivisions = 4000;
  return s;
}

double pzf_nested(int K, double T, const NetworkParams& params, double* error) {
  const int M = params.M;
  const int D = M - K;
  const double lambda = params.lambda_h;
  const auto outer = nested_spec(1e-8);
  const auto inner = nested_spec(1e-10);
  double total = 0.0;
  double err = 0.0;
  double inner_err = 0.0;

  if (T < 1.0 && T > 0.0) {
    auto slice = [&](double x) {
      auto integrand = [&](double y) {
        const double g = joint_pdf_g(T, x, y, D, lambda);
        if (g == 0.0) return 0.0;
        double s = 0.0;
        for (int m = 0; m < K; ++m) {
          double acc = 0.0;
          for (int k = 0; k <= m; ++k) {
            acc += numerics::binomial(m, k) * laplace_terms(T, x, x, k, params) *
                   laplace_terms(1.0 - T, x, y, m - k, params);
          }
          s += acc / numerics::factorial(m);
        }
        return g * s;
      };
      const auto r = numerics::integrate(integrand, 0.0, x, inner);
      inner_err = std::max(inner_err, r.error);
      return r.value;
    };
    const auto r = radial(slice, lambda, outer);
    const double lead = std::pow(1.0 - T, D);
    total += lead * r.value;
    err += lead * r.error;
  }

  for (int m = 1; m <= D; ++m) {
    const double coef = T * std::pow(1.0 - T, m - 1);
    if (coef == 0.0) continue;
    auto slice = [&](double y) {
      auto integrand = [&](double x) {
        const double f = joint_pdf_f(m, D + 1, x, y, lambda);
        if (f == 0.0) return 0.0;
        double s = 0.0;
        for (int k = 0; k < K; ++k) s += laplace_terms(1.0, x, y, k, params) / numerics::factorial(k);
        return f * s;
      };
      const auto r = numerics::integrate(integrand, 0.0, y, inner);
      inner_err = std::max(inner_err, r.error);
      return r.value;
    };
    const auto r = radial(slice, lambda, outer);
    total += coef * r.value;
    err += coef * r.error;
  }
  if (error != nullptr) *error = err + inner_err;
  return total;
}

}  // namespace

double stp_pzf_file(int K, double T, const NetworkParams& params, PzfMethod method, double* error) {
  params.check();
  if (K < 1 || K > params.M) throw DomainError("stp_pzf_file: K must lie in 1..M");
  if (!(T >= 0.0 && T <= 1.0)) throw DomainError("stp_pzf_file: T must lie in [0,1]");
  if (K == params.M) {
    return stp_mrc_file(T, params, method == PzfMethod::nested ? MrcMethod::quadrature : MrcMethod::closed_form,
                        error);
  }
  if (T == 0.0) {
    if (error != nullptr) *error = 0.0;
    return 0.0;
  }
  const double v = method == PzfMethod::reduced ? pzf_reduced(K, T, params, error) : pzf_nested(K, T, params, error);
  return std::clamp(v, 0.0, 1.0);
}

StpEstimate stp_pzf_exact(const DofAllocation& K, const CachingDistribution& T, const Popularity& pop,
                          const NetworkParams& params, PzfMethod method) {
  params.check();
  if (K.antennas() != params.M) throw DomainError("stp_pzf_exact: DoF allocation built for a different M");
  if (K.size() != T.size() || T.size() != pop.size()) throw DomainError("stp_pzf_exact: length mismatch");
  StpEstimate est;
  est.kind = EstimateKind::exact;
  est.per_file.resize(T.size());
  for (std::size_t n = 0; n < T.size(); ++n) {
    double err = 0.0;
    est.per_file[n] = stp_pzf_file(K[n], T[n], params, method, &err);
    est.value += pop[n] * est.per_file[n];
    est.error += pop[n] * err;
  }
  est.value = std::clamp(est.value, 0.0, 1.0);
  return est;
}

// ---------------------------------------------------------------------------
// R table

RTable::RTable(NetworkParams params, int L, std::vector<std::vector<double>> values)
    : params_(params), L_(L), values_(std::move(values)) {
  params_.check();
  if (L_ < 1 || L_ > kMaxBoundOrder) throw DomainError("RTable: L must lie in 1.." + std::to_string(kMaxBoundOrder));
  if (static_cast<int>(values_.size()) != params_.M) throw DomainError("RTable: need one row per K");
  for (int K = 1; K <= params_.M; ++K) {
    auto& row = values_[static_cast<std::size_t>(K - 1)];
    if (static_cast<int>(row.size()) != ranks(K)) throw DomainError("RTable: row length must be M-K+L");
    for (double& v : row) {
      if (!(v >= -1e-9 && v <= 1.0 + 1e-9)) throw DomainError("RTable: entry outside [0,1]");
      v = std::clamp(v, 0.0, 1.0);
    }
  }
}

double RTable::operator()(int K, int m) const {
  if (K < 1 || K > params_.M) throw DomainError("RTable: K out of range");
  if (m < 1 || m > ranks(K)) throw DomainError("RTable: rank m out of range");
  return values_[static_cast<std::size_t>(K - 1)][static_cast<std::size_t>(m - 1)];
}

bool RTable::matches(const NetworkParams& p) const {
  return p.lambda_h == params_.lambda_h && p.alpha == params_.alpha && p.tau == params_.tau && p.M == params_.M;
}

std::string RTable::to_json() const {
  nlohmann::json j;
  j["lambda_h"] = params_.lambda_h;
  j["alpha"] = params_.alpha;
  j["tau"] = params_.tau;
  j["M"] = params_.M;
  j["L"] = L_;
  j["values"] = values_;
  return j.dump(2);
}

RTable RTable::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    NetworkParams p;
    p.lambda_h = j.at("lambda_h").get<double>();
    p.alpha = j.at("alpha").get<double>();
    p.tau = j.at("tau").get<double>();
    p.M = j.at("M").get<int>();
    return RTable(p, j.at("L").get<int>(), j.at("values").get<std::vector<std::vector<double>>>());
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("RTable::from_json: ") + e.what());
  }
}

namespace {

double sign_binom(int K, int k) { return numerics::binomial(K, k) * ((k % 2 == 1) ? 1.0 : -1.0); }

/// ψ_k(ρ) = (1/(1-ρ)) ∫_ρ^1 dt / (1 + τ_k t^{-α/2})
double annulus_mean(double rho, double tau_k, double delta, double alpha) {
  const double gap = 1.0 - rho;
  if (gap < 0.05) {
    // short interval: direct Gauss-Legendre avoids the cancellation in the closed form
    using GL = boost::math::quadrature::gauss<double, 10>;
    const double v = GL::integrate([&](double t) { return 1.0 / (1.0 + tau_k * std::pow(t, -0.5 * alpha)); }, rho, 1.0);
    return v / gap;
  }
  const double outer = laplace::rate(tau_k, delta, onset_from_ratio(rho, alpha, true));
  const double inner = laplace::rate(tau_k, delta, 1.0);
  return 1.0 - (outer - inner) / gap;
}

double r_reduced(const NetworkParams& params, int K, int m) {
  const int D = params.M - K;
  const double delta = params.delta();
  const double alpha = params.alpha;
  const double S = numerics::s_const(K);
  std::vector<double> tau_k(static_cast<std::size_t>(K) + 1);
  for (int k = 1; k <= K; ++k) tau_k[static_cast<std::size_t>(k)] = k * S * params.tau;

  if (m == D + 1) {
    double acc = 0.0;
    for (int k = 1; k <= K; ++k) {
      acc += sign_binom(K, k) * std::pow(1.0 + laplace::rate(tau_k[static_cast<std::size_t>(k)], delta, 1.0), -(D + 1.0));
    }
    return acc;
  }
  if (m <= D) {
    const double shape = numerics::factorial(D) / (numerics::factorial(m - 1) * numerics::factorial(D - m));
    auto integrand = [&](double rho) {
      const double onset = onset_from_ratio(rho, alpha, false);
      double acc = 0.0;
      for (int k = 1; k <= K; ++k) {
        const double beta = laplace::rate(tau_k[static_cast<std::size_t>(k)], delta, onset);
        acc += sign_binom(K, k) * std::pow(1.0 + rho * beta, -(D + 1.0));
      }
      return shape * std::pow(rho, m - 1) * std::pow(1.0 - rho, D - m) * acc;
    };
    return numerics::integrate(integrand, 0.0, 1.0, reduced_spec()).value;
  }
  const int annulus = m - D - 2;
  const double shape = numerics::factorial(m - 1) / (numerics::factorial(D) * numerics::factorial(annulus));
  std::vector<double> head(static_cast<std::size_t>(K) + 1);
  for (int k = 1; k <= K; ++k) {
    head[static_cast<std::size_t>(k)] =
        sign_binom(K, k) * std::pow(1.0 + laplace::rate(tau_k[static_cast<std::size_t>(k)], delta, 1.0), -m);
  }
  auto integrand = [&](double rho) {
    if (rho == 0.0) return 0.0;
    double acc = 0.0;
    for (int k = 1; k <= K; ++k) {
      const double tk = tau_k[static_cast<std::size_t>(k)];
      const double psi = annulus == 0 ? 1.0 : std::pow(annulus_mean(rho, tk, delta, alpha), annulus);
      acc += head[static_cast<std::size_t>(k)] * psi / (1.0 + tk * std::pow(rho, -0.5 * alpha));
    }
    return shape * std::pow(rho, D) * std::pow(1.0 - rho, annulus) * acc;
  };
  return numerics::integrate(integrand, 0.0, 1.0, reduced_spec()).value;
}

double r_nested(const NetworkParams& params, int K, int m) {
  const int D = params.M - K;
  const double lambda = params.lambda_h;
  const double S = numerics::s_const(K);
  const double tau = params.tau;
  const double alpha = params.alpha;
  auto boosted = [&](int k, double x) { return std::pow(k * S, 1.0 / alpha) * x; };

  if (m <= D) {
    const auto outer = nested_spec(1e-8);
    const auto inner = nested_spec(1e-10);
    auto slice = [&](double y) {
      auto integrand = [&](double x) {
        const double f = joint_pdf_f(m, D + 1, x, y, lambda);
        if (f == 0.0) return 0.0;
        double acc = 0.0;
        for (int k = 1; k <= K; ++k) acc += sign_binom(K, k) * laplace_terms(1.0, boosted(k, x), y, 0, params);
        return f * acc;
      };
      return numerics::integrate(integrand, 0.0, y, inner).value;
    };
    return radial(slice, lambda, outer).value;
  }
  if (m == D + 1) {
    auto integrand = [&](double x) {
      double acc = 0.0;
      for (int k = 1; k <= K; ++k) acc += sign_binom(K, k) * laplace_terms(1.0, boosted(k, x), x, 0, params);
      return order_distance_pdf(D + 1, x, lambda) * acc;
    };
    return radial(integrand, lambda, nested_spec(1e-9)).value;
  }
  const int annulus = m - D - 2;
  const auto outer = nested_spec(annulus == 0 ? 1e-8 : 1e-6);
  const auto mid = nested_spec(annulus == 0 ? 1e-10 : 1e-7);
  const auto inner = nested_spec(1e-8);
  auto slice_x = [&](double x) {
    auto slice_y = [&](double y) {
      const double f = joint_pdf_f(D + 1, m, y, x, lambda);
      if (f == 0.0) return 0.0;
      double acc = 0.0;
      for (int k = 1; k <= K; ++k) {
        const double tk = k * S * tau;
        double ring = 1.0;
        if (annulus > 0) {
          auto r_term = [&](double r) { return 2.0 * r / (x * x - y * y) / (1.0 + tk * std::pow(x / r, alpha)); };
          ring = std::pow(numerics::integrate(r_term, y, x, inner).value, annulus);
        }
        acc += sign_binom(K, k) * laplace_terms(1.0, boosted(k, x), x, 0, params) * ring /
               (1.0 + tk * std::pow(x / y, alpha));
      }
      return f * acc;
    };
    return numerics::integrate(slice_y, 0.0, x, mid).value;
  };
  return radial(slice_x, lambda, outer).value;
}

}  // namespace

double r_entry(const NetworkParams& params, int K, int m, RTableMethod method) {
  params.check();
  if (K < 1 || K > params.M) throw DomainError("r_entry: K must lie in 1..M");
  if (m < 1 || m > params.M - K + kMaxBoundOrder) throw DomainError("r_entry: rank m out of range");
  return method == RTableMethod::reduced ? r_reduced(params, K, m) : r_nested(params, K, m);
}

RTable r_table(const NetworkParams& params, int L, RTableMethod method) {
  params.check();
  if (L < 1 || L > kMaxBoundOrder) {
    throw DomainError("r_table: L=" + std::to_string(L) + " unsupported (1.." + std::to_string(kMaxBoundOrder) + ")");
  }
  std::vector<std::vector<double>> values(static_cast<std::size_t>(params.M));
  for (int K = 1; K <= params.M; ++K) {
    auto& row = values[static_cast<std::size_t>(K - 1)];
    for (int m = 1; m <= params.M - K + L; ++m) row.push_back(r_entry(params, K, m, method));
  }
  return RTable(params, L, std::move(values));
}

RTable r_table_cached(const NetworkParams& params, int L, const std::filesystem::path& cache_dir) {
  char name[256];
  std::snprintf(name, sizeof name, "rtable_lam%a_alpha%a_tau%a_M%d_L%d.json", params.lambda_h, params.alpha,
                params.tau, params.M, L);
  const auto path = cache_dir / name;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    RTable t = RTable::from_json(buf.str());
    if (t.matches(params) && t.L() == L) return t;
  }
  RTable t = r_table(params, L);
  std::filesystem::create_directories(cache_dir);
  std::ofstream out(path);
  out << t.to_json() << "\n";
  return t;
}

double pzf_upper_file(int K, double T, const RTable& table) {
  const int J = table.ranks(K) - 1;
  double acc = 0.0;
  double tail = 1.0;  // (1-T)^{m-1}
  for (int m = 1; m <= J; ++m) {
    acc += T * tail * table(K, m);
    tail *= 1.0 - T;
  }
  return acc + tail * table(K, J + 1);
}

double pzf_upper_derivative(int K, double T, const RTable& table) {
  const int J = table.ranks(K) - 1;
  double acc = 0.0;
  double tail = 1.0;
  for (int m = 1; m <= J; ++m) {
    acc += m * tail * (table(K, m) - table(K, m + 1));
    tail *= 1.0 - T;
  }
  return acc;
}

StpEstimate stp_pzf_upper(const DofAllocation& K, const CachingDistribution& T, const Popularity& pop,
                          const RTable& table) {
  if (K.antennas() != table.M()) throw DomainError("stp_pzf_upper: table built for a different M");
  if (K.size() != T.size() || T.size() != pop.size()) throw DomainError("stp_pzf_upper: length mismatch");
  StpEstimate est;
  est.kind = EstimateKind::upper_bound;
  est.per_file.resize(T.size());
  for (std::size_t n = 0; n < T.size(); ++n) {
    est.per_file[n] = pzf_upper_file(K[n], T[n], table);
    est.value += pop[n] * est.per_file[n];
  }
  est.error = 1e-9;
  return est;
}

double pzf_upper_objective(std::span<const int> K, std::span<const double> T, const Popularity& pop,
                           const RTable& table) {
  double acc = 0.0;
  for (std::size_t n = 0; n < T.size(); ++n) acc += pop[n] * pzf_upper_file(K[n], T[n], table);
  return acc;
}

}  // namespace cachesimo
