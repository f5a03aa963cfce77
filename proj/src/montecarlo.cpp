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
#include "cachesimo/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

#include <Eigen/Dense>

namespace cachesimo {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxEnlargements = 40;

}  // namespace

void SimConfig::check() const {
  if (trials < 1) throw DomainError("SimConfig: trials must be >= 1");
  if (!(radius >= 0.0)) throw DomainError("SimConfig: radius must be >= 0");
  if (lanes < 0) throw DomainError("SimConfig: lanes must be >= 0");
}

CacheLaw CacheLaw::marginals(const CachingDistribution& T) {
  if (T.effective_marginals()) throw DomainError("CacheLaw::marginals: effective marginals have no exactly-C law");
  CacheLaw law;
  law.T = T;
  law.C = T.cache_size();
  return law;
}

CacheLaw CacheLaw::iid(const Popularity& pop, int C) {
  if (C < 1 || static_cast<std::size_t>(C) >= pop.size()) throw DomainError("CacheLaw::iid: C outside [1, N-1]");
  CacheLaw law;
  law.pop = pop;
  law.C = C;
  return law;
}

CacheLaw CacheLaw::for_baseline(BaselineKind kind, const Popularity& pop, int C) {
  if (kind == BaselineKind::iid_popularity) return iid(pop, C);
  return marginals(baseline(kind, pop, C));
}

CacheLaw CacheLaw::for_design(const CachingDistribution& T, const Popularity& pop) {
  if (T.effective_marginals()) return iid(pop, T.cache_size());
  return marginals(T);
}

std::size_t CacheLaw::files() const { return T ? T->size() : pop->size(); }

double CacheLaw::min_positive_presence() const {
  double best = 1.0;
  for (std::size_t n = 0; n < files(); ++n) {
    const double p = T ? (*T)[n] : 1.0 - std::pow(1.0 - (*pop)[n], C);
    if (p > 0.0) best = std::min(best, p);
  }
  return best;
}

std::vector<int> CacheLaw::draw(std::mt19937_64& rng) const {
  return T ? sample_cache(*T, rng) : sample_iid_cache(*pop, C, rng);
}

std::optional<std::size_t> NetworkRealization::nearest_cacher(int n) const {
  for (std::size_t i = 0; i < caches.size(); ++i) {
    if (std::binary_search(caches[i].begin(), caches[i].end(), n)) return i;
  }
  return std::nullopt;
}

double auto_radius(const NetworkParams& params, double min_positive_presence) {
  params.check();
  if (!(min_positive_presence > 0.0 && min_positive_presence <= 1.0)) {
    throw DomainError("auto_radius: presence must lie in (0,1]");
  }
  const double assoc = std::sqrt(std::log(1e6) / (kPi * params.lambda_h * min_positive_presence));
  const double crowd = std::sqrt(500.0 / (kPi * params.lambda_h));
  return std::max(assoc, crowd);
}

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

namespace {

void add_helpers(NetworkRealization& r, const NetworkParams& params, const CacheLaw& law, double inner,
                 double outer, std::mt19937_64& rng) {
  std::poisson_distribution<long> count_dist(params.lambda_h * kPi * (outer * outer - inner * inner));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  const long count = count_dist(rng);
  for (long c = 0; c < count; ++c) {
    const double rad = std::sqrt(inner * inner + unif(rng) * (outer * outer - inner * inner));
    const double theta = 2.0 * kPi * unif(rng);
    r.x.push_back(rad * std::cos(theta));
    r.y.push_back(rad * std::sin(theta));
    r.distance.push_back(rad);
    r.caches.push_back(law.draw(rng));
    for (int a = 0; a < params.M; ++a) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      r.channels.emplace_back(re, im);
    }
  }
}

void sort_by_distance(NetworkRealization& r) {
  std::vector<std::size_t> order(r.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r.distance[a] < r.distance[b]; });
  NetworkRealization s;
  s.M = r.M;
  s.radius = r.radius;
  s.enlargements = r.enlargements;
  const auto M = static_cast<std::size_t>(r.M);
  for (std::size_t i : order) {
    s.x.push_back(r.x[i]);
    s.y.push_back(r.y[i]);
    s.distance.push_back(r.distance[i]);
    s.caches.push_back(std::move(r.caches[i]));
    for (std::size_t a = 0; a < M; ++a) s.channels.push_back(r.channels[i * M + a]);
  }
  r = std::move(s);
}

}  // namespace

NetworkRealization realize(const NetworkParams& params, const CacheLaw& law, const SimConfig& cfg,
                           std::uint64_t trial, std::optional<int> required_file, std::size_t min_helpers) {
  params.check();
  cfg.check();
  if (law.files() == 0) throw DomainError("realize: empty cache law");
  auto rng = trial_rng(cfg.seed, trial, 0);
  NetworkRealization r;
  r.M = params.M;
  r.radius = cfg.radius > 0.0 ? cfg.radius : auto_radius(params, law.min_positive_presence());
  add_helpers(r, params, law, 0.0, r.radius, rng);

  auto satisfied = [&] {
    if (r.size() < min_helpers) return false;
    if (!required_file) return true;
    for (const auto& cache : r.caches) {
      if (std::binary_search(cache.begin(), cache.end(), *required_file)) return true;
    }
    return false;
  };
  while (!satisfied()) {
    if (r.enlargements >= kMaxEnlargements) {
      throw DomainError("realize: no usable helper after " + std::to_string(kMaxEnlargements) + " enlargements");
    }
    add_helpers(r, params, law, r.radius, 2.0 * r.radius, rng);
    r.radius *= 2.0;
    ++r.enlargements;
  }
  sort_by_distance(r);
  return r;
}

double LinkSample::sir() const {
  if (interference == 0.0) return std::numeric_limits<double>::infinity();
  return signal / interference;
}

namespace {

using CVec = Eigen::VectorXcd;

Eigen::Map<const CVec> channel_of(const NetworkRealization& r, std::size_t i) {
  return Eigen::Map<const CVec>(r.channels.data() + i * static_cast<std::size_t>(r.M), r.M);
}

/// Path gain of helper i relative to the serving helper, (d_s/d_i)^α.
double relative_gain(const NetworkRealization& r, std::size_t i, std::size_t s, double alpha) {
  return std::pow(r.distance[s] / r.distance[i], alpha);
}

LinkSample combine(const NetworkRealization& r, std::size_t serving, const CVec& w, const std::vector<bool>& skip,
                   double alpha) {
  LinkSample out;
  out.serving = serving;
  const auto h = channel_of(r, serving);
  out.signal_fading = std::norm(w.dot(h));
  // powers measured relative to d_s^{-α}; SIR is unchanged
  out.signal = out.signal_fading;
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i == serving || skip[i]) continue;
    acc += std::norm(w.dot(channel_of(r, i))) * relative_gain(r, i, serving, alpha);
  }
  out.interference = acc;
  return out;
}

std::size_t require_cacher(const NetworkRealization& r, int n) {
  const auto s = r.nearest_cacher(n);
  if (!s) throw DomainError("no helper caches file " + std::to_string(n + 1));
  return *s;
}

/// Helpers whose interference the PZF receiver cancels.
std::vector<std::size_t> canceled_set(std::size_t serving, int D) {
  std::vector<std::size_t> out;
  const auto d = static_cast<std::size_t>(D);
  if (serving >= d) {
    for (std::size_t i = 0; i < d; ++i) out.push_back(i);
  } else {
    for (std::size_t i = 0; i <= d; ++i) {
      if (i != serving) out.push_back(i);
    }
  }
  return out;
}

CVec pzf_vector(const NetworkRealization& r, std::size_t serving, int K, int M) {
  const int D = M - K;
  const auto h = channel_of(r, serving);
  if (D == 0) return h / h.norm();
  const auto cancel = canceled_set(serving, D);
  Eigen::MatrixXcd A(M, D);
  for (int c = 0; c < D; ++c) A.col(c) = channel_of(r, cancel[static_cast<std::size_t>(c)]);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(A);
  const Eigen::MatrixXcd Q = qr.householderQ();
  const auto U = Q.rightCols(K);
  const CVec p = U * (U.adjoint() * h);
  return p / p.norm();
}

}  // namespace

LinkSample link_mrc(const NetworkRealization& r, int n, const NetworkParams& params) {
  const std::size_t s = require_cacher(r, n);
  const auto h = channel_of(r, s);
  const CVec w = h / h.norm();
  return combine(r, s, w, std::vector<bool>(r.size(), false), params.alpha);
}

LinkSample link_pzf(const NetworkRealization& r, int n, int K, const NetworkParams& params) {
  const int M = params.M;
  if (K < 1 || K > M) throw DomainError("link_pzf: K must lie in 1..M");
  if (r.M != M) throw DomainError("link_pzf: realization built for a different M");
  const int D = M - K;
  if (r.size() < static_cast<std::size_t>(D) + 1) {
    throw DomainError("link_pzf: fewer than M-K+1 helpers in the realization");
  }
  const std::size_t s = require_cacher(r, n);
  if (D == 0) return link_mrc(r, n, params);
  const CVec w = pzf_vector(r, s, K, M);
  std::vector<bool> skip(r.size(), false);
  double leak = 0.0;
  for (std::size_t c : canceled_set(s, D)) {
    skip[c] = true;
    leak += std::norm(w.dot(channel_of(r, c)));
  }
  LinkSample out = combine(r, s, w, skip, params.alpha);
  if (leak > 1e-10 * out.signal_fading) throw DomainError("link_pzf: canceled channels are numerically rank deficient");
  return out;
}

double sir_mrc(const NetworkRealization& r, int n, const NetworkParams& params) { return link_mrc(r, n, params).sir(); }

double sir_pzf(const NetworkRealization& r, int n, int K, const NetworkParams& params) {
  return link_pzf(r, n, K, params).sir();
}

std::vector<std::complex<double>> pzf_filter(const NetworkRealization& r, std::size_t serving, int K, int M) {
  if (K < 1 || K > M || r.M != M) throw DomainError("pzf_filter: bad K or M");
  if (serving >= r.size() || r.size() < static_cast<std::size_t>(M - K) + 1) {
    throw DomainError("pzf_filter: not enough helpers");
  }
  const CVec w = pzf_vector(r, serving, K, M);
  return std::vector<std::complex<double>>(w.data(), w.data() + w.size());
}

int resolve_lanes(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CACHE_SIMO_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SimulationResult simulate(const Receiver& receiver, const CacheLaw& law, const Popularity& pop,
                          const NetworkParams& params, std::span<const double> taus, const SimConfig& cfg) {
  params.check();
  cfg.check();
  if (law.files() != pop.size()) throw DomainError("simulate: cache law and popularity lengths differ");
  const auto* pzf = std::get_if<PzfReceiver>(&receiver);
  if (pzf != nullptr && (pzf->K.size() != pop.size() || pzf->K.antennas() != params.M)) {
    throw DomainError("simulate: DoF allocation does not match the scenario");
  }
  std::vector<double> presence(pop.size());
  for (std::size_t n = 0; n < pop.size(); ++n) {
    presence[n] = law.T ? (*law.T)[n] : 1.0 - std::pow(1.0 - pop[n], law.C);
  }

  const std::uint64_t trials = cfg.trials;
  std::vector<double> sir(trials, 0.0);
  std::vector<int> file(trials, 0);
  std::vector<char> enlarged(trials, 0);

  auto run_trial = [&](std::uint64_t t) {
    auto req_rng = trial_rng(cfg.seed, t, 1);
    std::discrete_distribution<int> pick(pop.values().begin(), pop.values().end());
    const int n = pick(req_rng);
    file[t] = n;
    if (presence[static_cast<std::size_t>(n)] == 0.0) {
      sir[t] = 0.0;  // never cached anywhere: certain failure
      return;
    }
    const int K = pzf ? pzf->K[static_cast<std::size_t>(n)] : params.M;
    const auto r = realize(params, law, cfg, t, n, static_cast<std::size_t>(params.M - K) + 1);
    enlarged[t] = r.enlargements > 0 ? 1 : 0;
    sir[t] = pzf ? sir_pzf(r, n, K, params) : sir_mrc(r, n, params);
  };

  const int lanes = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(resolve_lanes(cfg.lanes)), trials));
  if (lanes <= 1) {
    for (std::uint64_t t = 0; t < trials; ++t) run_trial(t);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(lanes));
    for (int lane = 0; lane < lanes; ++lane) {
      pool.emplace_back([&, lane] {
        try {
          for (std::uint64_t t = static_cast<std::uint64_t>(lane); t < trials; t += static_cast<std::uint64_t>(lanes)) {
            run_trial(t);
          }
        } catch (...) {
          errors[static_cast<std::size_t>(lane)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  SimulationResult out;
  out.trials = trials;
  for (std::uint64_t t = 0; t < trials; ++t) {
    out.enlarged_trials += static_cast<std::uint64_t>(enlarged[t]);
    if (std::isinf(sir[t])) ++out.infinite_sir;
  }
  const double counted = static_cast<double>(trials - out.infinite_sir);
  for (double tau : taus) {
    if (!(tau > 0.0)) throw DomainError("simulate: thresholds must be > 0");
    StpEstimate est;
    est.kind = EstimateKind::monte_carlo;
    std::vector<double> hits(pop.size(), 0.0), asks(pop.size(), 0.0);
    double success = 0.0;
    for (std::uint64_t t = 0; t < trials; ++t) {
      if (std::isinf(sir[t])) continue;
      const auto n = static_cast<std::size_t>(file[t]);
      asks[n] += 1.0;
      if (sir[t] >= tau) {
        hits[n] += 1.0;
        success += 1.0;
      }
    }
    est.value = counted > 0.0 ? success / counted : 0.0;
    est.error = counted > 0.0 ? 1.96 * std::sqrt(est.value * (1.0 - est.value) / counted) : 1.0;
    est.per_file.resize(pop.size());
    for (std::size_t n = 0; n < pop.size(); ++n) {
      est.per_file[n] = asks[n] > 0.0 ? hits[n] / asks[n] : std::numeric_limits<double>::quiet_NaN();
    }
    out.per_tau.push_back(std::move(est));
  }
  return out;
}

StpEstimate estimate_stp(const Receiver& receiver, const CacheLaw& law, const Popularity& pop,
                         const NetworkParams& params, const SimConfig& cfg) {
  const double tau = params.tau;
  return simulate(receiver, law, pop, params, std::span<const double>(&tau, 1), cfg).per_tau.front();
}

StpEstimate estimate_stp(const Receiver& receiver, const CachingDistribution& T, const Popularity& pop,
                         const NetworkParams& params, const SimConfig& cfg) {
  return estimate_stp(receiver, CacheLaw::for_design(T, pop), pop, params, cfg);
}

}  // namespace cachesimo
