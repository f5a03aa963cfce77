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

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "cachesimo/optimize.hpp"

using namespace cachesimo;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

NetworkParams params(int M, double tau, double alpha = 4.0) {
  NetworkParams p;
  p.M = M;
  p.tau = tau;
  p.alpha = alpha;
  return p;
}

Popularity random_popularity(std::size_t N, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.05, 1.0);
  std::vector<double> a(N);
  for (double& x : a) x = U(rng);
  std::sort(a.begin(), a.end(), std::greater<>());
  const double s = std::accumulate(a.begin(), a.end(), 0.0);
  for (double& x : a) x /= s;
  return Popularity(a);
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

bool non_increasing(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1] + 1e-12) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("kkt_allocate matches grid search on log utilities", "[optimize][kkt]") {
  const std::vector<double> a{0.5, 0.3, 0.2};
  const std::vector<double> b{4.0, 9.0, 2.0};
  const Marginal g = [&](std::size_t n, double x) { return a[n] * b[n] / (1.0 + b[n] * x); };
  auto utility = [&](double x, double y, double z) {
    return a[0] * std::log1p(b[0] * x) + a[1] * std::log1p(b[1] * y) + a[2] * std::log1p(b[2] * z);
  };
  const auto sol = kkt_allocate(3, 1, g, -1.0, 10.0);
  REQUIRE_THAT(sum(sol.T), WithinAbs(1.0, 1e-12));
  const double best = utility(sol.T[0], sol.T[1], sol.T[2]);
  double grid = -1e300;
  for (int i = 0; i <= 1000; ++i) {
    for (int j = 0; i + j <= 1000; ++j) {
      grid = std::max(grid, utility(i * 1e-3, j * 1e-3, 1.0 - (i + j) * 1e-3));
    }
  }
  CHECK(best >= grid - 1e-12);
  CHECK(best - grid < 1e-5);
  for (std::size_t n = 0; n < 3; ++n) {
    if (sol.T[n] > 1e-9 && sol.T[n] < 1.0 - 1e-9) CHECK_THAT(g(n, sol.T[n]), WithinRel(sol.multiplier, 1e-6));
  }
}

TEST_CASE("kkt_allocate clips at the box", "[optimize][kkt]") {
  // the first file wants the whole budget and saturates at 1
  const Marginal g = [](std::size_t n, double x) { return n == 0 ? 100.0 - x : 1.0 - x; };
  const auto sol = kkt_allocate(3, 2, g, -5.0, 200.0);
  CHECK_THAT(sol.T[0], WithinAbs(1.0, 1e-12));
  CHECK_THAT(sol.T[1], WithinAbs(0.5, 1e-9));
  CHECK_THAT(sol.T[2], WithinAbs(0.5, 1e-9));
}

TEST_CASE("kkt_allocate blends flat marginals", "[optimize][kkt]") {
  const Marginal g = [](std::size_t, double) { return 1.0; };
  const auto sol = kkt_allocate(4, 2, g, 0.0, 2.0);
  REQUIRE(sol.T.size() == 4);
  CHECK_THAT(sum(sol.T), WithinAbs(2.0, 1e-12));
  for (double t : sol.T) CHECK_THAT(t, WithinAbs(0.5, 1e-12));
}

TEST_CASE("kkt_allocate rejects bad brackets and budgets", "[optimize][kkt][errors]") {
  const Marginal g = [](std::size_t, double x) { return 1.0 - x; };
  CHECK_THROWS_AS(kkt_allocate(3, 1, g, 2.0, 1.0), BracketError);
  // both ends allocate too little
  CHECK_THROWS_AS(kkt_allocate(3, 1, g, 0.9, 2.0), BracketError);
  // both ends allocate too much
  CHECK_THROWS_AS(kkt_allocate(3, 1, g, -1.0, 0.1), BracketError);
  try {
    kkt_allocate(3, 1, g, 0.9, 2.0);
  } catch (const BracketError& e) {
    CHECK(e.lo() == 0.9);
    CHECK(e.hi() == 2.0);
  }
  CHECK_THROWS_AS(kkt_allocate(3, 0, g, -1.0, 2.0), DomainError);
  CHECK_THROWS_AS(kkt_allocate(3, 3, g, -1.0, 2.0), DomainError);
}

TEST_CASE("DC split reproduces the upper-bound derivative", "[optimize][dc]") {
  for (int M : {1, 2, 3, 5}) {
    for (double tau : {0.1, 1.0, 10.0}) {
      const auto p = params(M, tau);
      for (double x : {0.05, 0.3, 0.7, 0.95}) {
        const double h = 1e-5;
        const double fd = (mrc_bound_file(x + h, p, true) - mrc_bound_file(x - h, p, true)) / (2 * h);
        const auto s = dc_split_derivatives(x, p);
        CHECK_THAT(s.f_o - s.f_e, WithinAbs(fd, 1e-6));
        CHECK(s.f_o >= 0.0);
        CHECK(s.f_e >= 0.0);
      }
      // both parts are derivatives of concave functions
      double prev_o = 1e300, prev_e = 1e300;
      for (int i = 0; i <= 20; ++i) {
        const auto s = dc_split_derivatives(i / 20.0, p);
        CHECK(s.f_o <= prev_o + 1e-15);
        CHECK(s.f_e <= prev_e + 1e-15);
        prev_o = s.f_o;
        prev_e = s.f_e;
      }
    }
  }
  CHECK_THROWS_AS(dc_split_derivatives(1.5, params(2, 1.0)), DomainError);
}

TEST_CASE("CCCP ascends to a sorted feasible point", "[optimize][cccp][property]") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> Nd(3, 10), Md(1, 6);
  std::uniform_real_distribution<double> tau_db(-10.0, 10.0);
  for (int trial = 0; trial < 12; ++trial) {
    const int N = Nd(rng);
    std::uniform_int_distribution<int> Cd(1, N - 1);
    const int C = Cd(rng);
    const auto p = params(Md(rng), std::pow(10.0, tau_db(rng) / 10.0));
    const auto pop = random_popularity(static_cast<std::size_t>(N), rng);
    const auto trace = cccp(pop, p, C);
    INFO("N=" << N << " C=" << C << " M=" << p.M << " tau=" << p.tau);
    CHECK(trace.converged);
    CHECK(trace.iterations <= kCccpMaxIterations);
    for (std::size_t t = 1; t < trace.objectives.size(); ++t) {
      CHECK(trace.objectives[t] >= trace.objectives[t - 1] - 1e-12);
    }
    const auto& T = trace.final();
    CHECK_THAT(sum(T.values()), WithinAbs(C, 1e-9));
    for (double t : T.values()) CHECK((t >= 0.0 && t <= 1.0));
    CHECK(non_increasing(T.values()));
    CHECK(trace.objectives.size() == trace.iterates.size());
    CHECK(std::isnan(trace.multipliers.front()));
  }
}

TEST_CASE("CCCP at one antenna matches the direct concave solve", "[optimize][cccp]") {
  std::mt19937_64 rng(7);
  for (double tau : {0.1, 1.0, 10.0}) {
    const auto pop = random_popularity(6, rng);
    const auto p = params(1, tau);
    const auto trace = cccp(pop, p, 2, 1e-10);
    const auto direct = optimize_mrc_m1(pop, p, 2);
    CHECK_THAT(trace.objectives.back(), WithinAbs(mrc_upper_objective(direct.values(), pop, p), 1e-6));
    CHECK_THAT(stp_mrc_m1(direct, pop, p).value, WithinAbs(mrc_upper_objective(direct.values(), pop, p), 1e-12));
  }
}

TEST_CASE("CCCP subproblem improves on its linearization point", "[optimize][cccp]") {
  const auto pop = zipf(5, 1.0);
  const auto p = params(3, 1.0);
  const auto T0 = validate({0.6, 0.6, 0.6, 0.6, 0.6}, 3);
  const auto step = cccp_subproblem(T0, pop, p);
  CHECK(mrc_upper_objective(step.T.values(), pop, p) >= mrc_upper_objective(T0.values(), pop, p));
  CHECK(step.multiplier > 0.0);
  CHECK_THROWS_AS(cccp_subproblem(validate({0.5, 0.5}, 1), pop, p), DomainError);
}

TEST_CASE("CCCP argument checks", "[optimize][cccp][errors]") {
  const auto pop = zipf(4, 1.0);
  CHECK_THROWS_AS(cccp(pop, params(2, 1.0), 2, 0.0), DomainError);
  CHECK_THROWS_AS(cccp(pop, params(2, 1.0), 2, 1e-4, 0), DomainError);
  CHECK_THROWS_AS(cccp(pop, params(2, 1.0), 4), ValidationError);
}

TEST_CASE("CCCP trace CSV layout", "[optimize][cccp]") {
  const auto trace = cccp(zipf(3, 1.0), params(2, 1.0), 1);
  std::ostringstream os;
  trace.write_csv(os);
  std::istringstream in(os.str());
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "iteration,objective,multiplier,T1,T2,T3");
  CHECK(first.rfind("0,", 0) == 0);
  CHECK(first.find(",,") != std::string::npos);
}

TEST_CASE("asymptotic optimum closed form", "[optimize][asymptotic]") {
  const auto two = optimize_mrc_asymptotic(Popularity({0.8, 0.2}), 1);
  CHECK_THAT(two.T[0], WithinAbs(2.0 / 3.0, 1e-9));
  CHECK_THAT(two.T[1], WithinAbs(1.0 / 3.0, 1e-9));
  CHECK(two.residual <= 1e-9);
  CHECK_THAT(two.nu, WithinRel(std::pow(std::sqrt(0.8) + std::sqrt(0.2), 2.0), 1e-9));

  // a steep profile clips the head at 1
  const auto steep = optimize_mrc_asymptotic(zipf(10, 2.0), 3);
  CHECK(steep.residual <= 1e-9);
  CHECK(steep.T[0] == 1.0);
  CHECK(non_increasing(steep.T.values()));
  for (std::size_t n = 0; n < 10; ++n) {
    if (steep.T[n] < 1.0) CHECK_THAT(steep.T[n], WithinRel(std::sqrt(zipf(10, 2.0)[n] / steep.nu), 1e-12));
  }
  CHECK_THROWS_AS(optimize_mrc_asymptotic(zipf(4, 1.0), 0), DomainError);
  CHECK_THROWS_AS(optimize_mrc_asymptotic(zipf(4, 1.0), 4), DomainError);
}

TEST_CASE("asymptotic optimum minimizes the low-SIR outage coefficient", "[optimize][asymptotic]") {
  const auto pop = zipf(2, 1.0);
  const auto p = params(2, 1e-3);
  const auto opt = optimize_mrc_asymptotic(pop, 1);
  const double best = outage_asymptotic(opt.T, pop, p).coefficient;
  for (int i = 1; i < 1000; ++i) {
    const double x = i * 1e-3;
    CHECK(outage_asymptotic(validate({x, 1.0 - x}, 1), pop, p).coefficient >= best - 1e-12);
  }
}

namespace {

struct PzfFixture {
  NetworkParams p = params(3, 1.0);
  RTable table = r_table(p, 2);
};

}  // namespace

TEST_CASE("pzf_continuous is feasible and beats random feasible points", "[optimize][pzf]") {
  PzfFixture f;
  const auto pop = zipf(5, 0.8);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 4; ++trial) {
    std::uniform_int_distribution<int> Kd(1, 3);
    std::vector<int> k(5);
    for (int& v : k) v = Kd(rng);
    const DofAllocation K(k, 3);
    const auto T = pzf_continuous(K, pop, f.table, 2);
    CHECK_THAT(sum(T.values()), WithinAbs(2.0, 1e-9));
    const double obj = pzf_upper_objective(K.values(), T.values(), pop, f.table);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int s = 0; s < 200; ++s) {
      std::vector<double> x(5);
      for (double& v : x) v = U(rng);
      const double tot = sum(x);
      for (double& v : x) v *= 2.0 / tot;
      if (*std::max_element(x.begin(), x.end()) > 1.0) continue;
      CHECK(pzf_upper_objective(K.values(), x, pop, f.table) <= obj + 1e-12);
    }
  }
  CHECK_THROWS_AS(pzf_continuous(DofAllocation::uniform(4, 1, 3), pop, f.table, 2), DomainError);
  CHECK_THROWS_AS(pzf_continuous(DofAllocation::uniform(5, 1, 4), pop, f.table, 2), DomainError);
}

TEST_CASE("pzf_discrete picks the per-file maximizer", "[optimize][pzf]") {
  PzfFixture f;
  const auto pop = zipf(6, 1.0);
  const auto T = validate({1.0, 0.8, 0.5, 0.4, 0.2, 0.1}, 3);
  long evals = 0;
  const auto K = pzf_discrete(T, pop, f.table, &evals);
  CHECK(evals == 18);
  for (std::size_t n = 0; n < 6; ++n) {
    int arg = 1;
    double best = -1.0;
    for (int k = 1; k <= 3; ++k) {
      const double v = pzf_upper_file(k, T[n], f.table);
      if (v >= best) {
        best = v;
        arg = k;
      }
    }
    CHECK(K[n] == arg);
  }
}

TEST_CASE("pzf_discrete breaks ties toward more boost DoF", "[optimize][pzf]") {
  const RTable flat(params(2, 1.0), 1, {{0.5, 0.5}, {0.5}});
  const auto K = pzf_discrete(validate({0.5, 0.5}, 1), Popularity({0.6, 0.4}), flat);
  CHECK(K[0] == 2);
  CHECK(K[1] == 2);
}

TEST_CASE("alternating never beats exhaustive search", "[optimize][pzf]") {
  const auto p = params(2, 1.0);
  const auto table = r_table(p, 2);
  for (double gamma : {0.3, 1.0, 1.6}) {
    const auto pop = zipf(5, gamma);
    const auto alt = pzf_alternating(pop, table, 2);
    const auto ex = exhaustive_pzf(pop, table, 2);
    CHECK(alt.objective <= ex.objective + 1e-12);
    CHECK(ex.continuous_solves == 32);
    CHECK(alt.continuous_solves == static_cast<int>(alt.trace.size()));
    CHECK(alt.continuous_solves >= 1);
    CHECK_THAT(alt.objective, WithinAbs(pzf_upper_objective(alt.K.values(), alt.T.values(), pop, table), 1e-15));
    // the alternation terminates at a fixed point of the discrete step
    CHECK(pzf_discrete(alt.T, pop, table) == alt.K);
    for (std::size_t t = 1; t < alt.trace.size(); ++t) {
      CHECK(alt.trace[t].objective >= alt.trace[t - 1].objective - 1e-12);
    }
  }
}

TEST_CASE("alternating at one antenna uses a single solve", "[optimize][pzf]") {
  const auto p = params(1, 1.0);
  const auto sol = pzf_alternating(zipf(4, 1.0), p, 2, 2);
  CHECK(sol.continuous_solves == 1);
  CHECK(sol.K[0] == 1);
}

TEST_CASE("exhaustive search guards its size", "[optimize][pzf][errors]") {
  const auto p = params(4, 1.0);
  const RTable table(p, 1, {{1, 1, 1, 1}, {1, 1, 1}, {1, 1}, {1}});
  CHECK_THROWS_AS(exhaustive_pzf(zipf(9, 1.0), table, 3), DomainError);
  CHECK_THROWS_AS(exhaustive_pzf(Popularity({1.0}), table, 1), DomainError);
}

TEST_CASE("PZF trace CSV layout", "[optimize][pzf]") {
  const auto p = params(2, 1.0);
  const auto sol = pzf_alternating(zipf(3, 1.0), p, 1, 1);
  std::ostringstream os;
  sol.write_csv(os);
  std::string header = os.str().substr(0, os.str().find('\n'));
  CHECK(header == "iteration,objective,K1,K2,K3,T1,T2,T3");
}
