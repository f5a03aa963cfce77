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
#include "cachesimo/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace cachesimo::numerics {

namespace {

void require_positive(double a, double b, const char* who) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw DomainError(std::string(who) + ": shape parameters must be positive (a=" + std::to_string(a) +
                      ", b=" + std::to_string(b) + ")");
  }
}

void enumerate(int remaining, int part, std::vector<int>& current, std::vector<std::vector<int>>& out) {
  // part walks from k down to 1; current[part-1] holds b_part
  if (part == 0) {
    if (remaining == 0) out.push_back(current);
    return;
  }
  for (int count = remaining / part; count >= 0; --count) {
    current[part - 1] = count;
    enumerate(remaining - count * part, part - 1, current, out);
  }
  current[part - 1] = 0;
}

PartitionSet build_partitions(int k) {
  PartitionSet set;
  set.k = k;
  std::vector<int> current(static_cast<std::size_t>(k), 0);
  enumerate(k, k, current, set.elements);
  return set;
}

struct Panel {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

Panel gk21(const Integrand& f, double a, double b) {
  const auto& xk = boost::math::quadrature::gauss_kronrod<double, 21>::abscissa();
  const auto& wk = boost::math::quadrature::gauss_kronrod<double, 21>::weights();
  const auto& wg = boost::math::quadrature::gauss<double, 10>::weights();
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double f0 = f(c);
  double kron = wk[0] * f0;
  double gauss = 0.0;
  // the 10-point Gauss nodes are the odd Kronrod nodes
  for (std::size_t i = 1; i < xk.size(); ++i) {
    const double pair = f(c - h * xk[i]) + f(c + h * xk[i]);
    kron += wk[i] * pair;
    if (i % 2 == 1) gauss += wg[i / 2] * pair;
  }
  return Panel{a, b, h * kron, std::abs(h * (kron - gauss))};
}

}  // namespace

double beta(double a, double b) {
  require_positive(a, b, "beta");
  return std::exp(boost::math::lgamma(a) + boost::math::lgamma(b) - boost::math::lgamma(a + b));
}

double comp_inc_beta(double a, double b, double z) {
  require_positive(a, b, "comp_inc_beta");
  if (!(z > 0.0 && z < 1.0)) {
    throw DomainError("comp_inc_beta: z must lie in (0,1), got " + std::to_string(z));
  }
  return boost::math::betac(a, b, z);
}

double comp_inc_beta_closed(double a, double b, double z) {
  require_positive(a, b, "comp_inc_beta");
  if (!(z >= 0.0 && z <= 1.0)) {
    throw DomainError("comp_inc_beta: z must lie in [0,1], got " + std::to_string(z));
  }
  if (z == 0.0) return boost::math::beta(a, b);
  if (z == 1.0) return 0.0;
  return boost::math::betac(a, b, z);
}

double s_const(double a) {
  if (!(a >= 1.0)) throw DomainError("s_const: a must be >= 1, got " + std::to_string(a));
  return std::exp(-boost::math::lgamma(a + 1.0) / a);
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return boost::math::binomial_coefficient<double>(static_cast<unsigned>(n), static_cast<unsigned>(k));
}

double factorial(int n) {
  if (n < 0) throw DomainError("factorial: negative argument");
  return boost::math::factorial<double>(static_cast<unsigned>(n));
}

const PartitionSet& partitions(int k) {
  if (k < 0) throw DomainError("partitions: k must be nonnegative");
  static const std::array<PartitionSet, kMaxPartitionOrder + 1> table = [] {
    std::array<PartitionSet, kMaxPartitionOrder + 1> t;
    for (int i = 0; i <= kMaxPartitionOrder; ++i) t[static_cast<std::size_t>(i)] = build_partitions(i);
    return t;
  }();
  if (k > kMaxPartitionOrder) {
    throw DomainError("partitions: k=" + std::to_string(k) + " exceeds supported order " +
                      std::to_string(kMaxPartitionOrder));
  }
  return table[static_cast<std::size_t>(k)];
}

void QuadratureSpec::check() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw DomainError("QuadratureSpec: tolerances must be positive");
  if (max_subdivisions < 1) throw DomainError("QuadratureSpec: max_subdivisions must be >= 1");
}

QuadratureResult integrate(const Integrand& f, double a, double b, const QuadratureSpec& spec) {
  spec.check();
  if (a == b) return {};
  if (a > b) {
    auto r = integrate(f, b, a, spec);
    r.value = -r.value;
    return r;
  }

  std::priority_queue<Panel> panels;
  Panel first = gk21(f, a, b);
  double total = first.value;
  double total_err = first.error;
  panels.push(first);
  int splits = 0;

  auto converged = [&] { return total_err <= std::max(spec.abs_tol, spec.rel_tol * std::abs(total)); };

  while (!converged()) {
    if (splits >= spec.max_subdivisions) {
      throw ConvergenceError("integrate: subdivision budget exhausted", total, total_err);
    }
    Panel worst = panels.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      throw ConvergenceError("integrate: panel width underflow", total, total_err);
    }
    panels.pop();
    Panel left = gk21(f, worst.a, mid);
    Panel right = gk21(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
    ++splits;
    if (splits % 64 == 0) {
      // re-sum to shed accumulated rounding in the running totals
      std::priority_queue<Panel> copy = panels;
      total = 0.0;
      total_err = 0.0;
      while (!copy.empty()) {
        total += copy.top().value;
        total_err += copy.top().error;
        copy.pop();
      }
    }
  }
  if (!std::isfinite(total)) throw ConvergenceError("integrate: non-finite estimate", total, total_err);
  return {total, total_err, splits};
}

QuadratureResult integrate_semi_infinite(const Integrand& f, const QuadratureSpec& spec) {
  if (spec.semi_infinite == SemiInfiniteMap::rational) {
    return integrate(
        [&](double t) {
          const double w = 1.0 - t;
          const double x = t / w;
          const double fx = f(x);
          return fx == 0.0 ? 0.0 : fx / (w * w);
        },
        0.0, 1.0, spec);
  }
  return integrate(
      [&](double t) {
        const double w = 1.0 - t;
        const double fx = f(-std::log(w));
        return fx == 0.0 ? 0.0 : fx / w;
      },
      0.0, 1.0, spec);
}

namespace {

QuadratureResult integrate_axis(const IntegrandND& f, std::span<const Interval> box, std::vector<double>& point,
                                std::size_t axis, const QuadratureSpec& spec) {
  QuadratureSpec inner = spec;
  inner.rel_tol = spec.rel_tol * 0.1;
  inner.abs_tol = spec.abs_tol * 0.1;
  double inner_error = 0.0;
  auto slice = [&](double x) {
    point[axis] = x;
    if (axis + 1 == box.size()) return f(point);
    auto r = integrate_axis(f, box, point, axis + 1, inner);
    inner_error = std::max(inner_error, r.error);
    return r.value;
  };
  auto r = integrate(slice, box[axis].lo, box[axis].hi, spec);
  r.error += inner_error * std::abs(box[axis].hi - box[axis].lo);
  return r;
}

}  // namespace

QuadratureResult integrate_box(const IntegrandND& f, std::span<const Interval> box, const QuadratureSpec& spec) {
  if (box.empty() || box.size() > 3) throw DomainError("integrate_box: dimension must be 1, 2 or 3");
  std::vector<double> point(box.size(), 0.0);
  return integrate_axis(f, box, point, 0, spec);
}

}  // namespace cachesimo::numerics
