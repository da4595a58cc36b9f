// Copyright 2026 The clipbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Test-only reference computations. Nothing here calls into the library's
// numerical code, so agreement with it is evidence rather than tautology.

#ifndef CLIPBENCH_TESTS_ORACLES_HPP_
#define CLIPBENCH_TESTS_ORACLES_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "clipbench/rng.hpp"

namespace oracle {

// Plain bisection for a sign change of f on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline double naive_kl3(double r) { return r - 1.0 - std::log(r); }

// Roots of r - 1 - log r = delta below and above 1.
inline double kl3_root_below(double delta) {
  return bisect([delta](double r) { return naive_kl3(r) - delta; }, 1e-300, 1.0);
}
inline double kl3_root_above(double delta) {
  double hi = 2.0;
  while (naive_kl3(hi) < delta) hi *= 2.0;
  return bisect([delta](double r) { return naive_kl3(r) - delta; }, 1.0, hi);
}

// w with w e^w = x on [lo, hi] by bisection.
inline double lambert_bisect(double x, double lo, double hi) {
  return bisect([x](double w) { return w * std::exp(w) - x; }, lo, hi);
}

inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
  for (double& v : p) v /= s;
  return p;
}

inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) h -= v > 0 ? v * std::log(v) : 0.0;
  return h;
}

// Half-width of a 3-sigma binomial band for n draws at probability p.
inline double three_sigma(double p, double n) { return 3.0 * std::sqrt(p * (1.0 - p) / n); }

// Random probability vector with entries bounded away from zero.
inline std::vector<double> random_dist(std::size_t n, clipbench::Rng& rng) {
  std::vector<double> p(n);
  double s = 0.0;
  for (double& v : p) s += (v = rng.uniform(0.05, 1.0));
  for (double& v : p) v /= s;
  return p;
}

}  // namespace oracle

#endif  // CLIPBENCH_TESTS_ORACLES_HPP_
