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

#include "clipbench/ranges.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "clipbench/divergence.hpp"
#include "clipbench/errors.hpp"

namespace clipbench {
namespace {

// e split into a double and its rounding residue, so 1 + e*x keeps full
// relative precision close to the branch point.
constexpr double kEHi = 2.718281828459045;
constexpr double kELo = 1.4456468917292502e-16;
constexpr double kInvE = 0.36787944117144233;

enum class Branch { kPrincipal, kLower };

void check_lambert_arg(double x) {
  if (!std::isfinite(x) || x >= 0.0 || x < -kInvE) {
    throw DomainError("lambert_w: argument must lie in [-1/e, 0), got " + std::to_string(x));
  }
}

// Expansion about the branch point in p = +/- sqrt(2 (1 + e x)).
double branch_point_series(double p) {
  return -1.0 +
         p * (1.0 +
              p * (-1.0 / 3.0 +
                   p * (11.0 / 72.0 +
                        p * (-43.0 / 540.0 +
                             p * (769.0 / 17280.0 +
                                  p * (-221.0 / 8505.0 +
                                       p * (680863.0 / 43545600.0 +
                                            p * (-1963.0 / 204120.0))))))));
}

double residual(double w, double x) { return w * std::exp(w) - x; }

// Extended precision so neighbouring doubles of a large |w| can be told apart.
long double fine_residual(double w, double x) {
  const long double lw = w;
  return std::abs(lw * std::exp(lw) - static_cast<long double>(x));
}

// `q` is 1 + e*x computed by the caller as accurately as it can.
double lambert_impl(double x, double q, Branch branch) {
  if (q < 0.0) q = 0.0;
  const double p = std::sqrt(2.0 * q) * (branch == Branch::kPrincipal ? 1.0 : -1.0);
  if (std::abs(p) < 1e-3) return branch_point_series(p);

  // g(w) = w e^w - x is increasing on [-1, 0] and decreasing on (-inf, -1].
  double lo;
  double hi;
  double w;
  if (branch == Branch::kPrincipal) {
    lo = -1.0;
    hi = 0.0;
    w = x < -0.25 ? branch_point_series(p) : x * (1.0 - x * (1.0 - x * (1.5 - x * 8.0 / 3.0)));
  } else {
    hi = -1.0;
    lo = -2.0;
    while (residual(lo, x) <= 0.0) lo *= 2.0;
    if (x < -0.25) {
      w = branch_point_series(p);
    } else {
      const double l1 = std::log(-x);
      const double l2 = std::log(-l1);
      w = l1 - l2 + l2 / l1;
    }
  }
  if (!(w > lo && w < hi)) w = 0.5 * (lo + hi);

  const auto increasing = branch == Branch::kPrincipal;
  for (int iter = 0; iter < 200; ++iter) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    if (f == 0.0) break;
    if ((f > 0.0) == increasing) {
      hi = w;
    } else {
      lo = w;
    }
    const double wp1 = w + 1.0;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    double next = w - f / denom;
    if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    const double step = std::abs(next - w);
    w = next;
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(w)) break;
  }

  // Double-precision f is only good to ~|w| ulps; one extended Newton step
  // recovers the last few bits on the lower branch.
  {
    const long double lw = w;
    const long double ew = std::exp(lw);
    const long double next = lw - (lw * ew - x) / (ew * (lw + 1.0L));
    if (std::isfinite(static_cast<double>(next)) && next > lo && next < hi) w = static_cast<double>(next);
  }

  // Settle on whichever neighbouring double has the smallest residual.
  for (int pass = 0; pass < 64; ++pass) {
    const double down = std::nextafter(w, -std::numeric_limits<double>::infinity());
    const double up = std::nextafter(w, std::numeric_limits<double>::infinity());
    double best = w;
    long double best_res = fine_residual(w, x);
    for (double cand : {down, up}) {
      if (branch == Branch::kPrincipal && cand < -1.0) continue;
      if (branch == Branch::kLower && cand > -1.0) continue;
      const long double r = fine_residual(cand, x);
      if (r < best_res) {
        best = cand;
        best_res = r;
      }
    }
    if (best == w) break;
    w = best;
  }
  return w;
}

double distance_from_branch_point(double x) { return std::fma(kEHi, x, 1.0) + kELo * x; }

void check_delta(double delta) {
  if (!std::isfinite(delta) || delta <= 0.0) {
    throw DomainError("delta must be finite and positive, got " + std::to_string(delta));
  }
  if (delta > kMaxDelta) {
    throw DomainError("delta too large: lower clipping bound underflows");
  }
}

// Bisection to the last representable midpoint. `decreasing` says which way
// kl3 runs over the bracket.
double bisect_kl3(double lo, double hi, double delta, bool decreasing) {
  while (true) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const bool above = kl3(mid) > delta;
    if (above == decreasing) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::abs(kl3(lo) - delta) <= std::abs(kl3(hi) - delta) ? lo : hi;
}

}  // namespace

double lambert_w0(double x) {
  check_lambert_arg(x);
  return lambert_impl(x, distance_from_branch_point(x), Branch::kPrincipal);
}

double lambert_wm1(double x) {
  check_lambert_arg(x);
  return lambert_impl(x, distance_from_branch_point(x), Branch::kLower);
}

ClipRange solve_kl3_range(double delta) {
  check_delta(delta);
  if (delta < kSmallDelta) {
    const double half_width = std::sqrt(2.0 * delta);
    return {1.0 - half_width, 1.0 + half_width, delta};
  }
  // 1 + e * (-exp(-1 - delta)) = 1 - exp(-delta).
  const double x = -std::exp(-1.0 - delta);
  const double q = -std::expm1(-delta);
  return {-lambert_impl(x, q, Branch::kPrincipal), -lambert_impl(x, q, Branch::kLower), delta};
}

ClipRange solve_kl3_range_oracle(double delta) {
  check_delta(delta);
  constexpr double kFloor = 1e-300;
  if (kl3(kFloor) <= delta) throw DomainError("oracle: lower root not bracketed");
  double r_max = 2.0;
  while (kl3(r_max) <= delta) r_max *= 2.0;
  return {bisect_kl3(kFloor, 1.0, delta, true), bisect_kl3(1.0, r_max, delta, false), delta};
}

}  // namespace clipbench
