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

#ifndef CLIPBENCH_RANGES_HPP_
#define CLIPBENCH_RANGES_HPP_

namespace clipbench {

// Principal branch of the Lambert W function on [-1/e, 0). Returns w >= -1
// with w * exp(w) == x to within a few ulps of x.
double lambert_w0(double x);

// Lower real branch W_{-1} on [-1/e, 0). Returns w <= -1.
double lambert_wm1(double x);

// Admissible ratio interval [lower, upper] of the constraint kl3(r) <= delta.
struct ClipRange {
  double lower = 1.0;
  double upper = 1.0;
  double delta = 0.0;

  bool contains(double ratio) const noexcept { return lower <= ratio && ratio <= upper; }
};

// Closed form via the two real Lambert branches:
//   lower = -W0(-exp(-1 - delta)),  upper = -W_{-1}(-exp(-1 - delta)).
// For delta < kSmallDelta the two roots are 1 -/+ sqrt(2 delta).
// Throws DomainError for non-finite delta, delta <= 0, or delta so large that
// lower underflows (delta > kMaxDelta).
ClipRange solve_kl3_range(double delta);

// Independent cross-check: bisection on kl3(r) - delta over (1e-300, 1) and
// (1, r_max), r_max doubled until bracketing.
ClipRange solve_kl3_range_oracle(double delta);

inline constexpr double kSmallDelta = 1e-12;
inline constexpr double kMaxDelta = 680.0;

}  // namespace clipbench

#endif  // CLIPBENCH_RANGES_HPP_
