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

#include "clipbench/divergence.hpp"

#include <cmath>
#include <string>

#include "clipbench/errors.hpp"

namespace clipbench {
namespace {

void check_ratio(double ratio) {
  if (!std::isfinite(ratio) || ratio <= 0.0) {
    throw DomainError("likelihood ratio must be finite and positive, got " +
                      std::to_string(ratio));
  }
}

}  // namespace

double kl1(double ratio) {
  check_ratio(ratio);
  return -std::log(ratio);
}

double kl2(double ratio) {
  check_ratio(ratio);
  const double l = std::log(ratio);
  return 0.5 * l * l;
}

double kl3(double ratio) {
  check_ratio(ratio);
  // x - log1p(x) avoids the cancellation of r - 1 - log r near r = 1.
  const double x = ratio - 1.0;
  if (std::abs(x) < 1e-4) {
    // x^2/2 - x^3/3 + x^4/4 - x^5/5; truncation below 1e-20 relative.
    return x * x * (0.5 - x * (1.0 / 3.0 - x * (0.25 - x * 0.2)));
  }
  return x - std::log1p(x);
}

double kl3_is_weighted(double ratio) { return ratio * kl3(ratio); }

double full_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw DomainError("full_kl: support sizes differ");
  }
  double sum = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] < 0.0 || q[a] < 0.0) throw DomainError("full_kl: negative probability");
    if (p[a] == 0.0) continue;
    if (q[a] == 0.0) throw DomainError("full_kl: q(a) = 0 where p(a) > 0");
    sum += p[a] * std::log(p[a] / q[a]);
  }
  // Rounding can leave a tiny negative value when p == q up to ulps.
  return sum < 0.0 ? 0.0 : sum;
}

}  // namespace clipbench
