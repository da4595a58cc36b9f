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

#ifndef CLIPBENCH_DIVERGENCE_HPP_
#define CLIPBENCH_DIVERGENCE_HPP_

#include <span>

namespace clipbench {

// Per-sample divergence estimators between the current and the snapshot
// policy, written as functions of the likelihood ratio
// r = pi_new(a|s) / pi_old(a|s). Natural log throughout. All of them throw
// DomainError for r <= 0 or non-finite r.

// k1 = -log r. Signed; constraints built on it use |k1| <= delta.
double kl1(double ratio);

// k2 = (log r)^2 / 2.
double kl2(double ratio);

// k3 = r - 1 - log r. Non-negative, zero only at r = 1.
double kl3(double ratio);

// r * k3(r): k3 re-weighted towards an expectation under pi_new.
double kl3_is_weighted(double ratio);

// sum_a p(a) log(p(a)/q(a)) over a finite action set. Entries with p(a) = 0
// contribute nothing; q(a) = 0 with p(a) > 0 is a DomainError, as are
// mismatched sizes.
double full_kl(std::span<const double> p, std::span<const double> q);

}  // namespace clipbench

#endif  // CLIPBENCH_DIVERGENCE_HPP_
