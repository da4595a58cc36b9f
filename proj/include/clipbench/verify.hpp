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

#ifndef CLIPBENCH_VERIFY_HPP_
#define CLIPBENCH_VERIFY_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clipbench/policy.hpp"
#include "json.hpp"

namespace clipbench {

struct TheoremReport {
  std::string theorem;
  int trials = 0;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::optional<double> slope;
  bool pass = false;
  double tolerance = 0.0;
  // Suite-specific extras (oracle checks, per-side slopes, ...).
  nlohmann::json details = nlohmann::json::object();

  nlohmann::json to_json() const;
};

// Clip-only ratio objective against the general operator with the ratio
// band as criterion, on random single-state problems. Both gradients are
// also checked against central differences (step 1e-6, tolerance 1e-6).
TheoremReport verify_theorem1(int trials, std::uint64_t seed);

// Per delta: kl3(l) = kl3(u) = delta to 1e-10, 0 < l < 1 < u, 1 - l < u - 1,
// agreement with the bisection solver to 1e-9 and a 1000-point scan of
// kl3(r) <= delta against l <= r <= u.
TheoremReport verify_theorem2(const std::vector<double>& deltas);

// `count` log-uniform deltas in [1e-6, 5] plus a 10^5-point (r, delta) grid.
TheoremReport verify_theorem2_suite(int count, std::uint64_t seed);

enum class EventSide { kMinus, kPlus };

std::string to_string(EventSide side);

// Ratio band aligned with the KL3 range so exactly one side differs:
//   kMinus: 1 + eps = u, members have ratio in [1 - eps, l)
//   kPlus:  1 - eps = l, members have ratio in (1 + eps, u]
struct EventSpec {
  EventSide side = EventSide::kMinus;
  double epsilon = 0.0;
  double delta = 0.0;
  std::vector<bool> members;

  // epsilon derived from delta. ContractError when eps leaves (0, 1).
  static EventSpec aligned(EventSide side, double delta, std::vector<bool> members);

  // Member ratio band and the band shared by both rules.
  std::pair<double, double> member_band() const;
  std::pair<double, double> common_band() const;

  // ContractError when misaligned by more than 1e-9.
  void validate() const;
};

// One state with the event realised: pi_k(a) = rho_a pi_old(a), members in
// the member band and everyone else in the common band.
struct EventSetup {
  EventSpec spec;
  LogitTable old_logits;
  LogitTable logits;
  std::vector<double> advantages;
};

// Random old logits and ratio targets inside the bands, renormalised and
// re-checked. SetupError when no feasible draw is found.
EventSetup construct_event(const EventSpec& spec, std::vector<double> advantages, std::uint64_t seed);

struct Theorem3Check {
  std::vector<double> measured;
  std::vector<double> predicted;
  double max_abs_err = 0.0;
};

// One exact gradient step of size eta under RatioSymmetric(eps) and
// KL3(delta) from the same logits; compares theta_ATR - theta_ratio with
//   -/+ eta pi_k(a) [A 1_X(a) - E_{pi_k}[A 1_X]].
Theorem3Check check_theorem3(const EventSetup& setup, double eta);

// `trials` random events per side, vocab 3..16, tolerance 1e-10.
TheoremReport verify_theorem3(int trials, std::uint64_t seed, double delta = 0.07, double eta = 0.1);

// How the entropy difference is predicted.
enum class EntropyPrediction {
  // +/- eta Cov_{pi_k}(A 1_X, log pi_k).
  kCovariance,
  // The first-order expansion carried through with the pi_k(a) factor of the
  // logit difference: +/- eta Cov_{pi_k}(pi_k (A 1_X - E[A 1_X]), log pi_k).
  kWeightedCovariance,
};

struct Theorem4Check {
  std::vector<double> etas;
  std::vector<double> measured;
  std::vector<double> predicted;
  std::vector<double> errors;
  double slope = 0.0;
};

double entropy_prediction(const EventSetup& setup, double eta, EntropyPrediction kind);

// Measured H(theta_ATR) - H(theta_ratio) per eta (long double entropies)
// and the least-squares slope of log|error| against log eta. ContractError
// unless etas are strictly decreasing with at least three values.
Theorem4Check check_theorem4(const EventSetup& setup, const std::vector<double>& etas, EntropyPrediction kind);

// `trials` events per side; slope is the median per-trial slope and must lie
// in [1.8, 2.2] on both sides. Both predictions are reported; `kind` decides
// pass/fail.
TheoremReport verify_theorem4(int trials, std::uint64_t seed, std::vector<double> etas = {1e-2, 1e-3, 1e-4, 1e-5},
                              EntropyPrediction kind = EntropyPrediction::kCovariance, double delta = 0.07);

enum class TheoremSelection { kAll, kT1, kT2, kT3, kT4 };

TheoremSelection theorem_selection_from_string(const std::string& s);

// The default suites: T1 200 trials, T2 10^4 deltas, T3 100 and T4 50 trials
// per side.
std::vector<TheoremReport> run_verification(TheoremSelection which, std::uint64_t seed);

}  // namespace clipbench

#endif  // CLIPBENCH_VERIFY_HPP_
