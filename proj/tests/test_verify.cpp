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

#include <cmath>

#include "clipbench/errors.hpp"
#include "clipbench/ranges.hpp"
#include "clipbench/verify.hpp"
#include "doctest.h"

using namespace clipbench;

TEST_CASE("gradient operators agree on random problems") {
  const auto r = verify_theorem1(40, 11);
  CHECK(r.pass);
  CHECK(r.trials == 40);
  CHECK(r.max_abs_err <= r.tolerance);
}

TEST_CASE("range suite passes and reports the anchor") {
  const auto r = verify_theorem2({1e-6, 1e-3, 0.07, 0.5, 2.0});
  CHECK(r.pass);
  CHECK(r.max_abs_err <= 1e-10);
  const auto s = verify_theorem2_suite(200, 5);
  CHECK(s.pass);
  CHECK(s.details.contains("anchor"));
}

TEST_CASE("event spec alignment") {
  const auto range = solve_kl3_range(0.07);
  const auto m = EventSpec::aligned(EventSide::kMinus, 0.07, {true, false, false});
  CHECK(std::abs(m.epsilon - (range.upper - 1.0)) < 1e-15);
  CHECK(m.member_band().second == doctest::Approx(range.lower).epsilon(1e-14));
  const auto p = EventSpec::aligned(EventSide::kPlus, 0.07, {true, false, false});
  CHECK(std::abs(p.epsilon - (1.0 - range.lower)) < 1e-15);
  CHECK(p.member_band().second == doctest::Approx(range.upper).epsilon(1e-14));
  auto bad = m;
  bad.epsilon += 1e-6;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  CHECK_THROWS_AS(EventSpec::aligned(EventSide::kMinus, 0.07, {}), ContractError);
}

TEST_CASE("event construction realises the bands") {
  for (auto side : {EventSide::kMinus, EventSide::kPlus}) {
    const auto spec = EventSpec::aligned(side, 0.07, {true, false, true, false, false});
    const auto s = construct_event(spec, {1.0, -0.5, 0.3, 0.2, -1.0}, 17);
    const auto po = action_dist(s.old_logits, 0);
    const auto pk = action_dist(s.logits, 0);
    for (std::size_t a = 0; a < po.size(); ++a) {
      const auto band = spec.members[a] ? spec.member_band() : spec.common_band();
      const double r = pk[a] / po[a];
      CHECK(r > band.first);
      CHECK(r < band.second);
    }
    // Same seed, same draw.
    CHECK(construct_event(spec, s.advantages, 17).logits == s.logits);
  }
  const auto all = EventSpec::aligned(EventSide::kMinus, 0.07, {true, true, true});
  CHECK_THROWS_AS(construct_event(all, {1.0, 0.0, -1.0}, 1), SetupError);
}

TEST_CASE("empty event: both rules take the same step") {
  const auto spec = EventSpec::aligned(EventSide::kPlus, 0.07, {false, false, false, false});
  const auto s = construct_event(spec, {0.5, -0.2, 0.9, -1.2}, 3);
  const auto c = check_theorem3(s, 0.1);
  for (double v : c.measured) CHECK(std::abs(v) <= 1e-15);
  CHECK(c.max_abs_err <= 1e-15);
}

TEST_CASE("logit difference sign follows advantage on the event") {
  // One member with positive advantage: the ATR step drops it on the minus
  // side (lowering theta_a) and keeps it on the plus side.
  for (auto side : {EventSide::kMinus, EventSide::kPlus}) {
    const auto spec = EventSpec::aligned(side, 0.07, {true, false, false, false});
    const auto s = construct_event(spec, {1.0, 0.0, 0.0, 0.0}, 8);
    const auto c = check_theorem3(s, 0.1);
    CHECK(c.max_abs_err <= 1e-10);
    if (side == EventSide::kMinus) {
      CHECK(c.measured[0] < 0.0);
    } else {
      CHECK(c.measured[0] > 0.0);
    }
  }
}

TEST_CASE("logit difference suite") {
  const auto r = verify_theorem3(20, 21);
  CHECK(r.pass);
  CHECK(r.max_abs_err <= 1e-10);
}

TEST_CASE("entropy difference: weighted prediction has a quadratic residual") {
  const auto spec = EventSpec::aligned(EventSide::kMinus, 0.07, {true, false, true, false, false, false});
  const auto s = construct_event(spec, {1.0, -0.5, -0.7, 0.4, 0.2, -0.4}, 4);
  const std::vector<double> etas{1e-2, 1e-3, 1e-4};
  const auto w = check_theorem4(s, etas, EntropyPrediction::kWeightedCovariance);
  CHECK(w.slope > 1.8);
  CHECK(w.slope < 2.2);
  CHECK_THROWS_AS(check_theorem4(s, {1e-2, 1e-3}, EntropyPrediction::kCovariance), ContractError);
  CHECK_THROWS_AS(check_theorem4(s, {1e-3, 1e-2, 1e-4}, EntropyPrediction::kCovariance), ContractError);
}

TEST_CASE("entropy suite is deterministic and reports both predictions") {
  const auto a = verify_theorem4(6, 99);
  const auto b = verify_theorem4(6, 99);
  CHECK(a.to_json() == b.to_json());
  REQUIRE(a.slope.has_value());
  CHECK(a.details.at("X_minus").contains("alternative_median_slope"));
  CHECK(a.details.at("X_plus").contains("alternative_median_slope"));
}

TEST_CASE("selection parsing") {
  CHECK(theorem_selection_from_string("all") == TheoremSelection::kAll);
  CHECK(theorem_selection_from_string("t3") == TheoremSelection::kT3);
  CHECK_THROWS_AS(theorem_selection_from_string("t5"), ConfigError);
}
