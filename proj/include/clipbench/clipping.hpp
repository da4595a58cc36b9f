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

#ifndef CLIPBENCH_CLIPPING_HPP_
#define CLIPBENCH_CLIPPING_HPP_

#include <span>
#include <string>
#include <utility>
#include <variant>

#include "json.hpp"

namespace clipbench {

// Ratio-family criteria: the ratio must sit in a band around 1.
struct RatioSymmetric {
  double epsilon;
};
struct RatioAsymmetric {
  double epsilon_low;
  double epsilon_high;
};
// Symmetric band plus a floor c * A on the objective when A < 0.
struct DualClip {
  double epsilon;
  double c = 3.0;
};
// Probability-dependent band:
//   [1/2 + sqrt(max(1 - 4 eps_l / pi_old, 0)) / 2, 1/2 + sqrt(1 + 4 eps_u / pi_old) / 2].
struct DynamicDCPO {
  double epsilon_low;
  double epsilon_high;
};

// Constraint-family criteria: a divergence must stay below delta.
struct FullKL {
  double delta;
};
struct KL1 {
  double delta;
};
struct KL2 {
  double delta;
};
struct KL3 {
  double delta;
};
struct KL3IsWeighted {
  double delta;
};

// One constraint criterion with validated thresholds. Immutable.
class ClipRule {
 public:
  using Kind = std::variant<RatioSymmetric, RatioAsymmetric, DualClip, DynamicDCPO, FullKL, KL1,
                            KL2, KL3, KL3IsWeighted>;

  // Throws ContractError when thresholds violate eps in (0,1), delta > 0,
  // c > 1 + eps.
  explicit ClipRule(Kind kind);

  static ClipRule ratio_symmetric(double epsilon) { return ClipRule(RatioSymmetric{epsilon}); }
  static ClipRule ratio_asymmetric(double lo, double hi) { return ClipRule(RatioAsymmetric{lo, hi}); }
  static ClipRule dual_clip(double epsilon, double c = 3.0) { return ClipRule(DualClip{epsilon, c}); }
  static ClipRule dcpo(double lo, double hi) { return ClipRule(DynamicDCPO{lo, hi}); }
  static ClipRule full_kl(double delta) { return ClipRule(FullKL{delta}); }
  static ClipRule kl1(double delta) { return ClipRule(KL1{delta}); }
  static ClipRule kl2(double delta) { return ClipRule(KL2{delta}); }
  static ClipRule kl3(double delta) { return ClipRule(KL3{delta}); }
  static ClipRule kl3_is_weighted(double delta) { return ClipRule(KL3IsWeighted{delta}); }

  const Kind& kind() const noexcept { return kind_; }

  // Wire name: ratio_symmetric, ratio_asymmetric, dual_clip, dcpo, full_kl,
  // kl1, kl2, kl3, kl3_is_weighted.
  std::string name() const;

  // Human-readable label including thresholds, e.g. "kl3(delta=0.07)".
  std::string label() const;

  bool is_ratio_family() const noexcept { return kind_.index() <= 3; }
  bool needs_distributions() const noexcept { return std::holds_alternative<FullKL>(kind_); }

  // The admissible ratio band of a ratio-family rule at this old probability.
  // ContractError for constraint-family rules.
  std::pair<double, double> ratio_band(double old_prob = 1.0) const;

  nlohmann::json to_json() const;
  // {"kind": name, "params": {...}}; unknown kinds or params are ConfigError.
  static ClipRule from_json(const nlohmann::json& j);

  friend bool operator==(const ClipRule& a, const ClipRule& b);

 private:
  Kind kind_;
};

struct ClipContext {
  double ratio = 1.0;
  double old_prob = 1.0;
  double advantage = 0.0;
  // Full action distributions at the state; only FullKL reads them.
  std::span<const double> new_dist{};
  std::span<const double> old_dist{};
};

struct ClipDecision {
  bool constraint_ok = true;
  double effective_ratio = 1.0;
  bool gradient_gate = true;
};

// How a rule turns into a per-token objective.
enum class SurrogateForm {
  // PPO/GRPO pessimistic form min(r A, clip(r) A) for ratio rules.
  kMinClipped,
  // clip(r) A without the min.
  kClipOnly,
  // The general operator: r A when the rule's criterion holds, else r_old A
  // with no gradient path. Ratio rules use their band as the criterion.
  kGeneral,
};

std::string to_string(SurrogateForm form);
SurrogateForm surrogate_form_from_string(const std::string& s);

struct SurrogateValue {
  double value = 0.0;
  // d value / d ratio with every clip decision held fixed.
  double ratio_grad = 0.0;
  // The rule removed this term's gradient path (violated or clipped).
  bool clipped = false;
};

bool constraint_satisfied(const ClipRule& rule, const ClipContext& ctx);

ClipDecision clip_general(const ClipRule& rule, const ClipContext& ctx, double old_ratio = 1.0);

// Eq.-style three-way clamp. ContractError when lower > upper or lower <= 0.
double clip_ratio(double ratio, double lower, double upper);

SurrogateValue evaluate_surrogate(const ClipRule& rule, const ClipContext& ctx,
                                  SurrogateForm form = SurrogateForm::kMinClipped);

inline double surrogate_term(const ClipRule& rule, const ClipContext& ctx) {
  return evaluate_surrogate(rule, ctx).value;
}

}  // namespace clipbench

#endif  // CLIPBENCH_CLIPPING_HPP_
