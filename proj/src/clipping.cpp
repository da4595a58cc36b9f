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

#include "clipbench/clipping.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "clipbench/divergence.hpp"
#include "clipbench/errors.hpp"

namespace clipbench {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

bool unit_open(double eps) { return std::isfinite(eps) && eps > 0.0 && eps < 1.0; }
bool positive(double delta) { return std::isfinite(delta) && delta > 0.0; }

void validate(const ClipRule::Kind& kind) {
  std::visit(Overloaded{
                 [](const RatioSymmetric& k) { require(unit_open(k.epsilon), "epsilon must be in (0,1)"); },
                 [](const RatioAsymmetric& k) {
                   require(unit_open(k.epsilon_low) && unit_open(k.epsilon_high),
                           "epsilon_low and epsilon_high must be in (0,1)");
                 },
                 [](const DualClip& k) {
                   require(unit_open(k.epsilon), "epsilon must be in (0,1)");
                   require(std::isfinite(k.c) && k.c > 1.0 + k.epsilon, "dual clip requires c > 1 + epsilon");
                 },
                 [](const DynamicDCPO& k) {
                   require(unit_open(k.epsilon_low) && unit_open(k.epsilon_high),
                           "epsilon_low and epsilon_high must be in (0,1)");
                 },
                 [](const auto& k) { require(positive(k.delta), "delta must be positive"); },
             },
             kind);
}

void check_context(const ClipRule& rule, const ClipContext& ctx) {
  if (!std::isfinite(ctx.ratio) || ctx.ratio <= 0.0) throw DomainError("ratio must be finite and positive");
  if (!(ctx.old_prob > 0.0 && ctx.old_prob <= 1.0)) throw ContractError("old_prob must be in (0,1]");
  if (!std::isfinite(ctx.advantage)) throw ContractError("advantage must be finite");
  if (rule.needs_distributions()) {
    if (ctx.new_dist.empty() || ctx.old_dist.empty()) {
      throw ContractError("full_kl rule needs new and old action distributions");
    }
    if (ctx.new_dist.size() != ctx.old_dist.size()) throw ContractError("distribution sizes differ");
  }
}

double get_param(const nlohmann::json& params, const char* key) {
  if (!params.contains(key)) throw ConfigError(std::string("clip rule missing param '") + key + "'");
  const auto& v = params.at(key);
  if (!v.is_number()) throw ConfigError(std::string("clip rule param '") + key + "' must be a number");
  return v.get<double>();
}

void reject_unknown(const nlohmann::json& params, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : params.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown clip rule param '" + key + "'");
    }
  }
}

}  // namespace

ClipRule::ClipRule(Kind kind) : kind_(kind) { validate(kind_); }

std::string ClipRule::name() const {
  static constexpr const char* kNames[] = {"ratio_symmetric", "ratio_asymmetric", "dual_clip",
                                           "dcpo",            "full_kl",          "kl1",
                                           "kl2",             "kl3",              "kl3_is_weighted"};
  return kNames[kind_.index()];
}

std::string ClipRule::label() const {
  std::ostringstream os;
  os << name() << '(';
  std::visit(Overloaded{
                 [&](const RatioSymmetric& k) { os << "eps=" << k.epsilon; },
                 [&](const RatioAsymmetric& k) { os << "eps_l=" << k.epsilon_low << ",eps_u=" << k.epsilon_high; },
                 [&](const DualClip& k) { os << "eps=" << k.epsilon << ",c=" << k.c; },
                 [&](const DynamicDCPO& k) { os << "eps_l=" << k.epsilon_low << ",eps_u=" << k.epsilon_high; },
                 [&](const auto& k) { os << "delta=" << k.delta; },
             },
             kind_);
  os << ')';
  return os.str();
}

std::pair<double, double> ClipRule::ratio_band(double old_prob) const {
  return std::visit(
      Overloaded{
          [](const RatioSymmetric& k) { return std::pair{1.0 - k.epsilon, 1.0 + k.epsilon}; },
          [](const RatioAsymmetric& k) { return std::pair{1.0 - k.epsilon_low, 1.0 + k.epsilon_high}; },
          [](const DualClip& k) { return std::pair{1.0 - k.epsilon, 1.0 + k.epsilon}; },
          [&](const DynamicDCPO& k) {
            if (!(old_prob > 0.0 && old_prob <= 1.0)) throw ContractError("old_prob must be in (0,1]");
            const double lo = 0.5 + 0.5 * std::sqrt(std::max(1.0 - 4.0 * k.epsilon_low / old_prob, 0.0));
            const double hi = 0.5 + 0.5 * std::sqrt(1.0 + 4.0 * k.epsilon_high / old_prob);
            return std::pair{lo, hi};
          },
          [](const auto&) -> std::pair<double, double> {
            throw ContractError("ratio_band is only defined for ratio-family rules");
          },
      },
      kind_);
}

nlohmann::json ClipRule::to_json() const {
  nlohmann::json params = std::visit(
      Overloaded{
          [](const RatioSymmetric& k) { return nlohmann::json{{"epsilon", k.epsilon}}; },
          [](const RatioAsymmetric& k) {
            return nlohmann::json{{"epsilon_low", k.epsilon_low}, {"epsilon_high", k.epsilon_high}};
          },
          [](const DualClip& k) { return nlohmann::json{{"epsilon", k.epsilon}, {"c", k.c}}; },
          [](const DynamicDCPO& k) {
            return nlohmann::json{{"epsilon_low", k.epsilon_low}, {"epsilon_high", k.epsilon_high}};
          },
          [](const auto& k) { return nlohmann::json{{"delta", k.delta}}; },
      },
      kind_);
  return {{"kind", name()}, {"params", params}};
}

ClipRule ClipRule::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw ConfigError("clip rule must be an object with a string 'kind'");
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "kind" && key != "params") throw ConfigError("unknown clip rule key '" + key + "'");
  }
  const auto kind = j.at("kind").get<std::string>();
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  if (!params.is_object()) throw ConfigError("clip rule 'params' must be an object");
  try {
    if (kind == "ratio_symmetric") {
      reject_unknown(params, {"epsilon"});
      return ratio_symmetric(get_param(params, "epsilon"));
    }
    if (kind == "ratio_asymmetric" || kind == "dcpo") {
      reject_unknown(params, {"epsilon_low", "epsilon_high"});
      const double lo = get_param(params, "epsilon_low");
      const double hi = get_param(params, "epsilon_high");
      return kind == "dcpo" ? dcpo(lo, hi) : ratio_asymmetric(lo, hi);
    }
    if (kind == "dual_clip") {
      reject_unknown(params, {"epsilon", "c"});
      const double c = params.contains("c") ? get_param(params, "c") : 3.0;
      return dual_clip(get_param(params, "epsilon"), c);
    }
    reject_unknown(params, {"delta"});
    if (kind == "full_kl") return full_kl(get_param(params, "delta"));
    if (kind == "kl1") return kl1(get_param(params, "delta"));
    if (kind == "kl2") return kl2(get_param(params, "delta"));
    if (kind == "kl3") return kl3(get_param(params, "delta"));
    if (kind == "kl3_is_weighted") return kl3_is_weighted(get_param(params, "delta"));
  } catch (const ContractError& e) {
    throw ConfigError(std::string("invalid clip rule: ") + e.what());
  }
  throw ConfigError("unknown clip rule kind '" + kind + "'");
}

bool operator==(const ClipRule& a, const ClipRule& b) { return a.to_json() == b.to_json(); }

std::string to_string(SurrogateForm form) {
  switch (form) {
    case SurrogateForm::kMinClipped:
      return "min_clipped";
    case SurrogateForm::kClipOnly:
      return "clip_only";
    case SurrogateForm::kGeneral:
      return "general";
  }
  return "min_clipped";
}

SurrogateForm surrogate_form_from_string(const std::string& s) {
  if (s == "min_clipped") return SurrogateForm::kMinClipped;
  if (s == "clip_only") return SurrogateForm::kClipOnly;
  if (s == "general") return SurrogateForm::kGeneral;
  throw ConfigError("unknown surrogate form '" + s + "'");
}

bool constraint_satisfied(const ClipRule& rule, const ClipContext& ctx) {
  check_context(rule, ctx);
  const double r = ctx.ratio;
  return std::visit(Overloaded{
                        [&](const FullKL& k) { return full_kl(ctx.new_dist, ctx.old_dist) <= k.delta; },
                        [&](const KL1& k) { return std::abs(kl1(r)) <= k.delta; },
                        [&](const KL2& k) { return kl2(r) <= k.delta; },
                        [&](const KL3& k) { return kl3(r) <= k.delta; },
                        [&](const KL3IsWeighted& k) { return kl3_is_weighted(r) <= k.delta; },
                        [&](const auto&) {
                          const auto [lo, hi] = rule.ratio_band(ctx.old_prob);
                          return lo <= r && r <= hi;
                        },
                    },
                    rule.kind());
}

ClipDecision clip_general(const ClipRule& rule, const ClipContext& ctx, double old_ratio) {
  if (constraint_satisfied(rule, ctx)) return {true, ctx.ratio, true};
  return {false, old_ratio, false};
}

double clip_ratio(double ratio, double lower, double upper) {
  if (!(lower > 0.0) || lower > upper) throw ContractError("clip_ratio requires 0 < lower <= upper");
  if (ratio < lower) return lower;
  if (ratio > upper) return upper;
  return ratio;
}

SurrogateValue evaluate_surrogate(const ClipRule& rule, const ClipContext& ctx, SurrogateForm form) {
  const double r = ctx.ratio;
  const double adv = ctx.advantage;
  if (!rule.is_ratio_family() || form == SurrogateForm::kGeneral) {
    const auto d = clip_general(rule, ctx);
    if (d.gradient_gate) return {r * adv, adv, false};
    return {d.effective_ratio * adv, 0.0, true};
  }

  check_context(rule, ctx);
  const auto [lo, hi] = rule.ratio_band(ctx.old_prob);
  const double clipped_ratio = clip_ratio(r, lo, hi);
  const bool in_band = clipped_ratio == r;
  SurrogateValue out;
  if (form == SurrogateForm::kClipOnly) {
    out = {clipped_ratio * adv, in_band ? adv : 0.0, !in_band};
  } else {
    const double unclipped = r * adv;
    const double clipped = clipped_ratio * adv;
    if (unclipped <= clipped) {
      out = {unclipped, adv, false};
    } else {
      out = {clipped, 0.0, true};
    }
  }
  if (const auto* dual = std::get_if<DualClip>(&rule.kind()); dual && adv < 0.0) {
    const double floor = dual->c * adv;
    if (out.value < floor) out = {floor, 0.0, true};
  }
  return out;
}

}  // namespace clipbench
