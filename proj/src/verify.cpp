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

#include "clipbench/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clipbench/clipping.hpp"
#include "clipbench/divergence.hpp"
#include "clipbench/errors.hpp"
#include "clipbench/ranges.hpp"
#include "clipbench/rng.hpp"
#include "error_slot.hpp"

namespace clipbench {
namespace {

constexpr double kFdStep = 1e-6;
constexpr double kFdTolerance = 1e-6;
constexpr double kT1Tolerance = 1e-8;
constexpr double kT2Residual = 1e-10;
constexpr double kT2Agreement = 1e-9;
constexpr double kT2Band = 1e-12;
constexpr double kT3Tolerance = 1e-10;
constexpr double kSlopeLo = 1.8;
constexpr double kSlopeHi = 2.2;
constexpr int kMaxAttempts = 1000;

const StateVisitation kSingleState{{1.0}};

LogitTable row_table(std::span<const double> v) {
  LogitTable t(1, static_cast<int>(v.size()));
  std::copy(v.begin(), v.end(), t.row(0).begin());
  return t;
}

std::vector<double> probs(const LogitTable& t) { return action_dist(t, 0); }

// Runs body(i) for i in [0, n) on the OpenMP team; results land by index.
template <class F>
void parallel_trials(int n, F&& body) {
  ErrorSlot errors;
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) errors.run([&] { body(i); });
  errors.rethrow();
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

long double entropy_ld(const LogitTable& t) {
  const auto row = t.row(0);
  long double m = row[0];
  for (double v : row) m = std::max<long double>(m, v);
  long double z = 0.0L;
  for (double v : row) z += std::exp(static_cast<long double>(v) - m);
  const long double log_z = std::log(z);
  long double h = 0.0L;
  for (double v : row) {
    const long double lp = static_cast<long double>(v) - m - log_z;
    h -= std::exp(lp) * lp;
  }
  return h;
}

double fit_slope(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

// Gradients of the two objectives compared by the logit and entropy theorems.
struct StepGradients {
  LogitTable ratio;
  LogitTable atr;
};

StepGradients event_gradients(const EventSetup& setup) {
  const auto adv = row_table(setup.advantages);
  return {exact_surrogate_gradient(setup.logits, setup.old_logits, ClipRule::ratio_symmetric(setup.spec.epsilon),
                                   adv, kSingleState, SurrogateForm::kClipOnly),
          exact_surrogate_gradient(setup.logits, setup.old_logits, ClipRule::kl3(setup.spec.delta), adv,
                                   kSingleState, SurrogateForm::kGeneral)};
}

double event_sign(EventSide side) { return side == EventSide::kMinus ? -1.0 : 1.0; }

EventSpec random_event(EventSide side, double delta, Rng& rng) {
  const int n = rng.uniform_int(3, 16);
  std::vector<bool> members(n);
  for (;;) {
    int count = 0;
    for (int a = 0; a < n; ++a) count += (members[a] = rng.uniform() < 0.4) ? 1 : 0;
    if (count >= 1 && count < n) break;
  }
  return EventSpec::aligned(side, delta, std::move(members));
}

std::vector<double> random_advantages(std::size_t n, Rng& rng) {
  std::vector<double> a(n);
  for (double& v : a) v = rng.normal();
  return a;
}

struct DeltaCheck {
  double residual = 0.0;
  double agreement = 0.0;
  bool ordered = true;
  bool asymmetric = true;
  int equivalence_violations = 0;
  int scanned = 0;
};

DeltaCheck check_delta(double delta) {
  DeltaCheck c;
  const auto range = solve_kl3_range(delta);
  const auto oracle = solve_kl3_range_oracle(delta);
  c.residual = std::max(std::abs(kl3(range.lower) - delta), std::abs(kl3(range.upper) - delta));
  c.agreement = std::max(std::abs(range.lower - oracle.lower), std::abs(range.upper - oracle.upper));
  c.ordered = 0.0 < range.lower && range.lower < 1.0 && 1.0 < range.upper;
  c.asymmetric = (1.0 - range.lower) < (range.upper - 1.0);
  const double lo = 0.5 * range.lower;
  const double hi = range.upper + 0.5 * (range.upper - range.lower);
  constexpr int kScan = 1000;
  for (int i = 0; i < kScan; ++i) {
    const double r = lo + (hi - lo) * (i + 0.5) / kScan;
    if (std::abs(r - range.lower) <= kT2Band || std::abs(r - range.upper) <= kT2Band) continue;
    ++c.scanned;
    if ((kl3(r) <= delta) != range.contains(r)) ++c.equivalence_violations;
  }
  return c;
}

}  // namespace

nlohmann::json TheoremReport::to_json() const {
  nlohmann::json j{{"theorem", theorem}, {"trials", trials},   {"max_abs_err", max_abs_err},
                   {"max_rel_err", max_rel_err}, {"pass", pass}, {"tolerance", tolerance}};
  if (slope) j["slope"] = *slope;
  j["details"] = details;
  return j;
}

// ------------------------------------------------------------- theorem 1

TheoremReport verify_theorem1(int trials, std::uint64_t seed) {
  if (trials < 1) throw ContractError("verify_theorem1: trials must be positive");
  struct Trial {
    double abs_err = 0.0;
    double rel_err = 0.0;
    double fd_err = 0.0;
    int resampled = 0;
  };
  std::vector<Trial> out(trials);
  parallel_trials(trials, [&](int t) {
    Rng rng(derive_seed({seed, 1, static_cast<std::uint64_t>(t)}));
    Trial& r = out[t];
    for (;;) {
      const int n = rng.uniform_int(3, 16);
      const double eps = rng.uniform(0.1, 0.3);
      std::vector<double> old(n), cur(n);
      for (int a = 0; a < n; ++a) {
        old[a] = rng.normal();
        cur[a] = old[a] + 0.3 * rng.normal();
      }
      const auto adv_v = random_advantages(n, rng);
      const auto old_t = row_table(old);
      auto cur_t = row_table(cur);
      const auto p_old = probs(old_t);
      const auto p_cur = probs(cur_t);
      bool near_edge = false;
      for (int a = 0; a < n; ++a) {
        const double ratio = p_cur[a] / p_old[a];
        near_edge |= std::abs(ratio - (1.0 - eps)) < 1e-3 || std::abs(ratio - (1.0 + eps)) < 1e-3;
      }
      if (near_edge) {
        ++r.resampled;
        continue;
      }
      const auto rule = ClipRule::ratio_symmetric(eps);
      const auto adv = row_table(adv_v);
      const auto g_ratio = exact_surrogate_gradient(cur_t, old_t, rule, adv, kSingleState, SurrogateForm::kClipOnly);
      const auto g_gen = exact_surrogate_gradient(cur_t, old_t, rule, adv, kSingleState, SurrogateForm::kGeneral);
      for (int a = 0; a < n; ++a) {
        const double x = g_ratio.at(0, a);
        const double y = g_gen.at(0, a);
        const double diff = std::abs(x - y);
        const double scale = std::max(std::abs(x), std::abs(y));
        r.abs_err = std::max(r.abs_err, diff);
        if (scale > 0.0) r.rel_err = std::max(r.rel_err, diff / scale);
      }
      for (int a = 0; a < n; ++a) {
        for (auto form : {SurrogateForm::kClipOnly, SurrogateForm::kGeneral}) {
          const double base = cur_t.at(0, a);
          cur_t.at(0, a) = base + kFdStep;
          const double fp = exact_surrogate_objective(cur_t, old_t, rule, adv, kSingleState, form);
          cur_t.at(0, a) = base - kFdStep;
          const double fm = exact_surrogate_objective(cur_t, old_t, rule, adv, kSingleState, form);
          cur_t.at(0, a) = base;
          const double fd = (fp - fm) / (2.0 * kFdStep);
          const double g = form == SurrogateForm::kClipOnly ? g_ratio.at(0, a) : g_gen.at(0, a);
          r.fd_err = std::max(r.fd_err, std::abs(g - fd));
        }
      }
      return;
    }
  });

  TheoremReport rep;
  rep.theorem = "t1";
  rep.trials = trials;
  rep.tolerance = kT1Tolerance;
  double fd_err = 0.0;
  int resampled = 0;
  for (const auto& r : out) {
    rep.max_abs_err = std::max(rep.max_abs_err, r.abs_err);
    rep.max_rel_err = std::max(rep.max_rel_err, r.rel_err);
    fd_err = std::max(fd_err, r.fd_err);
    resampled += r.resampled;
  }
  rep.pass = rep.max_rel_err <= kT1Tolerance && fd_err <= kFdTolerance;
  rep.details = {{"finite_difference_max_abs_err", fd_err},
                 {"finite_difference_tolerance", kFdTolerance},
                 {"finite_difference_step", kFdStep},
                 {"resampled", resampled}};
  return rep;
}

// ------------------------------------------------------------- theorem 2

TheoremReport verify_theorem2(const std::vector<double>& deltas) {
  if (deltas.empty()) throw ContractError("verify_theorem2: no deltas");
  std::vector<DeltaCheck> checks(deltas.size());
  parallel_trials(static_cast<int>(deltas.size()), [&](int i) { checks[i] = check_delta(deltas[i]); });

  TheoremReport rep;
  rep.theorem = "t2";
  rep.trials = static_cast<int>(deltas.size());
  rep.tolerance = kT2Agreement;
  double residual = 0.0;
  int unordered = 0, symmetric = 0, violations = 0;
  long scanned = 0;
  for (const auto& c : checks) {
    rep.max_abs_err = std::max(rep.max_abs_err, c.agreement);
    residual = std::max(residual, c.residual);
    unordered += c.ordered ? 0 : 1;
    symmetric += c.asymmetric ? 0 : 1;
    violations += c.equivalence_violations;
    scanned += c.scanned;
  }
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    rep.max_rel_err = std::max(rep.max_rel_err, checks[i].residual / deltas[i]);
  }
  rep.pass = rep.max_abs_err <= kT2Agreement && residual <= kT2Residual && unordered == 0 && symmetric == 0 &&
             violations == 0;
  rep.details = {{"max_residual", residual},
                 {"residual_tolerance", kT2Residual},
                 {"order_violations", unordered},
                 {"asymmetry_violations", symmetric},
                 {"equivalence_points", scanned},
                 {"equivalence_violations", violations},
                 {"boundary_band", kT2Band}};
  return rep;
}

TheoremReport verify_theorem2_suite(int count, std::uint64_t seed) {
  if (count < 1) throw ContractError("verify_theorem2_suite: count must be positive");
  Rng rng(derive_seed({seed, 2}));
  std::vector<double> deltas;
  deltas.reserve(count + 100);
  for (int i = 0; i < count; ++i) deltas.push_back(rng.log_uniform(1e-6, 5.0));
  // Log-spaced grid: with the 1000-point scan per delta this is the
  // 10^5-point (r, delta) equivalence grid.
  for (int i = 0; i < 100; ++i) deltas.push_back(1e-6 * std::pow(5e6, i / 99.0));
  auto rep = verify_theorem2(deltas);
  const auto anchor = solve_kl3_range(0.07);
  rep.details["anchor"] = {{"delta", 0.07}, {"lower", anchor.lower}, {"upper", anchor.upper}};
  return rep;
}

// ------------------------------------------------------------ events

std::string to_string(EventSide side) { return side == EventSide::kMinus ? "X_minus" : "X_plus"; }

EventSpec EventSpec::aligned(EventSide side, double delta, std::vector<bool> members) {
  const auto range = solve_kl3_range(delta);
  EventSpec spec;
  spec.side = side;
  spec.delta = delta;
  spec.epsilon = side == EventSide::kMinus ? range.upper - 1.0 : 1.0 - range.lower;
  spec.members = std::move(members);
  if (spec.members.empty()) throw ContractError("EventSpec: empty action set");
  if (!(spec.epsilon > 0.0 && spec.epsilon < 1.0)) {
    throw ContractError("EventSpec: epsilon " + std::to_string(spec.epsilon) + " outside (0, 1) for delta " +
                        std::to_string(delta));
  }
  return spec;
}

std::pair<double, double> EventSpec::member_band() const {
  const auto range = solve_kl3_range(delta);
  return side == EventSide::kMinus ? std::pair{1.0 - epsilon, range.lower} : std::pair{1.0 + epsilon, range.upper};
}

std::pair<double, double> EventSpec::common_band() const {
  const auto range = solve_kl3_range(delta);
  // Both rules admit [l, 1 + eps] on either side: on the minus side 1 + eps = u,
  // on the plus side 1 - eps = l.
  return {range.lower, 1.0 + epsilon};
}

void EventSpec::validate() const {
  if (members.empty()) throw ContractError("EventSpec: empty action set");
  const auto range = solve_kl3_range(delta);
  const double gap = side == EventSide::kMinus ? std::abs(1.0 + epsilon - range.upper)
                                               : std::abs(1.0 - epsilon - range.lower);
  if (gap > 1e-9) throw ContractError("EventSpec: ratio band not aligned with the KL3 range");
}

EventSetup construct_event(const EventSpec& spec, std::vector<double> advantages, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = spec.members.size();
  if (advantages.size() != n) throw ContractError("construct_event: one advantage per action required");
  const auto member = spec.member_band();
  const auto common = spec.common_band();
  const bool any_non_member = std::count(spec.members.begin(), spec.members.end(), false) > 0;
  if (!any_non_member) {
    throw SetupError("construct_event: every action is a member, so the ratios cannot average to 1 (" +
                     to_string(spec.side) + ", delta " + std::to_string(spec.delta) + ")");
  }
  auto interior = [](std::pair<double, double> band, double t) {
    return band.first + (band.second - band.first) * (0.02 + 0.96 * t);
  };
  auto strictly_inside = [](std::pair<double, double> band, double r) {
    return band.first + 1e-9 < r && r < band.second - 1e-9;
  };

  Rng rng(seed);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<double> old(n);
    for (double& v : old) v = rng.normal();
    const auto old_t = row_table(old);
    const auto p_old = probs(old_t);
    std::vector<double> rho(n);
    double member_mass = 0.0;
    double target_mass = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (spec.members[a]) {
        rho[a] = interior(member, rng.uniform());
        member_mass += rho[a] * p_old[a];
      } else {
        rho[a] = interior(common, rng.uniform());
        target_mass += rho[a] * p_old[a];
      }
    }
    const double needed = 1.0 - member_mass;
    if (!(needed > 0.0)) continue;
    bool ok = true;
    for (std::size_t a = 0; a < n; ++a) {
      if (spec.members[a]) continue;
      rho[a] *= needed / target_mass;
      ok &= strictly_inside(common, rho[a]);
    }
    if (!ok) continue;

    std::vector<double> cur(n);
    for (std::size_t a = 0; a < n; ++a) cur[a] = old[a] + std::log(rho[a]);
    auto cur_t = row_table(cur);
    const auto p_cur = probs(cur_t);
    for (std::size_t a = 0; a < n && ok; ++a) {
      const double r = p_cur[a] / p_old[a];
      ok = std::abs(r - rho[a]) <= 1e-9 && strictly_inside(spec.members[a] ? member : common, r);
    }
    if (!ok) continue;
    return {spec, old_t, std::move(cur_t), std::move(advantages)};
  }
  nlohmann::json diag{{"side", to_string(spec.side)},
                      {"epsilon", spec.epsilon},
                      {"delta", spec.delta},
                      {"members", spec.members},
                      {"attempts", kMaxAttempts}};
  throw SetupError("construct_event: no feasible band assignment found: " + diag.dump());
}

// ------------------------------------------------------------- theorem 3

Theorem3Check check_theorem3(const EventSetup& setup, double eta) {
  if (!(eta > 0.0)) throw ContractError("check_theorem3: eta must be positive");
  const auto grads = event_gradients(setup);
  const std::size_t n = setup.spec.members.size();
  const auto p = probs(setup.logits);
  double mean = 0.0;
  for (std::size_t a = 0; a < n; ++a) mean += setup.spec.members[a] ? p[a] * setup.advantages[a] : 0.0;

  Theorem3Check c;
  const double sign = event_sign(setup.spec.side);
  for (std::size_t a = 0; a < n; ++a) {
    const double theta = setup.logits.at(0, static_cast<int>(a));
    const double atr = theta + eta * grads.atr.at(0, static_cast<int>(a));
    const double ratio = theta + eta * grads.ratio.at(0, static_cast<int>(a));
    const double f = setup.spec.members[a] ? setup.advantages[a] : 0.0;
    c.measured.push_back(atr - ratio);
    c.predicted.push_back(sign * eta * p[a] * (f - mean));
    c.max_abs_err = std::max(c.max_abs_err, std::abs(c.measured.back() - c.predicted.back()));
  }
  return c;
}

TheoremReport verify_theorem3(int trials, std::uint64_t seed, double delta, double eta) {
  if (trials < 1) throw ContractError("verify_theorem3: trials must be positive");
  TheoremReport rep;
  rep.theorem = "t3";
  rep.trials = trials;
  rep.tolerance = kT3Tolerance;
  rep.details = {{"eta", eta}, {"delta", delta}};
  for (auto side : {EventSide::kMinus, EventSide::kPlus}) {
    std::vector<double> err(trials), rel(trials);
    parallel_trials(trials, [&](int t) {
      Rng rng(derive_seed({seed, 3, static_cast<std::uint64_t>(side), static_cast<std::uint64_t>(t)}));
      auto spec = random_event(side, delta, rng);
      auto adv = random_advantages(spec.members.size(), rng);
      const auto setup = construct_event(spec, std::move(adv), rng.next());
      const auto c = check_theorem3(setup, eta);
      err[t] = c.max_abs_err;
      double scale = 0.0;
      for (double v : c.predicted) scale = std::max(scale, std::abs(v));
      rel[t] = scale > 0.0 ? c.max_abs_err / scale : 0.0;
    });
    const double side_err = *std::max_element(err.begin(), err.end());
    rep.max_abs_err = std::max(rep.max_abs_err, side_err);
    rep.max_rel_err = std::max(rep.max_rel_err, *std::max_element(rel.begin(), rel.end()));
    rep.details[to_string(side)] = {{"max_abs_err", side_err}};
  }
  rep.pass = rep.max_abs_err <= kT3Tolerance;
  return rep;
}

// ------------------------------------------------------------- theorem 4

double entropy_prediction(const EventSetup& setup, double eta, EntropyPrediction kind) {
  const auto p = probs(setup.logits);
  const std::size_t n = p.size();
  std::vector<double> f(n), logp(n);
  double mean_f = 0.0, mean_log = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    f[a] = setup.spec.members[a] ? setup.advantages[a] : 0.0;
    logp[a] = std::log(p[a]);
    mean_f += p[a] * f[a];
    mean_log += p[a] * logp[a];
  }
  if (kind == EntropyPrediction::kWeightedCovariance) {
    for (std::size_t a = 0; a < n; ++a) f[a] = p[a] * (f[a] - mean_f);
    mean_f = 0.0;
    for (std::size_t a = 0; a < n; ++a) mean_f += p[a] * f[a];
  }
  double cov = 0.0;
  for (std::size_t a = 0; a < n; ++a) cov += p[a] * (f[a] - mean_f) * (logp[a] - mean_log);
  return -event_sign(setup.spec.side) * eta * cov;
}

Theorem4Check check_theorem4(const EventSetup& setup, const std::vector<double>& etas, EntropyPrediction kind) {
  if (etas.size() < 3) throw ContractError("check_theorem4: need at least three step sizes");
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!(etas[i] > 0.0) || (i > 0 && !(etas[i] < etas[i - 1]))) {
      throw ContractError("check_theorem4: step sizes must be positive and strictly decreasing");
    }
  }
  const auto grads = event_gradients(setup);
  Theorem4Check c;
  c.etas = etas;
  std::vector<double> xs, ys;
  for (double eta : etas) {
    LogitTable atr = setup.logits;
    LogitTable ratio = setup.logits;
    for (int a = 0; a < atr.num_actions(); ++a) {
      atr.at(0, a) += eta * grads.atr.at(0, a);
      ratio.at(0, a) += eta * grads.ratio.at(0, a);
    }
    const double measured = static_cast<double>(entropy_ld(atr) - entropy_ld(ratio));
    const double predicted = entropy_prediction(setup, eta, kind);
    c.measured.push_back(measured);
    c.predicted.push_back(predicted);
    c.errors.push_back(std::abs(measured - predicted));
    xs.push_back(std::log(eta));
    ys.push_back(std::log(std::max(c.errors.back(), std::numeric_limits<double>::min())));
  }
  c.slope = fit_slope(xs, ys);
  return c;
}

TheoremReport verify_theorem4(int trials, std::uint64_t seed, std::vector<double> etas, EntropyPrediction kind,
                              double delta) {
  if (trials < 1) throw ContractError("verify_theorem4: trials must be positive");
  TheoremReport rep;
  rep.theorem = "t4";
  rep.trials = trials;
  rep.tolerance = 0.2;
  rep.details = {{"etas", etas},
                 {"delta", delta},
                 {"slope_range", {kSlopeLo, kSlopeHi}},
                 {"prediction", kind == EntropyPrediction::kCovariance ? "covariance" : "weighted_covariance"}};
  bool pass = true;
  std::vector<double> all_slopes;
  for (auto side : {EventSide::kMinus, EventSide::kPlus}) {
    std::vector<double> slope(trials), alt_slope(trials), err(trials), rel(trials);
    std::vector<int> resampled(trials, 0);
    const auto alt = kind == EntropyPrediction::kCovariance ? EntropyPrediction::kWeightedCovariance
                                                             : EntropyPrediction::kCovariance;
    parallel_trials(trials, [&](int t) {
      Rng rng(derive_seed({seed, 4, static_cast<std::uint64_t>(side), static_cast<std::uint64_t>(t)}));
      for (;;) {
        auto spec = random_event(side, delta, rng);
        auto adv = random_advantages(spec.members.size(), rng);
        const auto setup = construct_event(spec, std::move(adv), rng.next());
        if (std::abs(entropy_prediction(setup, 1.0, EntropyPrediction::kCovariance)) < 1e-3 ||
            std::abs(entropy_prediction(setup, 1.0, EntropyPrediction::kWeightedCovariance)) < 1e-3) {
          ++resampled[t];
          continue;
        }
        const auto c = check_theorem4(setup, etas, kind);
        slope[t] = c.slope;
        alt_slope[t] = check_theorem4(setup, etas, alt).slope;
        err[t] = *std::max_element(c.errors.begin(), c.errors.end());
        rel[t] = c.errors.back() / std::max(std::abs(c.measured.back()), std::numeric_limits<double>::min());
        return;
      }
    });
    const double med = median(slope);
    pass &= med >= kSlopeLo && med <= kSlopeHi;
    all_slopes.insert(all_slopes.end(), slope.begin(), slope.end());
    rep.max_abs_err = std::max(rep.max_abs_err, *std::max_element(err.begin(), err.end()));
    rep.max_rel_err = std::max(rep.max_rel_err, *std::max_element(rel.begin(), rel.end()));
    int total_resampled = 0;
    for (int r : resampled) total_resampled += r;
    rep.details[to_string(side)] = {
        {"median_slope", med},
        {"min_slope", *std::min_element(slope.begin(), slope.end())},
        {"max_slope", *std::max_element(slope.begin(), slope.end())},
        {"alternative_median_slope", median(alt_slope)},
        {"resampled", total_resampled}};
  }
  rep.slope = median(all_slopes);
  rep.pass = pass;
  return rep;
}

// ---------------------------------------------------------------- driver

TheoremSelection theorem_selection_from_string(const std::string& s) {
  if (s == "all") return TheoremSelection::kAll;
  if (s == "t1") return TheoremSelection::kT1;
  if (s == "t2") return TheoremSelection::kT2;
  if (s == "t3") return TheoremSelection::kT3;
  if (s == "t4") return TheoremSelection::kT4;
  throw ConfigError("unknown theorem selection '" + s + "'");
}

std::vector<TheoremReport> run_verification(TheoremSelection which, std::uint64_t seed) {
  std::vector<TheoremReport> out;
  const bool all = which == TheoremSelection::kAll;
  if (all || which == TheoremSelection::kT1) out.push_back(verify_theorem1(200, seed));
  if (all || which == TheoremSelection::kT2) out.push_back(verify_theorem2_suite(10000, seed));
  if (all || which == TheoremSelection::kT3) out.push_back(verify_theorem3(100, seed));
  if (all || which == TheoremSelection::kT4) out.push_back(verify_theorem4(50, seed));
  return out;
}

}  // namespace clipbench
