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
#include <filesystem>
#include <vector>

#include "clipbench/divergence.hpp"
#include "clipbench/errors.hpp"
#include "clipbench/kernels.hpp"
#include "clipbench/policy.hpp"
#include "clipbench/ranges.hpp"
#include "clipbench/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace clipbench;

namespace {

TokenEnv bandit(int vocab, int target = 3) {
  TokenEnvConfig c;
  c.vocab_size = vocab;
  c.horizon = 1;
  c.num_prompts = 1;
  c.verifier = TargetSequenceVerifier{{1}, 0, {{target}}};
  return TokenEnv(c);
}

TokenEnv tree(int vocab, int horizon, int prompts) {
  TokenEnvConfig c;
  c.vocab_size = vocab;
  c.horizon = horizon;
  c.num_prompts = prompts;
  c.verifier = DigitSumVerifier{{2, 3}};
  return TokenEnv(c);
}

LogitTable random_table(std::size_t states, int actions, Rng& rng, double scale = 1.0) {
  LogitTable t(states, actions);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

std::vector<ClipRule> all_rules() {
  return {ClipRule::ratio_symmetric(0.2), ClipRule::ratio_asymmetric(0.2, 0.28), ClipRule::dual_clip(0.2, 3.0),
          ClipRule::dcpo(0.16, 0.2),      ClipRule::full_kl(0.02),               ClipRule::kl1(0.07),
          ClipRule::kl2(0.07),            ClipRule::kl3(0.07),                   ClipRule::kl3_is_weighted(0.07)};
}

// Distance from every clip decision boundary the objective has at this point.
double boundary_margin(const ClipRule& rule, const LogitTable& cur, const LogitTable& old, const LogitTable& adv) {
  double margin = 1e9;
  for (std::size_t s = 0; s < cur.num_states(); ++s) {
    const auto pn = action_dist(cur, s);
    const auto po = action_dist(old, s);
    if (rule.needs_distributions()) {
      margin = std::min(margin, std::abs(full_kl(pn, po) - std::get<FullKL>(rule.kind()).delta));
      continue;
    }
    for (int a = 0; a < cur.num_actions(); ++a) {
      const double r = pn[a] / po[a];
      std::visit(
          [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, KL1>) {
              margin = std::min(margin, std::abs(std::abs(std::log(r)) - k.delta));
            } else if constexpr (std::is_same_v<K, KL2>) {
              margin = std::min(margin, std::abs(kl2(r) - k.delta));
            } else if constexpr (std::is_same_v<K, KL3>) {
              margin = std::min(margin, std::abs(kl3(r) - k.delta));
            } else if constexpr (std::is_same_v<K, KL3IsWeighted>) {
              margin = std::min(margin, std::abs(kl3_is_weighted(r) - k.delta));
            } else if constexpr (std::is_same_v<K, FullKL>) {
            } else {
              const auto [lo, hi] = rule.ratio_band(po[a]);
              margin = std::min({margin, std::abs(r - lo), std::abs(r - hi)});
              if constexpr (std::is_same_v<K, DualClip>) margin = std::min(margin, std::abs(r - k.c));
            }
          },
          rule.kind());
      (void)adv;
    }
  }
  return margin;
}

}  // namespace

TEST_CASE("env layout and state ids") {
  const auto env = tree(3, 3, 2);
  CHECK(env.states_per_prompt() == 1 + 3 + 9);
  CHECK(env.num_states() == 26);
  const int prefix[] = {2, 1};
  const auto s = env.state_id(1, prefix);
  CHECK(env.depth(s) == 2);
  CHECK(env.prompt_of(s) == 1);
  const int first[] = {2};
  CHECK(env.child(env.state_id(1, first), 1) == s);
  CHECK(env.child(env.root(1), 2) == env.state_id(1, first));
  CHECK_THROWS_AS(env.child(s, 0), ContractError);
  CHECK_THROWS_AS(env.root(2), ContractError);
}

TEST_CASE("env rejects bad configs and enforces the cap") {
  TokenEnvConfig c;
  c.vocab_size = 0;
  CHECK_THROWS_AS(TokenEnv{c}, ConfigError);
  c.vocab_size = 8;
  c.horizon = 8;
  CHECK_THROWS_AS(TokenEnv{c}, ResourceError);
  c.horizon = 2;
  c.verifier = TargetSequenceVerifier{{3}, 0, {}};
  CHECK_THROWS_AS(TokenEnv{c}, ConfigError);
  const auto bad_key = nlohmann::json::parse(
      R"({"vocab_size":4,"horizon":1,"num_prompts":1,"verifier":{"kind":"digit_sum","moduli":[2]},"extra":1})");
  CHECK_THROWS_AS(TokenEnv::from_json(bad_key), ConfigError);
}

TEST_CASE("verifiers") {
  const auto env = tree(4, 2, 3);
  const int a[] = {1, 1};
  CHECK(env.reward(0, a) == 1.0);   // 0 + 2 divisible by 2
  CHECK(env.reward(1, a) == 1.0);   // 1 + 2 divisible by 3
  CHECK(env.reward(2, a) == 1.0);   // 2 + 2 divisible by 2
  const int c[] = {0, 1};
  CHECK(env.reward(1, c) == 0.0);   // 1 + 1 not divisible by 3
  const auto b = bandit(8, 5);
  const int hit[] = {5};
  const int miss[] = {4};
  CHECK(b.reward(0, hit) == 1.0);
  CHECK(b.reward(0, miss) == 0.0);
  CHECK(b.target(0).at(0) == 5);
}

TEST_CASE("env json round trip") {
  TokenEnvConfig c;
  c.vocab_size = 5;
  c.horizon = 3;
  c.num_prompts = 4;
  c.eos_token = 4;
  c.verifier = TargetSequenceVerifier{{1, 2, 3}, 17, {}};
  const TokenEnv env(c);
  const auto back = TokenEnv::from_json(env.to_json());
  CHECK(back.to_json() == env.to_json());
  for (int p = 0; p < 4; ++p) {
    CHECK(back.target(p) == env.target(p));
    for (int t : env.target(p)) CHECK(t != 4);
  }
}

TEST_CASE("action_dist examples") {
  LogitTable t(3, 4);
  for (double p : action_dist(t, 0)) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));
  LogitTable two(1, 2);
  two.at(0, 0) = 1.0;
  const auto base = action_dist(two, 0);
  two.at(0, 0) += 10.0;
  two.at(0, 1) += 10.0;
  const auto shifted = action_dist(two, 0);
  CHECK(std::abs(base[0] - shifted[0]) < 1e-12);
  two.at(0, 0) = std::log(2.0);
  two.at(0, 1) = 0.0;
  const auto d = action_dist(two, 0);
  CHECK(std::abs(d[0] - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(d[1] - 1.0 / 3.0) < 1e-15);
  CHECK_THROWS_AS(action_dist(two, 1), ContractError);
}

TEST_CASE("entropy examples") {
  LogitTable t(1, 4);
  CHECK(std::abs(entropy(t, 0) - std::log(4.0)) < 1e-15);
  t.at(0, 0) = 50.0;
  CHECK(entropy(t, 0) < 1e-18);
  LogitTable two(1, 2);
  two.at(0, 0) = std::log(2.0);
  CHECK(std::abs(entropy(two, 0) - 0.6365141682948) < 1e-12);
}

TEST_CASE("property: softmax shift invariance and entropy bounds") {
  Rng rng(401);
  for (int i = 0; i < 2000; ++i) {
    const int n = rng.uniform_int(2, 16);
    auto t = random_table(1, n, rng, 3.0);
    const auto before = action_dist(t, 0);
    const double c = rng.uniform(-50.0, 50.0);
    for (double& v : t.values()) v += c;
    const auto after = action_dist(t, 0);
    for (int a = 0; a < n; ++a) REQUIRE(std::abs(before[a] - after[a]) <= 1e-12);
    const double h = entropy(t, 0);
    REQUIRE(h >= 0.0);
    REQUIRE(h <= std::log(n) + 1e-12);
    REQUIRE(std::abs(h - oracle::entropy(oracle::softmax({t.row(0).begin(), t.row(0).end()}))) <= 1e-12);
  }
}

TEST_CASE("visitation examples") {
  const auto env1 = tree(4, 1, 3);
  const auto d1 = visitation_exact(LogitTable(env1.num_states(), 4), env1);
  for (double w : d1.weights) CHECK(std::abs(w - 1.0 / 3.0) < 1e-15);
  const auto env2 = tree(2, 2, 2);
  const auto d2 = visitation_exact(LogitTable(env2.num_states(), 2), env2);
  for (int p = 0; p < 2; ++p) {
    CHECK(std::abs(d2.weights[env2.root(p)] - 0.5 / 2) < 1e-15);
    for (int a = 0; a < 2; ++a) {
      CHECK(std::abs(d2.weights[env2.child(env2.root(p), a)] - 0.5 * 0.5 / 2) < 1e-15);
    }
  }
  Rng rng(402);
  const auto env3 = tree(3, 4, 3);
  const auto d3 = visitation_exact(random_table(env3.num_states(), 3, rng), env3);
  double sum = 0.0;
  for (double w : d3.weights) sum += w;
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("rollout determinism and degenerate policies") {
  Rng rng(403);
  const auto env = tree(4, 3, 2);
  const auto t = random_table(env.num_states(), 4, rng);
  const auto a = rollout(t, env, 1, 99);
  const auto b = rollout(t, env, 1, 99);
  CHECK(a.tokens == b.tokens);
  CHECK(a.log_probs == b.log_probs);
  CHECK(a.tokens.size() == 3);
  LogitTable det(env.num_states(), 4);
  for (std::size_t s = 0; s < env.num_states(); ++s) det.at(s, 2) = 60.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CHECK(rollout(det, env, 0, seed).tokens == std::vector<int>{2, 2, 2});
  }
}

TEST_CASE("rollout stops at eos") {
  TokenEnvConfig c;
  c.vocab_size = 3;
  c.horizon = 4;
  c.eos_token = 0;
  c.verifier = DigitSumVerifier{{2}};
  const TokenEnv env(c);
  LogitTable t(env.num_states(), 3);
  for (std::size_t s = 0; s < env.num_states(); ++s) t.at(s, 0) = 60.0;
  const auto tr = rollout(t, env, 0, 5);
  CHECK(tr.tokens == std::vector<int>{0});
  CHECK(tr.reward == 1.0);
}

TEST_CASE("rollout frequencies match action_dist") {
  Rng rng(404);
  const auto env = bandit(6);
  const auto t = random_table(1, 6, rng);
  const auto p = action_dist(t, 0);
  const int n = 100000;
  std::vector<double> counts(6, 0.0);
  for (int i = 0; i < n; ++i) counts[rollout(t, env, 0, derive_seed({404, static_cast<std::uint64_t>(i)})).tokens[0]] += 1;
  for (int a = 0; a < 6; ++a) CHECK(std::abs(counts[a] / n - p[a]) <= oracle::three_sigma(p[a], n));
}

TEST_CASE("success_probability against enumeration and sampling") {
  Rng rng(405);
  const auto env = tree(3, 3, 2);
  const auto t = random_table(env.num_states(), 3, rng);
  for (int prompt = 0; prompt < 2; ++prompt) {
    double manual = 0.0;
    for (int x = 0; x < 27; ++x) {
      const int toks[] = {x / 9, (x / 3) % 3, x % 3};
      double prob = 1.0;
      std::size_t s = env.root(prompt);
      for (int k = 0; k < 3; ++k) {
        prob *= action_dist(t, s)[toks[k]];
        if (k < 2) s = env.child(s, toks[k]);
      }
      manual += prob * env.reward(prompt, toks);
    }
    CHECK(std::abs(success_probability(t, env, prompt) - manual) < 1e-14);
  }
}

TEST_CASE("logit table serialisation") {
  Rng rng(406);
  const auto t = random_table(7, 5, rng);
  CHECK(LogitTable::from_json(t.to_json()) == t);
  const auto path = std::filesystem::temp_directory_path() / "clipbench_table_test.bin";
  t.write_binary(path);
  CHECK(LogitTable::read_binary(path) == t);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(LogitTable::from_json(nlohmann::json::parse(R"({"shape":[2,2],"logits":[1,2,3]})")), ConfigError);
}

TEST_CASE("exact gradient examples") {
  Rng rng(407);
  const auto env = tree(4, 2, 2);
  const auto old = random_table(env.num_states(), 4, rng);
  const auto d = visitation_exact(old, env);
  const auto rule = ClipRule::ratio_symmetric(0.2);
  const LogitTable zero(env.num_states(), 4);
  const auto flat = exact_surrogate_gradient(old, old, rule, zero, d);
  for (double g : flat.values()) CHECK(g == 0.0);

  const auto adv = random_table(env.num_states(), 4, rng);
  const auto g = exact_surrogate_gradient(old, old, rule, adv, d);
  for (std::size_t s = 0; s < env.num_states(); ++s) {
    const auto p = action_dist(old, s);
    double mean = 0.0;
    for (int a = 0; a < 4; ++a) mean += p[a] * adv.at(s, a);
    for (int a = 0; a < 4; ++a) {
      CHECK(std::abs(g.at(s, a) - d.weights[s] * p[a] * (adv.at(s, a) - mean)) < 1e-15);
    }
  }
  CHECK_THROWS_AS(exact_surrogate_gradient(old, LogitTable(3, 4), rule, adv, d), ContractError);
}

TEST_CASE("property: exact gradient matches central differences for every rule") {
  Rng rng(408);
  const auto env = tree(3, 2, 2);
  for (const auto& rule : all_rules()) {
    for (auto form : {SurrogateForm::kMinClipped, SurrogateForm::kClipOnly, SurrogateForm::kGeneral}) {
      if (form != SurrogateForm::kMinClipped && !rule.is_ratio_family()) continue;
      for (int trial = 0; trial < 100; ++trial) {
        LogitTable old, cur, adv;
        do {
          old = random_table(env.num_states(), 3, rng);
          cur = old;
          const auto noise = random_table(env.num_states(), 3, rng, 0.25);
          for (std::size_t i = 0; i < cur.values().size(); ++i) cur.values()[i] += noise.values()[i];
          adv = random_table(env.num_states(), 3, rng);
        } while (boundary_margin(rule, cur, old, adv) < 1e-3);
        const auto d = visitation_exact(old, env);
        const auto g = exact_surrogate_gradient(cur, old, rule, adv, d, form);
        for (std::size_t i = 0; i < cur.values().size(); ++i) {
          const double base = cur.values()[i];
          const double fd = oracle::central_difference(
              [&](double x) {
                cur.values()[i] = x;
                const double f = exact_surrogate_objective(cur, old, rule, adv, d, form);
                cur.values()[i] = base;
                return f;
              },
              base);
          INFO(rule.label() << " form " << to_string(form));
          REQUIRE(std::abs(g.values()[i] - fd) <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("property: sampled objective converges to the exact one") {
  Rng rng(409);
  const auto env = bandit(6);
  for (const auto& rule : all_rules()) {
    const auto old = random_table(1, 6, rng);
    auto cur = old;
    for (double& v : cur.values()) v += 0.3 * rng.normal();
    const auto adv = random_table(1, 6, rng);
    const StateVisitation d{{1.0}};
    const double exact = exact_surrogate_objective(cur, old, rule, adv, d);

    const int n = 20000;
    std::vector<kernels::RolloutRequest> req;
    for (int i = 0; i < n; ++i) req.push_back({0, derive_seed({409, static_cast<std::uint64_t>(i)})});
    const auto transcripts = kernels::serial::rollouts(old, env, req, 1.0);
    std::vector<double> a(n);
    const auto pn = action_dist(cur, 0);
    const auto po = action_dist(old, 0);
    double sq = 0.0, mean = 0.0;
    for (int i = 0; i < n; ++i) {
      const int tok = transcripts[i].tokens[0];
      a[i] = adv.at(0, tok);
      ClipContext c;
      c.ratio = pn[tok] / po[tok];
      c.old_prob = po[tok];
      c.advantage = a[i];
      c.new_dist = pn;
      c.old_dist = po;
      const double v = surrogate_term(rule, c);
      mean += v / n;
      sq += v * v / n;
    }
    const double sd = std::sqrt(std::max(sq - mean * mean, 0.0));
    kernels::SampledProblem p{cur, old, nullptr, transcripts, a, rule, SurrogateForm::kMinClipped, true, 0.0};
    const auto res = kernels::serial::sampled_gradient(p);
    INFO(rule.label());
    CHECK(std::abs(res.objective - mean) < 1e-12);
    CHECK(std::abs(res.objective - exact) <= 4.0 * sd / std::sqrt(n) + 1e-12);
  }
}
