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
#include <vector>

#include "clipbench/errors.hpp"
#include "clipbench/kernels.hpp"
#include "clipbench/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace clipbench;

namespace {

TokenEnv make_env() {
  TokenEnvConfig c;
  c.vocab_size = 5;
  c.horizon = 4;
  c.num_prompts = 6;
  c.eos_token = 4;
  c.verifier = DigitSumVerifier{{2, 3, 5}};
  return TokenEnv(c);
}

LogitTable random_table(const TokenEnv& env, Rng& rng, double scale) {
  LogitTable t(env.num_states(), env.vocab_size());
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

std::vector<kernels::RolloutRequest> requests(const TokenEnv& env, int per_prompt, std::uint64_t seed) {
  std::vector<kernels::RolloutRequest> out;
  for (int p = 0; p < env.num_prompts(); ++p) {
    for (int i = 0; i < per_prompt; ++i) {
      out.push_back({p, derive_seed({seed, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(i)})});
    }
  }
  return out;
}

bool same_transcripts(const std::vector<Transcript>& a, const std::vector<Transcript>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].prompt != b[i].prompt || a[i].tokens != b[i].tokens || a[i].states != b[i].states ||
        a[i].log_probs != b[i].log_probs || a[i].reward != b[i].reward) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("exact kernels: serial and parallel agree bitwise") {
  Rng rng(501);
  const auto env = make_env();
  const auto old = random_table(env, rng, 1.0);
  auto cur = old;
  const auto noise = random_table(env, rng, 0.3);
  for (std::size_t i = 0; i < cur.values().size(); ++i) cur.values()[i] += noise.values()[i];
  const auto adv = random_table(env, rng, 1.0);
  const auto d = visitation_exact(old, env);
  for (const auto& rule : {ClipRule::ratio_symmetric(0.2), ClipRule::kl3(0.07), ClipRule::full_kl(0.02)}) {
    kernels::ExactProblem p{cur, old, rule, adv, d};
    CHECK(kernels::serial::exact_gradient(p) == kernels::parallel::exact_gradient(p));
    CHECK(kernels::serial::exact_objective(p) == kernels::parallel::exact_objective(p));
  }
}

TEST_CASE("rollouts: serial and parallel agree bitwise") {
  Rng rng(502);
  const auto env = make_env();
  const auto t = random_table(env, rng, 1.0);
  const auto req = requests(env, 40, 7);
  const auto a = kernels::serial::rollouts(t, env, req, 1.0);
  const auto b = kernels::parallel::rollouts(t, env, req, 1.0);
  CHECK(same_transcripts(a, b));
  for (std::size_t i = 0; i < req.size(); ++i) {
    const auto single = rollout(t, env, req[i].prompt, req[i].seed, 1.0);
    REQUIRE(single.tokens == a[i].tokens);
  }
}

TEST_CASE("sampled gradient: serial and parallel agree bitwise") {
  Rng rng(503);
  const auto env = make_env();
  const auto snap = random_table(env, rng, 1.0);
  const auto ref = random_table(env, rng, 1.0);
  auto cur = snap;
  const auto noise = random_table(env, rng, 0.2);
  for (std::size_t i = 0; i < cur.values().size(); ++i) cur.values()[i] += noise.values()[i];
  const auto transcripts = kernels::serial::rollouts(snap, env, requests(env, 16, 9), 1.0);
  std::vector<double> adv(transcripts.size());
  for (double& a : adv) a = rng.normal();
  for (bool token_average : {true, false}) {
    for (double beta : {0.0, 0.1}) {
      kernels::SampledProblem p{cur, snap, &ref, transcripts, adv, ClipRule::kl3(0.07), SurrogateForm::kMinClipped,
                                token_average, beta};
      const auto s = kernels::serial::sampled_gradient(p);
      const auto q = kernels::parallel::sampled_gradient(p);
      CHECK(s.gradient == q.gradient);
      CHECK(s.objective == q.objective);
      CHECK(s.tokens == q.tokens);
      CHECK(s.clipped == q.clipped);
      CHECK(s.kl3_sum == q.kl3_sum);
    }
  }
}

TEST_CASE("sampled gradient matches central differences of the batch objective") {
  Rng rng(504);
  const auto env = make_env();
  const auto snap = random_table(env, rng, 1.0);
  const auto ref = random_table(env, rng, 1.0);
  const auto transcripts = kernels::serial::rollouts(snap, env, requests(env, 4, 11), 1.0);
  std::vector<double> adv(transcripts.size());
  for (double& a : adv) a = rng.normal();
  // Small perturbation keeps every ratio well inside the bands, so the clip
  // decisions are constant in a neighbourhood.
  auto cur = snap;
  for (double& v : cur.values()) v += 0.01 * rng.normal();
  for (bool token_average : {true, false}) {
    for (double beta : {0.0, 0.3}) {
      const auto rule = ClipRule::ratio_symmetric(0.2);
      kernels::SampledProblem p{cur, snap, &ref, transcripts, adv, rule, SurrogateForm::kMinClipped, token_average,
                                beta};
      const auto g = kernels::serial::sampled_gradient(p);
      auto probe = cur;
      for (std::size_t i = 0; i < probe.values().size(); i += 7) {
        const double base = probe.values()[i];
        const double fd = oracle::central_difference(
            [&](double x) {
              probe.values()[i] = x;
              kernels::SampledProblem q{probe, snap, &ref, transcripts, adv, rule, SurrogateForm::kMinClipped,
                                        token_average, beta};
              const double f = kernels::serial::sampled_gradient(q).objective;
              probe.values()[i] = base;
              return f;
            },
            base);
        REQUIRE(std::abs(g.gradient.values()[i] - fd) <= 1e-7);
      }
    }
  }
}

TEST_CASE("kernels report contract errors from both implementations") {
  const auto env = make_env();
  const LogitTable t(env.num_states(), env.vocab_size());
  const LogitTable wrong(3, env.vocab_size());
  const StateVisitation d{std::vector<double>(env.num_states(), 1.0 / env.num_states())};
  const auto rule = ClipRule::kl3(0.07);
  kernels::ExactProblem p{t, wrong, rule, t, d};
  CHECK_THROWS_AS(kernels::serial::exact_gradient(p), ContractError);
  CHECK_THROWS_AS(kernels::parallel::exact_gradient(p), ContractError);
  // A bad prompt id inside the parallel loop surfaces after the join.
  const std::vector<kernels::RolloutRequest> bad{{0, 1}, {99, 2}, {1, 3}};
  CHECK_THROWS_AS(kernels::parallel::rollouts(t, env, bad, 1.0), ContractError);
  CHECK_THROWS_AS(kernels::serial::rollouts(t, env, bad, 1.0), ContractError);
  CHECK(kernels::max_threads() >= 1);
}
