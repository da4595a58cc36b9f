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

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "clipbench/kernels.hpp"
#include "clipbench/rng.hpp"

namespace {

using namespace clipbench;

TokenEnv make_env(int horizon) {
  TokenEnvConfig c;
  c.vocab_size = 8;
  c.horizon = horizon;
  c.num_prompts = 8;
  c.verifier = DigitSumVerifier{{2, 3, 5, 7}};
  return TokenEnv(c);
}

LogitTable random_table(const TokenEnv& env, std::uint64_t seed, double scale) {
  LogitTable t(env.num_states(), env.vocab_size());
  Rng rng(seed);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

struct Fixture {
  TokenEnv env;
  LogitTable old_logits, cur_logits, adv;
  StateVisitation d;
  ClipRule rule = ClipRule::kl3(0.07);

  explicit Fixture(int horizon)
      : env(make_env(horizon)),
        old_logits(random_table(env, 1, 1.0)),
        cur_logits(old_logits),
        adv(random_table(env, 2, 1.0)),
        d(visitation_exact(old_logits, env)) {
    const auto noise = random_table(env, 3, 0.3);
    for (std::size_t i = 0; i < cur_logits.values().size(); ++i) cur_logits.values()[i] += noise.values()[i];
  }
};

template <bool kParallel>
void BM_ExactGradient(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  kernels::ExactProblem p{f.cur_logits, f.old_logits, f.rule, f.adv, f.d};
  for (auto _ : state) {
    auto g = kParallel ? kernels::parallel::exact_gradient(p) : kernels::serial::exact_gradient(p);
    benchmark::DoNotOptimize(g.values().data());
  }
  state.counters["states"] = static_cast<double>(f.env.num_states());
}

std::vector<kernels::RolloutRequest> requests(const TokenEnv& env, int per_prompt) {
  std::vector<kernels::RolloutRequest> r;
  for (int p = 0; p < env.num_prompts(); ++p) {
    for (int i = 0; i < per_prompt; ++i) r.push_back({p, derive_seed({7, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(i)})});
  }
  return r;
}

template <bool kParallel>
void BM_Rollouts(benchmark::State& state) {
  Fixture f(4);
  const auto req = requests(f.env, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto t = kParallel ? kernels::parallel::rollouts(f.old_logits, f.env, req, 1.0)
                       : kernels::serial::rollouts(f.old_logits, f.env, req, 1.0);
    benchmark::DoNotOptimize(t.data());
  }
}

template <bool kParallel>
void BM_SampledGradient(benchmark::State& state) {
  Fixture f(4);
  const auto req = requests(f.env, static_cast<int>(state.range(0)));
  const auto transcripts = kernels::serial::rollouts(f.old_logits, f.env, req, 1.0);
  std::vector<double> adv(transcripts.size());
  Rng rng(11);
  for (double& a : adv) a = rng.normal();
  kernels::SampledProblem p{f.cur_logits, f.old_logits, &f.old_logits, transcripts, adv, f.rule,
                            SurrogateForm::kMinClipped, true, 0.0};
  for (auto _ : state) {
    auto r = kParallel ? kernels::parallel::sampled_gradient(p) : kernels::serial::sampled_gradient(p);
    benchmark::DoNotOptimize(r.gradient.values().data());
  }
}

BENCHMARK(BM_ExactGradient<false>)->Name("exact_gradient/serial")->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExactGradient<true>)->Name("exact_gradient/parallel")->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Rollouts<false>)->Name("rollouts/serial")->Arg(64)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Rollouts<true>)->Name("rollouts/parallel")->Arg(64)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampledGradient<false>)->Name("sampled_gradient/serial")->Arg(64)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampledGradient<true>)->Name("sampled_gradient/parallel")->Arg(64)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
