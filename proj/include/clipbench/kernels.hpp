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

#ifndef CLIPBENCH_KERNELS_HPP_
#define CLIPBENCH_KERNELS_HPP_

// Data-parallel inner loops. Every kernel exists twice: a plain serial
// reference (namespace serial) and an OpenMP version (namespace parallel)
// that must return bitwise-identical results. Parallel kernels only split
// work whose outputs are disjoint, and any cross-item sum is reduced
// serially in index order afterwards.

#include <cstdint>
#include <span>
#include <vector>

#include "clipbench/clipping.hpp"
#include "clipbench/policy.hpp"

namespace clipbench::kernels {

struct ExactProblem {
  const LogitTable& current;
  const LogitTable& old;
  const ClipRule& rule;
  const AdvantageTable& adv;
  const StateVisitation& visitation;
  SurrogateForm form = SurrogateForm::kMinClipped;
};

struct RolloutRequest {
  int prompt = 0;
  std::uint64_t seed = 0;
};

struct SampledProblem {
  const LogitTable& current;
  const LogitTable& snapshot;
  // Only read when beta > 0.
  const LogitTable* reference = nullptr;
  std::span<const Transcript> transcripts;
  // One advantage per transcript, shared by all of its tokens.
  std::span<const double> advantages;
  const ClipRule& rule;
  SurrogateForm form = SurrogateForm::kMinClipped;
  bool token_average = true;
  double beta = 0.0;
};

struct SampledResult {
  LogitTable gradient;
  // Batch objective: mean over transcripts of the (optionally 1/|y|
  // weighted) token surrogate sum, minus beta times the same average of
  // KL(pi || pi_ref) at the visited states.
  double objective = 0.0;
  std::size_t tokens = 0;
  std::size_t clipped = 0;
  // Sum over tokens of kl3(pi_current / pi_snapshot).
  double kl3_sum = 0.0;
};

namespace serial {
LogitTable exact_gradient(const ExactProblem& p);
double exact_objective(const ExactProblem& p);
std::vector<Transcript> rollouts(const LogitTable& table, const TokenEnv& env,
                                 std::span<const RolloutRequest> requests, double temperature);
SampledResult sampled_gradient(const SampledProblem& p);
}  // namespace serial

namespace parallel {
LogitTable exact_gradient(const ExactProblem& p);
double exact_objective(const ExactProblem& p);
std::vector<Transcript> rollouts(const LogitTable& table, const TokenEnv& env,
                                 std::span<const RolloutRequest> requests, double temperature);
SampledResult sampled_gradient(const SampledProblem& p);
}  // namespace parallel

// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace clipbench::kernels

#endif  // CLIPBENCH_KERNELS_HPP_
