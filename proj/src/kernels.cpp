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

#include "clipbench/kernels.hpp"

#include <cmath>

#include "clipbench/divergence.hpp"
#include "clipbench/errors.hpp"
#include "error_slot.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace clipbench::kernels {
namespace {

void validate(const ExactProblem& p) {
  if (!p.current.same_shape(p.old) || !p.current.same_shape(p.adv)) {
    throw ContractError("exact gradient: table shapes differ");
  }
  if (p.visitation.weights.size() != p.current.num_states()) {
    throw ContractError("exact gradient: visitation size does not match table");
  }
}

// Writes d(s) * d/dtheta_s of the state's surrogate into `grad_row` and
// returns d(s) * sum_a pi_old(a) term(a).
double exact_state(const ExactProblem& p, std::size_t s, std::span<double> grad_row) {
  const double weight = p.visitation.weights[s];
  const auto n = static_cast<std::size_t>(p.current.num_actions());
  if (weight == 0.0) {
    std::fill(grad_row.begin(), grad_row.end(), 0.0);
    return 0.0;
  }
  std::vector<double> log_new(n), log_old(n), pi_new(n), pi_old(n), slope(n);
  log_softmax(p.current.row(s), log_new);
  log_softmax(p.old.row(s), log_old);
  for (std::size_t a = 0; a < n; ++a) {
    pi_new[a] = std::exp(log_new[a]);
    pi_old[a] = std::exp(log_old[a]);
  }
  double value = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    ClipContext ctx{std::exp(log_new[a] - log_old[a]), pi_old[a], p.adv.at(s, static_cast<int>(a)), pi_new,
                    pi_old};
    const auto sv = evaluate_surrogate(p.rule, ctx, p.form);
    value += pi_old[a] * sv.value;
    slope[a] = sv.ratio_grad;
  }
  // pi_old(a) * dr_a/dtheta_b = pi_new(a) (1{a=b} - pi_new(b)).
  double mean_slope = 0.0;
  for (std::size_t a = 0; a < n; ++a) mean_slope += pi_new[a] * slope[a];
  for (std::size_t b = 0; b < n; ++b) grad_row[b] = weight * pi_new[b] * (slope[b] - mean_slope);
  return weight * value;
}

struct TokenContribution {
  std::size_t state = 0;
  std::vector<double> row;
};

struct TranscriptContribution {
  std::vector<TokenContribution> tokens;
  double objective = 0.0;
  std::size_t clipped = 0;
  double kl3_sum = 0.0;
};

void validate(const SampledProblem& p) {
  if (!p.current.same_shape(p.snapshot)) throw ContractError("sampled gradient: table shapes differ");
  if (p.advantages.size() != p.transcripts.size()) throw ContractError("one advantage per transcript required");
  if (p.beta > 0.0 && (p.reference == nullptr || !p.reference->same_shape(p.current))) {
    throw ContractError("sampled gradient: beta > 0 needs a reference table of the same shape");
  }
}

TranscriptContribution sampled_transcript(const SampledProblem& p, std::size_t i) {
  const auto& tr = p.transcripts[i];
  const auto n = static_cast<std::size_t>(p.current.num_actions());
  const double scale = 1.0 / static_cast<double>(p.transcripts.size());
  const double weight = p.token_average ? scale / static_cast<double>(tr.tokens.size()) : scale;
  const double adv = p.advantages[i];

  TranscriptContribution out;
  out.tokens.reserve(tr.tokens.size());
  std::vector<double> log_cur(n), log_snap(n), log_ref(n), pi_cur(n), pi_snap(n);
  for (std::size_t t = 0; t < tr.tokens.size(); ++t) {
    const std::size_t s = tr.states[t];
    const int a = tr.tokens[t];
    log_softmax(p.current.row(s), log_cur);
    log_softmax(p.snapshot.row(s), log_snap);
    for (std::size_t b = 0; b < n; ++b) {
      pi_cur[b] = std::exp(log_cur[b]);
      pi_snap[b] = std::exp(log_snap[b]);
    }
    const double ratio = std::exp(log_cur[a] - log_snap[a]);
    ClipContext ctx{ratio, pi_snap[a], adv, pi_cur, pi_snap};
    const auto sv = evaluate_surrogate(p.rule, ctx, p.form);

    TokenContribution tc{s, std::vector<double>(n, 0.0)};
    const double coef = weight * sv.ratio_grad * ratio;
    for (std::size_t b = 0; b < n; ++b) {
      tc.row[b] = coef * ((b == static_cast<std::size_t>(a) ? 1.0 : 0.0) - pi_cur[b]);
    }
    out.objective += weight * sv.value;
    if (p.beta > 0.0) {
      log_softmax(p.reference->row(s), log_ref);
      double kl = 0.0;
      for (std::size_t b = 0; b < n; ++b) kl += pi_cur[b] * (log_cur[b] - log_ref[b]);
      for (std::size_t b = 0; b < n; ++b) {
        tc.row[b] -= p.beta * weight * pi_cur[b] * (log_cur[b] - log_ref[b] - kl);
      }
      out.objective -= p.beta * weight * kl;
    }
    out.clipped += sv.clipped ? 1 : 0;
    out.kl3_sum += kl3(ratio);
    out.tokens.push_back(std::move(tc));
  }
  return out;
}

void accumulate(SampledResult& result, const TranscriptContribution& c) {
  for (const auto& tc : c.tokens) {
    auto row = result.gradient.row(tc.state);
    for (std::size_t b = 0; b < row.size(); ++b) row[b] += tc.row[b];
  }
  result.objective += c.objective;
  result.tokens += c.tokens.size();
  result.clipped += c.clipped;
  result.kl3_sum += c.kl3_sum;
}

}  // namespace

namespace serial {

LogitTable exact_gradient(const ExactProblem& p) {
  validate(p);
  LogitTable grad(p.current.num_states(), p.current.num_actions());
  for (std::size_t s = 0; s < grad.num_states(); ++s) exact_state(p, s, grad.row(s));
  return grad;
}

double exact_objective(const ExactProblem& p) {
  validate(p);
  std::vector<double> scratch(p.current.num_actions());
  double total = 0.0;
  for (std::size_t s = 0; s < p.current.num_states(); ++s) total += exact_state(p, s, scratch);
  return total;
}

std::vector<Transcript> rollouts(const LogitTable& table, const TokenEnv& env,
                                 std::span<const RolloutRequest> requests, double temperature) {
  std::vector<Transcript> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(rollout(table, env, r.prompt, r.seed, temperature));
  return out;
}

SampledResult sampled_gradient(const SampledProblem& p) {
  validate(p);
  SampledResult result{LogitTable(p.current.num_states(), p.current.num_actions())};
  for (std::size_t i = 0; i < p.transcripts.size(); ++i) accumulate(result, sampled_transcript(p, i));
  return result;
}

}  // namespace serial

namespace parallel {

LogitTable exact_gradient(const ExactProblem& p) {
  validate(p);
  LogitTable grad(p.current.num_states(), p.current.num_actions());
  const auto n = static_cast<std::ptrdiff_t>(grad.num_states());
  ErrorSlot errors;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    errors.run([&] { exact_state(p, static_cast<std::size_t>(s), grad.row(s)); });
  }
  errors.rethrow();
  return grad;
}

double exact_objective(const ExactProblem& p) {
  validate(p);
  const auto n = static_cast<std::ptrdiff_t>(p.current.num_states());
  std::vector<double> partial(n, 0.0);
  ErrorSlot errors;
#pragma omp parallel
  {
    std::vector<double> scratch(p.current.num_actions());
#pragma omp for schedule(static)
    for (std::ptrdiff_t s = 0; s < n; ++s) {
      errors.run([&] { partial[s] = exact_state(p, static_cast<std::size_t>(s), scratch); });
    }
  }
  errors.rethrow();
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

std::vector<Transcript> rollouts(const LogitTable& table, const TokenEnv& env,
                                 std::span<const RolloutRequest> requests, double temperature) {
  std::vector<Transcript> out(requests.size());
  const auto n = static_cast<std::ptrdiff_t>(requests.size());
  ErrorSlot errors;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    errors.run([&] { out[i] = rollout(table, env, requests[i].prompt, requests[i].seed, temperature); });
  }
  errors.rethrow();
  return out;
}

SampledResult sampled_gradient(const SampledProblem& p) {
  validate(p);
  const auto n = static_cast<std::ptrdiff_t>(p.transcripts.size());
  std::vector<TranscriptContribution> parts(n);
  ErrorSlot errors;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    errors.run([&] { parts[i] = sampled_transcript(p, static_cast<std::size_t>(i)); });
  }
  errors.rethrow();
  SampledResult result{LogitTable(p.current.num_states(), p.current.num_actions())};
  for (const auto& c : parts) accumulate(result, c);
  return result;
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace clipbench::kernels
