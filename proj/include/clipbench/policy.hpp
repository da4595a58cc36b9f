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

#ifndef CLIPBENCH_POLICY_HPP_
#define CLIPBENCH_POLICY_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "clipbench/clipping.hpp"
#include "json.hpp"

namespace clipbench {

// Reward 1 iff (prompt + sum of tokens) is divisible by the prompt's modulus.
// Moduli are cycled over prompts, so a list such as [2, 3, 5, 7] yields a
// mixed-difficulty prompt set.
struct DigitSumVerifier {
  std::vector<int> moduli;
};

// Reward 1 iff the first match_length tokens equal the prompt's hidden
// target. Targets are drawn from `seed` unless given explicitly; match
// lengths are cycled over prompts.
struct TargetSequenceVerifier {
  std::vector<int> match_lengths;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> targets;
};

using VerifierSpec = std::variant<DigitSumVerifier, TargetSequenceVerifier>;

struct TokenEnvConfig {
  int vocab_size = 8;
  int horizon = 1;
  int num_prompts = 1;
  // Sampling this token ends the completion early; -1 disables.
  int eos_token = -1;
  VerifierSpec verifier = TargetSequenceVerifier{{1}, 0, {}};
  std::size_t state_cap = 200000;
};

// Synthetic autoregressive token MDP. States are (prompt, prefix) pairs for
// prefixes of length 0..horizon-1, laid out prompt-major then depth-major:
//   id = prompt * states_per_prompt + offset(depth) + base-V index of prefix.
// Rewards are terminal and binary.
class TokenEnv {
 public:
  // Throws ConfigError on bad sizes, ResourceError when the enumerated state
  // count exceeds state_cap.
  explicit TokenEnv(TokenEnvConfig config);

  int vocab_size() const noexcept { return config_.vocab_size; }
  int horizon() const noexcept { return config_.horizon; }
  int num_prompts() const noexcept { return config_.num_prompts; }
  int eos_token() const noexcept { return config_.eos_token; }
  const TokenEnvConfig& config() const noexcept { return config_; }

  std::size_t num_states() const noexcept { return states_per_prompt_ * config_.num_prompts; }
  std::size_t states_per_prompt() const noexcept { return states_per_prompt_; }

  std::size_t root(int prompt) const;
  std::size_t state_id(int prompt, std::span<const int> prefix) const;
  // Successor after emitting `action` at `state`; requires depth < horizon - 1.
  std::size_t child(std::size_t state, int action) const;
  int depth(std::size_t state) const;
  int prompt_of(std::size_t state) const;

  bool ends_completion(int token, int length) const noexcept {
    return token == config_.eos_token || length >= config_.horizon;
  }
  double reward(int prompt, std::span<const int> tokens) const;

  // Target tokens for TargetSequenceVerifier prompts (empty otherwise).
  const std::vector<int>& target(int prompt) const;

  nlohmann::json to_json() const;
  static TokenEnv from_json(const nlohmann::json& j);

 private:
  TokenEnvConfig config_;
  std::size_t states_per_prompt_ = 0;
  std::vector<std::size_t> depth_offset_;
  std::vector<std::vector<int>> targets_;
};

// Dense (state, action) table of reals: policy logits, advantages or
// gradients, row-major.
class LogitTable {
 public:
  LogitTable() = default;
  LogitTable(std::size_t states, int actions, double fill = 0.0);

  std::size_t num_states() const noexcept { return states_; }
  int num_actions() const noexcept { return actions_; }

  std::span<double> row(std::size_t s);
  std::span<const double> row(std::size_t s) const;
  double& at(std::size_t s, int a) { return values_[s * actions_ + a]; }
  double at(std::size_t s, int a) const { return values_[s * actions_ + a]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const LogitTable& other) const noexcept {
    return states_ == other.states_ && actions_ == other.actions_;
  }
  bool all_finite() const noexcept;

  // {"shape": [states, actions], "logits": [...]}
  nlohmann::json to_json() const;
  static LogitTable from_json(const nlohmann::json& j);
  // "CLPT" magic, u64 states, u64 actions, then little-endian doubles.
  void write_binary(const std::filesystem::path& path) const;
  static LogitTable read_binary(const std::filesystem::path& path);

  friend bool operator==(const LogitTable&, const LogitTable&) = default;

 private:
  std::size_t states_ = 0;
  int actions_ = 0;
  std::vector<double> values_;
};

using AdvantageTable = LogitTable;

struct StateVisitation {
  std::vector<double> weights;
};

struct Transcript {
  int prompt = 0;
  std::vector<int> tokens;
  std::vector<std::size_t> states;
  std::vector<double> log_probs;
  double reward = 0.0;
};

// Numerically stable softmax of `logits / temperature` into `out`.
void softmax(std::span<const double> logits, std::span<double> out, double temperature = 1.0);
void log_softmax(std::span<const double> logits, std::span<double> out, double temperature = 1.0);

std::vector<double> action_dist(const LogitTable& table, std::size_t state, double temperature = 1.0);

double entropy(const LogitTable& table, std::size_t state);

// Exact prefix-probability mass of every state under `table`, normalised over
// all (prompt, depth) pairs. Prompts are equally likely.
StateVisitation visitation_exact(const LogitTable& table, const TokenEnv& env);

// sum_s d(s) H(pi(.|s)).
double mean_entropy(const LogitTable& table, const StateVisitation& d);

// Autoregressive sample; deterministic in `seed`.
Transcript rollout(const LogitTable& table, const TokenEnv& env, int prompt, std::uint64_t seed,
                   double temperature = 1.0);

// Probability that one sampled completion of `prompt` earns reward 1, by
// enumeration of every completion.
double success_probability(const LogitTable& table, const TokenEnv& env, int prompt,
                           double temperature = 1.0);

// Gradient of  sum_s d(s) sum_a pi_old(a|s) surrogate(rule, ctx(s,a))  with
// respect to the logits of `current`, by exact summation over actions. Clip
// decisions are locally constant. Runs the OpenMP kernel.
LogitTable exact_surrogate_gradient(const LogitTable& current, const LogitTable& old,
                                    const ClipRule& rule, const AdvantageTable& adv,
                                    const StateVisitation& d,
                                    SurrogateForm form = SurrogateForm::kMinClipped);

// Value of the same objective.
double exact_surrogate_objective(const LogitTable& current, const LogitTable& old,
                                 const ClipRule& rule, const AdvantageTable& adv,
                                 const StateVisitation& d,
                                 SurrogateForm form = SurrogateForm::kMinClipped);

}  // namespace clipbench

#endif  // CLIPBENCH_POLICY_HPP_
