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

#ifndef CLIPBENCH_TRAINER_HPP_
#define CLIPBENCH_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clipbench/clipping.hpp"
#include "clipbench/policy.hpp"
#include "json.hpp"

namespace clipbench {

enum class AdvantageMode {
  // A_i = r_i - mean(r). Default; no std normalisation.
  kMeanBaseline,
  // A_i = (r_i - mean) / (std + 1e-8), population std.
  kZScore,
};

std::string to_string(AdvantageMode mode);
AdvantageMode advantage_mode_from_string(const std::string& s);

// Group-relative advantages. ContractError for an empty group.
std::vector<double> group_advantages(std::span<const double> rewards, AdvantageMode mode);

struct TrainConfig {
  ClipRule rule = ClipRule::ratio_symmetric(0.2);
  int group_size = 8;
  double learning_rate = 1.0;
  int steps = 1000;
  // Coefficient of the exact KL(pi || pi_ref) penalty; pi_ref is the initial policy.
  double beta = 0.0;
  AdvantageMode advantage_mode = AdvantageMode::kMeanBaseline;
  bool token_average = true;
  std::uint64_t seed = 0;
  int eval_every = 50;
  int eval_k = 8;
  double eval_temperature = 0.3;
  double train_temperature = 1.0;
  // Full-batch gradient steps taken on each rollout snapshot.
  int inner_steps = 1;
  SurrogateForm form = SurrogateForm::kMinClipped;
  // When false the CSV `ms` column is 0 so repeated runs are byte-identical.
  bool record_wall_clock = false;

  // ConfigError on G < 2, eta <= 0 and friends.
  void validate() const;
};

struct GroupBatch {
  int prompt = 0;
  std::vector<Transcript> transcripts;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

struct MetricsRow {
  int step = 0;
  double mean_return = 0.0;
  // Visitation-weighted policy entropy after the update.
  double entropy = 0.0;
  // Share of sampled token terms whose gradient path the rule removed,
  // over all inner steps of the snapshot.
  double clip_frac = 0.0;
  // Mean kl3(pi_new / pi_old) over sampled tokens after the update.
  double mean_kl3 = 0.0;
  double mean_length = 0.0;
  double ms = 0.0;
  // clip_frac restricted to the first inner step (always 0: theta == theta_old).
  double first_inner_clip_frac = 0.0;
};

// step,return,entropy,clip_frac,mean_kl3,length,ms
std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);
// Parses one data line; ConfigError on malformed input.
MetricsRow parse_metrics_csv_line(const std::string& line);

struct EvalReport {
  int step = 0;
  int k = 0;
  double temperature = 0.0;
  double mean_at_k = 0.0;
  double pass_at_k = 0.0;
  std::vector<double> prompt_mean;
  std::vector<double> prompt_pass;

  nlohmann::json to_json() const;
};

// Mean@K / Pass@K: K samples per prompt at `temperature`.
EvalReport evaluate(const LogitTable& table, const TokenEnv& env, int k, double temperature,
                    std::uint64_t seed);

// GRPO-style loop: per step, G completions for every prompt, group
// advantages, `inner_steps` ascent steps on the clipped surrogate against the
// step's snapshot.
class Trainer {
 public:
  Trainer(TokenEnv env, TrainConfig config);
  Trainer(TokenEnv env, TrainConfig config, LogitTable initial);
  // The KL penalty pulls towards `reference` instead of `initial`.
  Trainer(TokenEnv env, TrainConfig config, LogitTable initial, LogitTable reference);

  // One snapshot: sample, score, update. Throws TrainingError (with a JSON
  // state dump) on a non-finite gradient or policy, or when a ratio leaves
  // the representable range.
  MetricsRow step();

  // Eval with the configured K and temperature, seeded by (seed, step).
  EvalReport evaluate() const;

  const TokenEnv& env() const noexcept { return env_; }
  const TrainConfig& config() const noexcept { return config_; }
  const LogitTable& policy() const noexcept { return policy_; }
  const LogitTable& reference() const noexcept { return reference_; }
  const std::vector<GroupBatch>& last_groups() const noexcept { return groups_; }
  int steps_done() const noexcept { return step_; }

 private:
  TokenEnv env_;
  TrainConfig config_;
  LogitTable policy_;
  LogitTable reference_;
  std::vector<GroupBatch> groups_;
  int step_ = 0;
};

// Everything needed to launch one run from a JSON document:
// {"name", "env": {...}, "train": {...}, "eval": {"every", "K", "temperature"}, "output"}.
struct RunConfig {
  std::string name = "run";
  nlohmann::json env;
  TrainConfig train;
  std::filesystem::path output;

  nlohmann::json to_json() const;
  // Schema-checked; unknown keys anywhere are ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
};

TrainConfig train_config_from_json(const nlohmann::json& train, const nlohmann::json& eval);
nlohmann::json train_config_to_json(const TrainConfig& c);

struct MetricSummary {
  double mean_at_k = 0.0;
  double pass_at_k = 0.0;
};

struct RunSummary {
  std::string name;
  std::string rule;
  std::uint64_t seed = 0;
  int steps = 0;
  int k = 0;
  MetricSummary final_eval;
  // Column-wise maxima over eval checkpoints.
  MetricSummary best_eval;
  double final_return = 0.0;
  double final_entropy = 0.0;

  nlohmann::json to_json() const;
  static RunSummary from_json(const nlohmann::json& j);
};

// Runs training and writes metrics.csv, evals.jsonl, checkpoints/,
// config.json and summary.json into `out_dir`. On TrainingError writes
// diagnostics.json before rethrowing.
RunSummary run_training(const RunConfig& config, const std::filesystem::path& out_dir);

struct SweepEntry {
  std::string name;
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  std::optional<RunSummary> summary;
  std::string error;
};

// One run per (config, seed) into out_dir/<name>/seed_<seed>/, up to `jobs`
// at a time, plus out_dir/summary.json. A failing run is recorded and the
// sweep carries on.
std::vector<SweepEntry> sweep(std::span<const RunConfig> configs, std::span<const std::uint64_t> seeds,
                              const std::filesystem::path& out_dir, int jobs = 1);

}  // namespace clipbench

#endif  // CLIPBENCH_TRAINER_HPP_
