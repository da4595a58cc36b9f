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

#include "clipbench/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <spdlog/spdlog.h>

#include "clipbench/divergence.hpp"
#include "clipbench/errors.hpp"
#include "clipbench/kernels.hpp"
#include "clipbench/rng.hpp"

namespace clipbench {
namespace {

constexpr std::uint64_t kTrainStream = 0x747261696eULL;
constexpr std::uint64_t kEvalStream = 0x6576616cULL;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(std::string("unknown key '") + key + "' in " + where);
    }
  }
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out, const char* where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("bad type for '") + key + "' in " + where);
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

// Mean kl3(pi_current / pi_snapshot) over the tokens of `transcripts`.
double mean_token_kl3(const LogitTable& current, const LogitTable& snapshot, std::span<const Transcript> transcripts) {
  const auto n = static_cast<std::size_t>(current.num_actions());
  std::vector<double> lc(n), ls(n);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& tr : transcripts) {
    for (std::size_t t = 0; t < tr.tokens.size(); ++t) {
      log_softmax(current.row(tr.states[t]), lc);
      log_softmax(snapshot.row(tr.states[t]), ls);
      sum += kl3(std::exp(lc[tr.tokens[t]] - ls[tr.tokens[t]]));
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

nlohmann::json training_dump(int step, const TrainConfig& config, const LogitTable& policy,
                             const LogitTable& gradient) {
  double gmax = 0.0;
  std::size_t non_finite = 0;
  for (double g : gradient.values()) {
    if (!std::isfinite(g)) {
      ++non_finite;
    } else {
      gmax = std::max(gmax, std::abs(g));
    }
  }
  nlohmann::json logits = nlohmann::json::array();
  for (double v : policy.values()) logits.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
  return {{"step", step},
          {"train", train_config_to_json(config)},
          {"gradient_max_abs_finite", gmax},
          {"gradient_non_finite", non_finite},
          {"policy", {{"shape", {policy.num_states(), policy.num_actions()}}, {"logits", logits}}}};
}

}  // namespace

std::string to_string(AdvantageMode mode) {
  return mode == AdvantageMode::kZScore ? "z_score" : "mean_baseline";
}

AdvantageMode advantage_mode_from_string(const std::string& s) {
  if (s == "mean_baseline") return AdvantageMode::kMeanBaseline;
  if (s == "z_score") return AdvantageMode::kZScore;
  throw ConfigError("unknown advantage_mode '" + s + "'");
}

std::vector<double> group_advantages(std::span<const double> rewards, AdvantageMode mode) {
  if (rewards.empty()) throw ContractError("group_advantages: empty group");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = rewards[i] - mean;
  if (mode == AdvantageMode::kZScore) {
    double var = 0.0;
    for (double a : adv) var += a * a;
    const double stddev = std::sqrt(var / n);
    for (double& a : adv) a /= stddev + 1e-8;
  }
  return adv;
}

void TrainConfig::validate() const {
  if (group_size < 2) throw ConfigError("group_size must be at least 2");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (steps < 1) throw ConfigError("steps must be positive");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be non-negative");
  if (eval_every < 1) throw ConfigError("eval_every must be positive");
  if (eval_k < 1) throw ConfigError("eval K must be positive");
  if (!(eval_temperature > 0.0) || !(train_temperature > 0.0)) throw ConfigError("temperatures must be positive");
  if (inner_steps < 1) throw ConfigError("inner_steps must be positive");
}

std::string metrics_csv_header() { return "step,return,entropy,clip_frac,mean_kl3,length,ms"; }

std::string metrics_csv_line(const MetricsRow& row) {
  std::ostringstream os;
  os << row.step << ',' << format_double(row.mean_return) << ',' << format_double(row.entropy) << ','
     << format_double(row.clip_frac) << ',' << format_double(row.mean_kl3) << ','
     << format_double(row.mean_length) << ',' << format_double(row.ms);
  return os.str();
}

MetricsRow parse_metrics_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (cells.size() != 7) throw ConfigError("metrics line needs 7 fields: '" + line + "'");
  auto num = [&](std::size_t i) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cells[i], &used);
    } catch (const std::exception&) {
      throw ConfigError("bad number in metrics line: '" + cells[i] + "'");
    }
    if (used != cells[i].size()) throw ConfigError("bad number in metrics line: '" + cells[i] + "'");
    return v;
  };
  MetricsRow row;
  row.step = static_cast<int>(num(0));
  row.mean_return = num(1);
  row.entropy = num(2);
  row.clip_frac = num(3);
  row.mean_kl3 = num(4);
  row.mean_length = num(5);
  row.ms = num(6);
  return row;
}

nlohmann::json EvalReport::to_json() const {
  return {{"step", step},           {"K", k},
          {"temperature", temperature}, {"mean_at_k", mean_at_k},
          {"pass_at_k", pass_at_k}, {"prompt_mean", prompt_mean},
          {"prompt_pass", prompt_pass}};
}

EvalReport evaluate(const LogitTable& table, const TokenEnv& env, int k, double temperature, std::uint64_t seed) {
  if (k < 1) throw ContractError("evaluate: K must be at least 1");
  std::vector<kernels::RolloutRequest> requests;
  requests.reserve(static_cast<std::size_t>(env.num_prompts()) * k);
  for (int p = 0; p < env.num_prompts(); ++p) {
    for (int i = 0; i < k; ++i) {
      requests.push_back({p, derive_seed({seed, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(i)})});
    }
  }
  const auto samples = kernels::parallel::rollouts(table, env, requests, temperature);
  EvalReport report;
  report.k = k;
  report.temperature = temperature;
  for (int p = 0; p < env.num_prompts(); ++p) {
    double hits = 0.0;
    for (int i = 0; i < k; ++i) hits += samples[static_cast<std::size_t>(p) * k + i].reward;
    report.prompt_mean.push_back(hits / k);
    report.prompt_pass.push_back(hits > 0.0 ? 1.0 : 0.0);
  }
  for (int p = 0; p < env.num_prompts(); ++p) {
    report.mean_at_k += report.prompt_mean[p];
    report.pass_at_k += report.prompt_pass[p];
  }
  report.mean_at_k /= env.num_prompts();
  report.pass_at_k /= env.num_prompts();
  return report;
}

// ------------------------------------------------------------------ Trainer

Trainer::Trainer(TokenEnv env, TrainConfig config)
    : Trainer(env, config, LogitTable(env.num_states(), env.vocab_size())) {}

Trainer::Trainer(TokenEnv env, TrainConfig config, LogitTable initial)
    : Trainer(std::move(env), std::move(config), initial, initial) {}

Trainer::Trainer(TokenEnv env, TrainConfig config, LogitTable initial, LogitTable reference)
    : env_(std::move(env)), config_(std::move(config)), policy_(std::move(initial)), reference_(std::move(reference)) {
  config_.validate();
  if (policy_.num_states() != env_.num_states() || policy_.num_actions() != env_.vocab_size() ||
      !policy_.same_shape(reference_)) {
    throw ContractError("initial or reference policy shape does not match env");
  }
  if (!policy_.all_finite() || !reference_.all_finite()) throw ContractError("policy has non-finite logits");
}

MetricsRow Trainer::step() {
  const auto start = std::chrono::steady_clock::now();
  const LogitTable snapshot = policy_;
  const int g = config_.group_size;

  std::vector<kernels::RolloutRequest> requests;
  requests.reserve(static_cast<std::size_t>(env_.num_prompts()) * g);
  for (int p = 0; p < env_.num_prompts(); ++p) {
    for (int i = 0; i < g; ++i) {
      requests.push_back({p, derive_seed({config_.seed, kTrainStream, static_cast<std::uint64_t>(step_),
                                          static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(i)})});
    }
  }
  auto transcripts = kernels::parallel::rollouts(snapshot, env_, requests, config_.train_temperature);

  groups_.clear();
  std::vector<double> advantages;
  advantages.reserve(transcripts.size());
  double return_sum = 0.0;
  double length_sum = 0.0;
  for (int p = 0; p < env_.num_prompts(); ++p) {
    GroupBatch batch;
    batch.prompt = p;
    for (int i = 0; i < g; ++i) {
      const auto& tr = transcripts[static_cast<std::size_t>(p) * g + i];
      batch.rewards.push_back(tr.reward);
      return_sum += tr.reward;
      length_sum += static_cast<double>(tr.tokens.size());
    }
    batch.advantages = group_advantages(batch.rewards, config_.advantage_mode);
    advantages.insert(advantages.end(), batch.advantages.begin(), batch.advantages.end());
    batch.transcripts.assign(transcripts.begin() + static_cast<std::ptrdiff_t>(p) * g,
                             transcripts.begin() + static_cast<std::ptrdiff_t>(p + 1) * g);
    groups_.push_back(std::move(batch));
  }

  MetricsRow row;
  row.step = step_ + 1;
  std::size_t clipped = 0;
  std::size_t tokens = 0;
  for (int inner = 0; inner < config_.inner_steps; ++inner) {
    kernels::SampledProblem problem{policy_, snapshot, &reference_, transcripts, advantages, config_.rule,
                                    config_.form, config_.token_average, config_.beta};
    kernels::SampledResult result;
    try {
      result = kernels::parallel::sampled_gradient(problem);
    } catch (const DomainError& e) {
      throw TrainingError(std::string(e.what()) + " at step " + std::to_string(row.step),
                          training_dump(row.step, config_, policy_, LogitTable(policy_.num_states(),
                                                                               policy_.num_actions()))
                              .dump(2));
    }
    if (!result.gradient.all_finite()) {
      throw TrainingError("non-finite gradient at step " + std::to_string(row.step),
                          training_dump(row.step, config_, policy_, result.gradient).dump(2));
    }
    if (inner == 0 && result.tokens > 0) {
      row.first_inner_clip_frac = static_cast<double>(result.clipped) / static_cast<double>(result.tokens);
    }
    clipped += result.clipped;
    tokens += result.tokens;
    auto values = policy_.values();
    const auto grad = result.gradient.values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += config_.learning_rate * grad[i];
    if (!policy_.all_finite()) {
      throw TrainingError("non-finite policy after update at step " + std::to_string(row.step),
                          training_dump(row.step, config_, policy_, result.gradient).dump(2));
    }
  }

  const double n = static_cast<double>(transcripts.size());
  row.mean_return = return_sum / n;
  row.mean_length = length_sum / n;
  row.clip_frac = tokens == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(tokens);
  try {
    row.mean_kl3 = mean_token_kl3(policy_, snapshot, transcripts);
  } catch (const DomainError& e) {
    throw TrainingError(std::string(e.what()) + " at step " + std::to_string(row.step),
                        training_dump(row.step, config_, policy_, LogitTable(policy_.num_states(),
                                                                             policy_.num_actions()))
                            .dump(2));
  }
  row.entropy = mean_entropy(policy_, visitation_exact(policy_, env_));
  ++step_;
  if (config_.record_wall_clock) {
    row.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return row;
}

EvalReport Trainer::evaluate() const {
  auto report = clipbench::evaluate(policy_, env_, config_.eval_k, config_.eval_temperature,
                                    derive_seed({config_.seed, kEvalStream, static_cast<std::uint64_t>(step_)}));
  report.step = step_;
  return report;
}

// ------------------------------------------------------------ run configs

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"rule", c.rule.to_json()},
          {"group_size", c.group_size},
          {"learning_rate", c.learning_rate},
          {"steps", c.steps},
          {"beta", c.beta},
          {"advantage_mode", to_string(c.advantage_mode)},
          {"token_average", c.token_average},
          {"seed", c.seed},
          {"train_temperature", c.train_temperature},
          {"inner_steps", c.inner_steps},
          {"surrogate_form", to_string(c.form)},
          {"record_wall_clock", c.record_wall_clock}};
}

TrainConfig train_config_from_json(const nlohmann::json& train, const nlohmann::json& eval) {
  reject_unknown_keys(train,
                      {"rule", "group_size", "learning_rate", "steps", "beta", "advantage_mode", "token_average",
                       "seed", "train_temperature", "inner_steps", "surrogate_form", "record_wall_clock"},
                      "train");
  reject_unknown_keys(eval, {"every", "K", "temperature"}, "eval");
  TrainConfig c;
  if (train.contains("rule")) c.rule = ClipRule::from_json(train.at("rule"));
  read_opt(train, "group_size", c.group_size, "train");
  read_opt(train, "learning_rate", c.learning_rate, "train");
  read_opt(train, "steps", c.steps, "train");
  read_opt(train, "beta", c.beta, "train");
  std::string mode = to_string(c.advantage_mode);
  read_opt(train, "advantage_mode", mode, "train");
  c.advantage_mode = advantage_mode_from_string(mode);
  read_opt(train, "token_average", c.token_average, "train");
  read_opt(train, "seed", c.seed, "train");
  read_opt(train, "train_temperature", c.train_temperature, "train");
  read_opt(train, "inner_steps", c.inner_steps, "train");
  std::string form = to_string(c.form);
  read_opt(train, "surrogate_form", form, "train");
  c.form = surrogate_form_from_string(form);
  read_opt(train, "record_wall_clock", c.record_wall_clock, "train");
  read_opt(eval, "every", c.eval_every, "eval");
  read_opt(eval, "K", c.eval_k, "eval");
  read_opt(eval, "temperature", c.eval_temperature, "eval");
  c.validate();
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j{{"name", name},
                   {"env", env},
                   {"train", train_config_to_json(train)},
                   {"eval", {{"every", train.eval_every}, {"K", train.eval_k}, {"temperature", train.eval_temperature}}}};
  if (!output.empty()) j["output"] = output.string();
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"name", "env", "train", "eval", "output"}, "run config");
  RunConfig c;
  read_opt(j, "name", c.name, "run config");
  if (!j.contains("env")) throw ConfigError("run config needs 'env'");
  c.env = j.at("env");
  TokenEnv::from_json(c.env);  // schema and cap check up front
  const nlohmann::json empty = nlohmann::json::object();
  c.train = train_config_from_json(j.value("train", empty), j.value("eval", empty));
  std::string out;
  read_opt(j, "output", out, "run config");
  c.output = out;
  return c;
}

nlohmann::json RunSummary::to_json() const {
  return {{"name", name},
          {"rule", rule},
          {"seed", seed},
          {"steps", steps},
          {"K", k},
          {"final", {{"mean_at_k", final_eval.mean_at_k}, {"pass_at_k", final_eval.pass_at_k}}},
          {"best", {{"mean_at_k", best_eval.mean_at_k}, {"pass_at_k", best_eval.pass_at_k}}},
          {"final_return", final_return},
          {"final_entropy", final_entropy}};
}

RunSummary RunSummary::from_json(const nlohmann::json& j) {
  try {
    RunSummary s;
    s.name = j.at("name").get<std::string>();
    s.rule = j.at("rule").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.steps = j.at("steps").get<int>();
    s.k = j.at("K").get<int>();
    s.final_eval = {j.at("final").at("mean_at_k").get<double>(), j.at("final").at("pass_at_k").get<double>()};
    s.best_eval = {j.at("best").at("mean_at_k").get<double>(), j.at("best").at("pass_at_k").get<double>()};
    s.final_return = j.at("final_return").get<double>();
    s.final_entropy = j.at("final_entropy").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run summary: ") + e.what());
  }
}

RunSummary run_training(const RunConfig& config, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "checkpoints");
  write_text(out_dir / "config.json", config.to_json().dump(2) + "\n");

  Trainer trainer(TokenEnv::from_json(config.env), config.train);
  std::ofstream csv(out_dir / "metrics.csv", std::ios::binary);
  std::ofstream evals(out_dir / "evals.jsonl", std::ios::binary);
  if (!csv || !evals) throw std::runtime_error("cannot open run outputs in " + out_dir.string());
  csv << metrics_csv_header() << '\n';

  RunSummary summary;
  summary.name = config.name;
  summary.rule = config.train.rule.label();
  summary.seed = config.train.seed;
  summary.k = config.train.eval_k;
  std::vector<double> returns;
  std::vector<double> entropies;
  bool have_eval = false;
  const int total = config.train.steps;
  for (int s = 1; s <= total; ++s) {
    MetricsRow row;
    try {
      row = trainer.step();
    } catch (const TrainingError& e) {
      write_text(out_dir / "diagnostics.json", e.diagnostics() + "\n");
      throw;
    }
    csv << metrics_csv_line(row) << '\n';
    returns.push_back(row.mean_return);
    entropies.push_back(row.entropy);
    if (s % config.train.eval_every == 0 || s == total) {
      const auto report = trainer.evaluate();
      evals << report.to_json().dump() << '\n';
      char name[64];
      std::snprintf(name, sizeof(name), "step_%06d.json", s);
      write_text(out_dir / "checkpoints" / name, trainer.policy().to_json().dump() + "\n");
      summary.final_eval = {report.mean_at_k, report.pass_at_k};
      summary.best_eval.mean_at_k =
          have_eval ? std::max(summary.best_eval.mean_at_k, report.mean_at_k) : report.mean_at_k;
      summary.best_eval.pass_at_k =
          have_eval ? std::max(summary.best_eval.pass_at_k, report.pass_at_k) : report.pass_at_k;
      have_eval = true;
      spdlog::info("[{}] step {} mean@{}={:.4f} pass@{}={:.4f}", config.name, s, report.k, report.mean_at_k,
                   report.k, report.pass_at_k);
    }
  }
  summary.steps = trainer.steps_done();
  // Trailing 100-step averages, matching the chart smoothing.
  const std::size_t window = std::min<std::size_t>(100, returns.size());
  for (std::size_t i = returns.size() - window; i < returns.size(); ++i) {
    summary.final_return += returns[i] / static_cast<double>(window);
    summary.final_entropy += entropies[i] / static_cast<double>(window);
  }
  write_text(out_dir / "summary.json", summary.to_json().dump(2) + "\n");
  return summary;
}

std::vector<SweepEntry> sweep(std::span<const RunConfig> configs, std::span<const std::uint64_t> seeds,
                              const std::filesystem::path& out_dir, int jobs) {
  if (configs.empty() || seeds.empty()) throw ContractError("sweep needs at least one config and one seed");
  std::map<std::string, int> seen;
  std::vector<SweepEntry> entries;
  std::vector<RunConfig> runs;
  for (const auto& c : configs) {
    std::string name = c.name;
    if (const int n = seen[c.name]++; n > 0) name += "_" + std::to_string(n);
    for (auto seed : seeds) {
      RunConfig run = c;
      run.name = name;
      run.train.seed = seed;
      entries.push_back({name, seed, out_dir / name / ("seed_" + std::to_string(seed)), std::nullopt, {}});
      runs.push_back(std::move(run));
    }
  }

  const auto n = static_cast<std::ptrdiff_t>(runs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(jobs, 1))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      entries[i].summary = run_training(runs[i], entries[i].dir);
    } catch (const std::exception& e) {
      entries[i].error = e.what();
    }
  }

  nlohmann::json table = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json j{{"name", e.name}, {"seed", e.seed}, {"dir", e.dir.lexically_relative(out_dir).string()}};
    if (e.summary) {
      j["status"] = "ok";
      j["summary"] = e.summary->to_json();
    } else {
      j["status"] = "error";
      j["error"] = e.error;
    }
    table.push_back(j);
  }
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "summary.json", nlohmann::json{{"runs", table}}.dump(2) + "\n");
  return entries;
}

}  // namespace clipbench
