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

#include "clipbench/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include "clipbench/errors.hpp"
#include "clipbench/kernels.hpp"
#include "clipbench/rng.hpp"

namespace clipbench {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const char* where) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(std::string("unknown key '") + key + "' in " + where);
    }
  }
}

template <class T>
T required(const nlohmann::json& j, const char* key, const char* where) {
  if (!j.contains(key)) throw ConfigError(std::string("missing key '") + key + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("bad type for '") + key + "' in " + where);
  }
}

}  // namespace

// ---------------------------------------------------------------- TokenEnv

TokenEnv::TokenEnv(TokenEnvConfig config) : config_(std::move(config)) {
  const int vocab = config_.vocab_size;
  const int horizon = config_.horizon;
  if (vocab < 1) throw ConfigError("vocab_size must be positive");
  if (horizon < 1) throw ConfigError("horizon must be positive");
  if (config_.num_prompts < 1) throw ConfigError("num_prompts must be positive");
  if (config_.eos_token < -1 || config_.eos_token >= vocab) throw ConfigError("eos_token out of range");

  depth_offset_.assign(horizon + 1, 0);
  std::size_t level = 1;
  const auto cap = config_.state_cap;
  for (int t = 0; t < horizon; ++t) {
    depth_offset_[t + 1] = depth_offset_[t] + level;
    if (depth_offset_[t + 1] > cap) {
      throw ResourceError("state enumeration exceeds cap of " + std::to_string(cap));
    }
    if (t + 1 < horizon) level *= static_cast<std::size_t>(vocab);
  }
  states_per_prompt_ = depth_offset_[horizon];
  if (states_per_prompt_ * static_cast<std::size_t>(config_.num_prompts) > cap) {
    throw ResourceError("state enumeration exceeds cap of " + std::to_string(cap));
  }

  targets_.assign(config_.num_prompts, {});
  std::visit(Overloaded{
                 [&](const DigitSumVerifier& v) {
                   if (v.moduli.empty()) throw ConfigError("digit_sum verifier needs moduli");
                   for (int m : v.moduli) {
                     if (m < 1) throw ConfigError("digit_sum moduli must be positive");
                   }
                 },
                 [&](const TargetSequenceVerifier& v) {
                   if (v.match_lengths.empty()) throw ConfigError("target_sequence needs match_lengths");
                   for (int m : v.match_lengths) {
                     if (m < 1 || m > horizon) throw ConfigError("match_lengths must be in [1, horizon]");
                   }
                   if (config_.eos_token >= 0 && vocab < 2) throw ConfigError("no non-eos target token");
                   Rng rng(derive_seed({v.seed, 0x7a46u}));
                   for (int p = 0; p < config_.num_prompts; ++p) {
                     const int need = v.match_lengths[p % v.match_lengths.size()];
                     std::vector<int> target;
                     if (!v.targets.empty()) {
                       target = v.targets[p % v.targets.size()];
                       if (static_cast<int>(target.size()) < need) throw ConfigError("target shorter than match length");
                       for (int tok : target) {
                         if (tok < 0 || tok >= vocab || tok == config_.eos_token) {
                           throw ConfigError("target token out of range or eos");
                         }
                       }
                     } else {
                       for (int t = 0; t < horizon; ++t) {
                         int tok = rng.uniform_int(0, vocab - 1);
                         while (tok == config_.eos_token) tok = rng.uniform_int(0, vocab - 1);
                         target.push_back(tok);
                       }
                     }
                     targets_[p] = std::move(target);
                   }
                 },
             },
             config_.verifier);
}

std::size_t TokenEnv::root(int prompt) const {
  if (prompt < 0 || prompt >= config_.num_prompts) throw ContractError("prompt id out of range");
  return static_cast<std::size_t>(prompt) * states_per_prompt_;
}

std::size_t TokenEnv::state_id(int prompt, std::span<const int> prefix) const {
  if (static_cast<int>(prefix.size()) >= config_.horizon) throw ContractError("prefix too long");
  std::size_t index = 0;
  for (int tok : prefix) {
    if (tok < 0 || tok >= config_.vocab_size) throw ContractError("token out of range");
    index = index * config_.vocab_size + tok;
  }
  return root(prompt) + depth_offset_[prefix.size()] + index;
}

int TokenEnv::depth(std::size_t state) const {
  if (state >= num_states()) throw ContractError("state id out of range");
  const std::size_t local = state % states_per_prompt_;
  const auto it = std::upper_bound(depth_offset_.begin(), depth_offset_.end(), local);
  return static_cast<int>(it - depth_offset_.begin()) - 1;
}

int TokenEnv::prompt_of(std::size_t state) const {
  if (state >= num_states()) throw ContractError("state id out of range");
  return static_cast<int>(state / states_per_prompt_);
}

std::size_t TokenEnv::child(std::size_t state, int action) const {
  const int t = depth(state);
  if (t + 1 >= config_.horizon) throw ContractError("state has no successor at the horizon");
  if (action < 0 || action >= config_.vocab_size) throw ContractError("action out of range");
  const std::size_t base = state - state % states_per_prompt_;
  const std::size_t index = state % states_per_prompt_ - depth_offset_[t];
  return base + depth_offset_[t + 1] + index * config_.vocab_size + action;
}

double TokenEnv::reward(int prompt, std::span<const int> tokens) const {
  if (prompt < 0 || prompt >= config_.num_prompts) throw ContractError("prompt id out of range");
  return std::visit(Overloaded{
                        [&](const DigitSumVerifier& v) {
                          long sum = prompt;
                          for (int tok : tokens) sum += tok;
                          const int m = v.moduli[prompt % v.moduli.size()];
                          return sum % m == 0 ? 1.0 : 0.0;
                        },
                        [&](const TargetSequenceVerifier& v) {
                          const auto need = static_cast<std::size_t>(v.match_lengths[prompt % v.match_lengths.size()]);
                          if (tokens.size() < need) return 0.0;
                          const auto& target = targets_[prompt];
                          return std::equal(target.begin(), target.begin() + need, tokens.begin()) ? 1.0 : 0.0;
                        },
                    },
                    config_.verifier);
}

const std::vector<int>& TokenEnv::target(int prompt) const {
  if (prompt < 0 || prompt >= config_.num_prompts) throw ContractError("prompt id out of range");
  return targets_[prompt];
}

nlohmann::json TokenEnv::to_json() const {
  nlohmann::json verifier = std::visit(
      Overloaded{
          [](const DigitSumVerifier& v) { return nlohmann::json{{"kind", "digit_sum"}, {"moduli", v.moduli}}; },
          [](const TargetSequenceVerifier& v) {
            nlohmann::json j{{"kind", "target_sequence"}, {"match_lengths", v.match_lengths}, {"seed", v.seed}};
            if (!v.targets.empty()) j["targets"] = v.targets;
            return j;
          },
      },
      config_.verifier);
  return {{"vocab_size", config_.vocab_size}, {"horizon", config_.horizon},
          {"num_prompts", config_.num_prompts}, {"eos_token", config_.eos_token},
          {"state_cap", config_.state_cap}, {"verifier", verifier}};
}

TokenEnv TokenEnv::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("env config must be an object");
  reject_unknown_keys(j, {"vocab_size", "horizon", "num_prompts", "eos_token", "state_cap", "verifier"}, "env");
  TokenEnvConfig c;
  c.vocab_size = required<int>(j, "vocab_size", "env");
  c.horizon = required<int>(j, "horizon", "env");
  c.num_prompts = required<int>(j, "num_prompts", "env");
  if (j.contains("eos_token")) c.eos_token = required<int>(j, "eos_token", "env");
  if (j.contains("state_cap")) c.state_cap = required<std::size_t>(j, "state_cap", "env");
  const auto& v = j.contains("verifier") ? j.at("verifier") : throw ConfigError("missing key 'verifier' in env");
  if (!v.is_object()) throw ConfigError("verifier must be an object");
  const auto kind = required<std::string>(v, "kind", "verifier");
  if (kind == "digit_sum") {
    reject_unknown_keys(v, {"kind", "moduli"}, "verifier");
    c.verifier = DigitSumVerifier{required<std::vector<int>>(v, "moduli", "verifier")};
  } else if (kind == "target_sequence") {
    reject_unknown_keys(v, {"kind", "match_lengths", "seed", "targets"}, "verifier");
    TargetSequenceVerifier t;
    t.match_lengths = required<std::vector<int>>(v, "match_lengths", "verifier");
    if (v.contains("seed")) t.seed = required<std::uint64_t>(v, "seed", "verifier");
    if (v.contains("targets")) t.targets = required<std::vector<std::vector<int>>>(v, "targets", "verifier");
    c.verifier = std::move(t);
  } else {
    throw ConfigError("unknown verifier kind '" + kind + "'");
  }
  return TokenEnv(std::move(c));
}

// -------------------------------------------------------------- LogitTable

LogitTable::LogitTable(std::size_t states, int actions, double fill)
    : states_(states), actions_(actions), values_(states * static_cast<std::size_t>(actions), fill) {
  if (actions < 1) throw ContractError("LogitTable needs at least one action");
}

std::span<double> LogitTable::row(std::size_t s) {
  if (s >= states_) throw ContractError("state id out of range");
  return {values_.data() + s * actions_, static_cast<std::size_t>(actions_)};
}

std::span<const double> LogitTable::row(std::size_t s) const {
  if (s >= states_) throw ContractError("state id out of range");
  return {values_.data() + s * actions_, static_cast<std::size_t>(actions_)};
}

bool LogitTable::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

nlohmann::json LogitTable::to_json() const {
  return {{"shape", {states_, actions_}}, {"logits", values_}};
}

LogitTable LogitTable::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("logits")) {
    throw ConfigError("logit table JSON needs 'shape' and 'logits'");
  }
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2 || shape[1] < 1) throw ConfigError("logit table shape must be [states, actions]");
  LogitTable t(shape[0], static_cast<int>(shape[1]));
  auto values = j.at("logits").get<std::vector<double>>();
  if (values.size() != t.values_.size()) throw ConfigError("logit count does not match shape");
  t.values_ = std::move(values);
  if (!t.all_finite()) throw ConfigError("logits must be finite");
  return t;
}

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw ConfigError("truncated logit table file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

}  // namespace

void LogitTable::write_binary(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write("CLPT", 4);
  put_u64(os, states_);
  put_u64(os, static_cast<std::uint64_t>(actions_));
  for (double v : values_) put_u64(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

LogitTable LogitTable::read_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "CLPT") throw ConfigError("not a logit table file");
  const auto states = get_u64(is);
  const auto actions = get_u64(is);
  if (actions < 1 || actions > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
    throw ConfigError("bad action count in logit table file");
  }
  LogitTable t(states, static_cast<int>(actions));
  for (double& v : t.values_) v = std::bit_cast<double>(get_u64(is));
  return t;
}

// ------------------------------------------------------------- evaluation

void log_softmax(std::span<const double> logits, std::span<double> out, double temperature) {
  if (logits.size() != out.size() || logits.empty()) throw ContractError("log_softmax size mismatch");
  if (!(temperature > 0.0)) throw ContractError("temperature must be positive");
  const double inv_t = 1.0 / temperature;
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : logits) peak = std::max(peak, v * inv_t);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v * inv_t - peak);
  const double lse = peak + std::log(sum);
  for (std::size_t a = 0; a < logits.size(); ++a) out[a] = logits[a] * inv_t - lse;
}

void softmax(std::span<const double> logits, std::span<double> out, double temperature) {
  log_softmax(logits, out, temperature);
  for (double& v : out) v = std::exp(v);
}

std::vector<double> action_dist(const LogitTable& table, std::size_t state, double temperature) {
  std::vector<double> out(table.num_actions());
  softmax(table.row(state), out, temperature);
  return out;
}

double entropy(const LogitTable& table, std::size_t state) {
  std::vector<double> logp(table.num_actions());
  log_softmax(table.row(state), logp);
  double h = 0.0;
  for (double lp : logp) h -= std::exp(lp) * lp;
  return std::max(h, 0.0);
}

StateVisitation visitation_exact(const LogitTable& table, const TokenEnv& env) {
  if (table.num_states() != env.num_states() || table.num_actions() != env.vocab_size()) {
    throw ContractError("table shape does not match env");
  }
  std::vector<double> mass(env.num_states(), 0.0);
  std::vector<double> probs(env.vocab_size());
  const double prompt_mass = 1.0 / env.num_prompts();
  for (int p = 0; p < env.num_prompts(); ++p) {
    const std::size_t base = env.root(p);
    mass[base] = prompt_mass;
    // Depth-major layout: every parent precedes its children.
    for (std::size_t local = 0; local < env.states_per_prompt(); ++local) {
      const std::size_t s = base + local;
      if (mass[s] == 0.0 || env.depth(s) + 1 >= env.horizon()) continue;
      softmax(table.row(s), probs);
      for (int a = 0; a < env.vocab_size(); ++a) {
        if (a == env.eos_token()) continue;
        mass[env.child(s, a)] += mass[s] * probs[a];
      }
    }
  }
  double total = 0.0;
  for (double m : mass) total += m;
  for (double& m : mass) m /= total;
  return {std::move(mass)};
}

double mean_entropy(const LogitTable& table, const StateVisitation& d) {
  if (d.weights.size() != table.num_states()) throw ContractError("visitation size mismatch");
  double h = 0.0;
  for (std::size_t s = 0; s < table.num_states(); ++s) {
    if (d.weights[s] > 0.0) h += d.weights[s] * entropy(table, s);
  }
  return h;
}

Transcript rollout(const LogitTable& table, const TokenEnv& env, int prompt, std::uint64_t seed,
                   double temperature) {
  if (table.num_states() != env.num_states() || table.num_actions() != env.vocab_size()) {
    throw ContractError("table shape does not match env");
  }
  Rng rng(seed);
  Transcript tr;
  tr.prompt = prompt;
  std::vector<double> logp(env.vocab_size());
  std::size_t state = env.root(prompt);
  while (true) {
    log_softmax(table.row(state), logp, temperature);
    const double u = rng.uniform();
    double cum = 0.0;
    int pick = -1;
    for (int a = 0; a < env.vocab_size(); ++a) {
      const double pa = std::exp(logp[a]);
      cum += pa;
      if (pa > 0.0) pick = a;
      if (u < cum && pa > 0.0) break;
    }
    tr.states.push_back(state);
    tr.tokens.push_back(pick);
    tr.log_probs.push_back(logp[pick]);
    if (env.ends_completion(pick, static_cast<int>(tr.tokens.size()))) break;
    state = env.child(state, pick);
  }
  tr.reward = env.reward(prompt, tr.tokens);
  return tr;
}

double success_probability(const LogitTable& table, const TokenEnv& env, int prompt, double temperature) {
  if (table.num_states() != env.num_states() || table.num_actions() != env.vocab_size()) {
    throw ContractError("table shape does not match env");
  }
  std::vector<int> tokens;
  std::function<double(std::size_t, double)> walk = [&](std::size_t state, double mass) {
    std::vector<double> local(env.vocab_size());
    softmax(table.row(state), local, temperature);
    double total = 0.0;
    for (int a = 0; a < env.vocab_size(); ++a) {
      const double m = mass * local[a];
      if (m == 0.0) continue;
      tokens.push_back(a);
      if (env.ends_completion(a, static_cast<int>(tokens.size()))) {
        total += m * env.reward(prompt, tokens);
      } else {
        total += walk(env.child(state, a), m);
      }
      tokens.pop_back();
    }
    return total;
  };
  return walk(env.root(prompt), 1.0);
}

LogitTable exact_surrogate_gradient(const LogitTable& current, const LogitTable& old, const ClipRule& rule,
                                    const AdvantageTable& adv, const StateVisitation& d, SurrogateForm form) {
  return kernels::parallel::exact_gradient({current, old, rule, adv, d, form});
}

double exact_surrogate_objective(const LogitTable& current, const LogitTable& old, const ClipRule& rule,
                                 const AdvantageTable& adv, const StateVisitation& d, SurrogateForm form) {
  return kernels::parallel::exact_objective({current, old, rule, adv, d, form});
}

}  // namespace clipbench
