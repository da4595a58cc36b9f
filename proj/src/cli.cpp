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

#include "clipbench/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "clipbench/divergence.hpp"
#include "clipbench/errors.hpp"
#include "clipbench/ranges.hpp"
#include "clipbench/report.hpp"
#include "clipbench/trainer.hpp"
#include "clipbench/verify.hpp"

namespace clipbench {
namespace {

namespace fs = std::filesystem;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

int cmd_ranges(double delta, const std::string& format, std::ostream& out, std::ostream& err) {
  ClipRange range;
  try {
    range = solve_kl3_range(delta);
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  const double res_l = std::abs(kl3(range.lower) - delta);
  const double res_u = std::abs(kl3(range.upper) - delta);
  const char* path = delta < kSmallDelta ? "small_delta" : "lambert";
  if (format == "json") {
    out << nlohmann::json{{"delta", delta},
                          {"lower", range.lower},
                          {"upper", range.upper},
                          {"lower_gap", 1.0 - range.lower},
                          {"upper_gap", range.upper - 1.0},
                          {"residual_lower", res_l},
                          {"residual_upper", res_u},
                          {"path", path}}
               .dump(2)
        << '\n';
    return kExitOk;
  }
  out << "delta            " << delta << '\n'
      << "l                " << fixed(range.lower, 13) << "  (" << fixed(range.lower, 3) << ")\n"
      << "u                " << fixed(range.upper, 13) << "  (" << fixed(range.upper, 3) << ")\n"
      << "1 - l            " << fixed(1.0 - range.lower, 13) << "  (" << fixed(1.0 - range.lower, 3) << ")\n"
      << "u - 1            " << fixed(range.upper - 1.0, 13) << "  (" << fixed(range.upper - 1.0, 3) << ")\n"
      << "|kl3(l) - delta| " << sci(res_l) << '\n'
      << "|kl3(u) - delta| " << sci(res_u) << '\n'
      << "path             " << path << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& which, std::uint64_t seed, const std::string& out_path, std::ostream& out) {
  const auto reports = run_verification(theorem_selection_from_string(which), seed);
  nlohmann::json doc = nlohmann::json::array();
  bool pass = true;
  for (const auto& r : reports) {
    spdlog::info("{}: {} (max_abs_err {:.3e})", r.theorem, r.pass ? "pass" : "FAIL", r.max_abs_err);
    doc.push_back(r.to_json());
    pass &= r.pass;
  }
  const std::string text = doc.dump(2) + "\n";
  out << text;
  if (!out_path.empty()) {
    std::ofstream os(out_path, std::ios::binary);
    os << text;
    if (!os) throw std::runtime_error("cannot write " + out_path);
  }
  return pass ? kExitOk : kExitVerificationFailed;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const auto config = RunConfig::from_json(read_json_file(config_path));
  const fs::path dir = !out_dir.empty() ? fs::path(out_dir) : config.output;
  if (dir.empty()) throw ConfigError("no output directory: pass --out or set \"output\"");
  try {
    const auto summary = run_training(config, dir);
    out << summary.to_json().dump(2) << '\n';
  } catch (const TrainingError& e) {
    err << "training error: " << e.what() << "\ndiagnostics: " << (dir / "diagnostics.json").string() << '\n';
    return kExitTrainingError;
  }
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, int jobs, std::ostream& out,
              std::ostream& err) {
  const auto doc = read_json_file(config_path);
  if (!doc.is_object()) throw ConfigError("sweep config must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "output" && key != "seeds" && key != "runs") throw ConfigError("unknown key '" + key + "' in sweep");
  }
  if (!doc.contains("runs") || !doc.at("runs").is_array() || doc.at("runs").empty()) {
    throw ConfigError("sweep needs a non-empty 'runs' array");
  }
  std::vector<RunConfig> runs;
  for (const auto& r : doc.at("runs")) runs.push_back(RunConfig::from_json(r));
  std::vector<std::uint64_t> seeds{0};
  if (doc.contains("seeds")) {
    try {
      seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("'seeds' must be a list of non-negative integers");
    }
    if (seeds.empty()) throw ConfigError("'seeds' must not be empty");
  }
  fs::path dir = out_dir;
  if (dir.empty() && doc.contains("output")) dir = doc.at("output").get<std::string>();
  if (dir.empty()) throw ConfigError("no output directory: pass --out or set \"output\"");
  if (jobs < 1) throw ConfigError("--jobs must be positive");

  const auto entries = sweep(runs, seeds, dir, jobs);
  int failed = 0;
  for (const auto& e : entries) {
    if (!e.summary) {
      ++failed;
      err << e.name << " seed " << e.seed << ": " << e.error << '\n';
    }
  }
  out << "sweep: " << entries.size() - failed << " of " << entries.size() << " runs finished, summary in "
      << (dir / "summary.json").string() << '\n';
  return failed == 0 ? kExitOk : kExitTrainingError;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir, int window, std::ostream& out,
               std::ostream& err) {
  std::vector<fs::path> dirs;
  for (const auto& in : inputs) {
    const auto found = find_run_dirs(in);
    if (found.empty()) {
      dirs.emplace_back(in);
    } else {
      dirs.insert(dirs.end(), found.begin(), found.end());
    }
  }
  const auto result = write_report(dirs, out_dir, window);
  for (const auto& e : result.errors) err << "skipped: " << e << '\n';
  if (result.rows.empty()) {
    err << "error: no readable run directories\n";
    return kExitConfigError;
  }
  out << summary_table(result.rows);
  for (const auto& c : result.charts) out << "wrote " << c.string() << '\n';
  return kExitOk;
}

}  // namespace

void configure_logging() {
  auto logger = std::make_shared<spdlog::logger>("clipbench", std::make_shared<spdlog::sinks::stderr_color_sink_mt>());
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("CLIPBENCH_LOG")) {
    const std::string v = env;
    if (v == "error") level = spdlog::level::err;
    else if (v == "debug") level = spdlog::level::debug;
  }
  logger->set_level(level);
  spdlog::set_default_logger(logger);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"clipbench: clipping rules, KL3 ranges, verification and toy GRPO training"};
  app.require_subcommand(1);

  double delta = 0.0;
  std::string format = "text";
  auto* ranges = app.add_subcommand("ranges", "KL3 clipping range for a threshold delta");
  ranges->add_option("--delta", delta, "KL3 threshold")->required();
  ranges->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));

  std::string which = "all";
  std::uint64_t seed = 0;
  std::string verify_out;
  auto* verify = app.add_subcommand("verify", "Numerical checks of the four theorems");
  verify->add_option("--which", which, "all, t1, t2, t3 or t4")->check(CLI::IsMember({"all", "t1", "t2", "t3", "t4"}));
  verify->add_option("--seed", seed, "RNG seed");
  verify->add_option("--out", verify_out, "Also write the JSON reports here");

  std::string config_path, out_dir;
  auto* train = app.add_subcommand("train", "One training run from a JSON config");
  train->add_option("--config", config_path, "Run config (JSON)")->required();
  train->add_option("--out", out_dir, "Output directory (overrides the config)");

  int jobs = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "Runs x seeds from a sweep config");
  sweep_cmd->add_option("--config", config_path, "Sweep config (JSON)")->required();
  sweep_cmd->add_option("--out", out_dir, "Output directory (overrides the config)");
  sweep_cmd->add_option("--jobs", jobs, "Concurrent runs");

  std::vector<std::string> run_dirs;
  int window = 100;
  std::string report_out = "report";
  auto* report = app.add_subcommand("report", "SVG charts and a final (best) summary from run directories");
  report->add_option("runs", run_dirs, "Run or sweep directories")->required();
  report->add_option("--out", report_out, "Output directory");
  report->add_option("--smooth-window", window, "Moving-average window");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*ranges) return cmd_ranges(delta, format, out, err);
    if (*verify) return cmd_verify(which, seed, verify_out, out);
    if (*train) return cmd_train(config_path, out_dir, out, err);
    if (*sweep_cmd) return cmd_sweep(config_path, out_dir, jobs, out, err);
    if (*report) return cmd_report(run_dirs, report_out, window, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const ContractError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const ResourceError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const TrainingError& e) {
    err << "training error: " << e.what() << '\n';
    return kExitTrainingError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitTrainingError;
  }
  return kExitConfigError;
}

int run_cli(int argc, char** argv) {
  configure_logging();
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace clipbench
