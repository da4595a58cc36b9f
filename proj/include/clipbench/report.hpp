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

#ifndef CLIPBENCH_REPORT_HPP_
#define CLIPBENCH_REPORT_HPP_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clipbench/trainer.hpp"
#include "json.hpp"

namespace clipbench {

// One training run as read back from its output directory.
struct RunRecord {
  std::string label;
  std::filesystem::path dir;
  std::vector<MetricsRow> rows;
  std::vector<EvalReport> evals;
};

// Reads metrics.csv (required) and evals.jsonl (optional). ConfigError on a
// missing or malformed CSV.
RunRecord load_run(const std::filesystem::path& dir);

// Directories below `root` (inclusive) that hold a metrics.csv, sorted.
std::vector<std::filesystem::path> find_run_dirs(const std::filesystem::path& root);

// Trailing moving average; the first window-1 points average what exists.
std::vector<double> moving_average(std::span<const double> values, int window);

struct ChartSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Self-contained SVG line chart, one polyline per series.
std::string render_line_chart(const std::string& title, const std::string& y_label,
                              std::span<const ChartSeries> series);

struct SummaryRow {
  std::string label;
  int k = 0;
  std::optional<double> mean_final;
  std::optional<double> mean_best;
  std::optional<double> pass_final;
  std::optional<double> pass_best;
  double return_smoothed = 0.0;
  double entropy_smoothed = 0.0;
};

// final = last eval, best = column maximum over evals; smoothed values are
// the last point of the moving average.
SummaryRow summarize(const RunRecord& run, int smooth_window);

// "final (best)" table.
std::string summary_table(std::span<const SummaryRow> rows);
nlohmann::json summary_json(std::span<const SummaryRow> rows);

struct ReportResult {
  std::vector<std::filesystem::path> charts;
  std::vector<SummaryRow> rows;
  // One message per run directory that could not be read.
  std::vector<std::string> errors;
};

// Writes return.svg, entropy.svg, clip_frac.svg, mean_kl3.svg, summary.json
// and summary.txt into `out_dir`. Return and entropy are smoothed. Nothing
// is written when no run could be read.
ReportResult write_report(std::span<const std::filesystem::path> run_dirs, const std::filesystem::path& out_dir,
                          int smooth_window = 100);

}  // namespace clipbench

#endif  // CLIPBENCH_REPORT_HPP_
