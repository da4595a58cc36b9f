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

#include "clipbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "clipbench/errors.hpp"

namespace clipbench {
namespace {

namespace fs = std::filesystem;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

// Round-number tick positions covering [lo, hi].
std::vector<double> ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return out;
}

std::string run_label(const fs::path& dir) {
  std::ifstream is(dir / "config.json");
  if (is) {
    try {
      const auto j = nlohmann::json::parse(is);
      const auto name = j.at("name").get<std::string>();
      const auto seed = j.at("train").at("seed").get<std::uint64_t>();
      return name + "/seed_" + std::to_string(seed);
    } catch (const std::exception&) {
      // Fall back to the directory name.
    }
  }
  return dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
}

std::string format_cell(const std::optional<double>& final_v, const std::optional<double>& best_v) {
  if (!final_v) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f (%.3f)", *final_v, *best_v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

RunRecord load_run(const fs::path& dir) {
  RunRecord run;
  run.dir = dir;
  run.label = run_label(dir);
  std::ifstream csv(dir / "metrics.csv");
  if (!csv) throw ConfigError(dir.string() + ": missing metrics.csv");
  std::string line;
  if (!std::getline(csv, line) || line != metrics_csv_header()) {
    throw ConfigError(dir.string() + ": metrics.csv has an unexpected header");
  }
  int lineno = 1;
  while (std::getline(csv, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      run.rows.push_back(parse_metrics_csv_line(line));
    } catch (const ConfigError& e) {
      throw ConfigError(dir.string() + ": metrics.csv line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (run.rows.empty()) throw ConfigError(dir.string() + ": metrics.csv has no data rows");

  std::ifstream evals(dir / "evals.jsonl");
  lineno = 0;
  while (evals && std::getline(evals, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EvalReport r;
      r.step = j.at("step").get<int>();
      r.k = j.at("K").get<int>();
      r.temperature = j.at("temperature").get<double>();
      r.mean_at_k = j.at("mean_at_k").get<double>();
      r.pass_at_k = j.at("pass_at_k").get<double>();
      run.evals.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(dir.string() + ": evals.jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return run;
}

std::vector<fs::path> find_run_dirs(const fs::path& root) {
  std::vector<fs::path> out;
  if (fs::exists(root / "metrics.csv")) out.push_back(root);
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_directory() && fs::exists(entry.path() / "metrics.csv")) out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> moving_average(std::span<const double> values, int window) {
  if (window < 1) throw ContractError("moving_average: window must be positive");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= static_cast<std::size_t>(window)) sum -= values[i - window];
    const std::size_t n = std::min<std::size_t>(i + 1, window);
    out[i] = sum / static_cast<double>(n);
  }
  return out;
}

std::string render_line_chart(const std::string& title, const std::string& y_label,
                              std::span<const ChartSeries> series) {
  constexpr double kW = 760, kH = 440, kLeft = 70, kRight = 190, kTop = 40, kBottom = 50;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      if (first) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        first = false;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) {
    y0 -= 0.5;
    y1 += 0.5;
  } else {
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
  }
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kW) << "\" height=\"" << num(kH)
     << "\" viewBox=\"0 0 " << num(kW) << ' ' << num(kH) << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
     << xml_escape(title) << "</text>\n";
  os << "<g stroke=\"#ddd\" stroke-width=\"1\">\n";
  const auto xt = ticks(x0, x1);
  const auto yt = ticks(y0, y1);
  for (double t : xt) os << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(px(t))
                         << "\" y2=\"" << num(kTop + ph) << "\"/>\n";
  for (double t : yt) os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(py(t)) << "\" x2=\""
                         << num(kLeft + pw) << "\" y2=\"" << num(py(t)) << "\"/>\n";
  os << "</g>\n";
  os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\""
     << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : xt) os << "<text x=\"" << num(px(t)) << "\" y=\"" << num(kTop + ph + 18)
                         << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  for (double t : yt) os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(t) + 4)
                         << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kH - 10) << "\" text-anchor=\"middle\">step</text>\n"
     << "<text x=\"16\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << num(kTop + ph / 2) << ")\">" << xml_escape(y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool sep = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      os << (sep ? " " : "") << num(px(s.x[i])) << ',' << num(py(s.y[i]));
      sep = true;
    }
    os << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << num(kLeft + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + pw + 32)
       << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << num(kLeft + pw + 38) << "\" y=\"" << num(ly + 4) << "\">" << xml_escape(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

SummaryRow summarize(const RunRecord& run, int smooth_window) {
  SummaryRow row;
  row.label = run.label;
  if (!run.evals.empty()) {
    row.k = run.evals.back().k;
    row.mean_final = run.evals.back().mean_at_k;
    row.pass_final = run.evals.back().pass_at_k;
    double mb = run.evals.front().mean_at_k;
    double pb = run.evals.front().pass_at_k;
    for (const auto& e : run.evals) {
      mb = std::max(mb, e.mean_at_k);
      pb = std::max(pb, e.pass_at_k);
    }
    row.mean_best = mb;
    row.pass_best = pb;
  }
  std::vector<double> ret, ent;
  for (const auto& r : run.rows) {
    ret.push_back(r.mean_return);
    ent.push_back(r.entropy);
  }
  row.return_smoothed = moving_average(ret, smooth_window).back();
  row.entropy_smoothed = moving_average(ent, smooth_window).back();
  return row;
}

std::string summary_table(std::span<const SummaryRow> rows) {
  std::size_t width = 3;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s  %-15s  %-15s  %8s  %8s\n", static_cast<int>(width), "run",
                "Mean@K", "Pass@K", "return", "entropy");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s  %-15s  %-15s  %8.4f  %8.4f\n", static_cast<int>(width), r.label.c_str(),
                  format_cell(r.mean_final, r.mean_best).c_str(), format_cell(r.pass_final, r.pass_best).c_str(),
                  r.return_smoothed, r.entropy_smoothed);
    os << buf;
  }
  os << "Mean@K / Pass@K shown as final (best); return and entropy are the last smoothed values.\n";
  return os.str();
}

nlohmann::json summary_json(std::span<const SummaryRow> rows) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"run", r.label},
                   {"K", r.k},
                   {"mean_at_k", {{"final", opt(r.mean_final)}, {"best", opt(r.mean_best)}}},
                   {"pass_at_k", {{"final", opt(r.pass_final)}, {"best", opt(r.pass_best)}}},
                   {"return_smoothed", r.return_smoothed},
                   {"entropy_smoothed", r.entropy_smoothed}});
  }
  return out;
}

ReportResult write_report(std::span<const fs::path> run_dirs, const fs::path& out_dir, int smooth_window) {
  if (smooth_window < 1) throw ConfigError("smooth window must be positive");
  ReportResult result;
  std::vector<RunRecord> runs;
  for (const auto& dir : run_dirs) {
    try {
      runs.push_back(load_run(dir));
    } catch (const std::exception& e) {
      result.errors.push_back(e.what());
    }
  }
  if (runs.empty()) return result;
  fs::create_directories(out_dir);

  struct Metric {
    const char* file;
    const char* title;
    double MetricsRow::*field;
    bool smooth;
  };
  const Metric metrics[] = {{"return.svg", "Return", &MetricsRow::mean_return, true},
                            {"entropy.svg", "Entropy", &MetricsRow::entropy, true},
                            {"clip_frac.svg", "Clip fraction", &MetricsRow::clip_frac, false},
                            {"mean_kl3.svg", "Mean kl3 per token", &MetricsRow::mean_kl3, false}};
  for (const auto& m : metrics) {
    std::vector<ChartSeries> series;
    for (const auto& run : runs) {
      ChartSeries s;
      s.label = run.label;
      for (const auto& row : run.rows) {
        s.x.push_back(row.step);
        s.y.push_back(row.*(m.field));
      }
      if (m.smooth) s.y = moving_average(s.y, smooth_window);
      series.push_back(std::move(s));
    }
    std::string title = m.title;
    if (m.smooth) title += " (" + std::to_string(smooth_window) + "-step moving average)";
    write_file(out_dir / m.file, render_line_chart(title, m.title, series));
    result.charts.push_back(out_dir / m.file);
  }
  for (const auto& run : runs) result.rows.push_back(summarize(run, smooth_window));
  nlohmann::json errors = result.errors;
  write_file(out_dir / "summary.json",
             nlohmann::json{{"runs", summary_json(result.rows)}, {"errors", errors}}.dump(2) + "\n");
  write_file(out_dir / "summary.txt", summary_table(result.rows));
  return result;
}

}  // namespace clipbench
