/*
 * Copyright 2026 The RNF Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "rnf/reports.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace rnf::reports {
namespace {

std::string Optional(const std::optional<double>& v) {
  return v ? FormatNumber(*v) : "";
}

std::string If(bool present, double v) { return present ? FormatNumber(v) : ""; }

}  // namespace

std::string FormatNumber(double value) {
  if (std::isnan(value)) return "";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

std::string MetricsRow(const pipeline::RunRecord& r) {
  std::string row = r.run_id + "," + pipeline::MethodName(r.method) + "," +
                    std::to_string(r.seed) + "," + If(r.has_alpha, r.alpha) +
                    "," + If(r.has_beta, r.beta) + "," + If(r.has_q, r.q) + "," +
                    If(r.has_gamma, r.gamma) + "," +
                    If(r.has_temperature, r.temperature) + ",";
  if (!r.error.empty()) return row + ",,,,,failed";
  const auto& m = r.metrics;
  row += FormatNumber(m.accuracy) + "," + Optional(m.dp) + "," +
         Optional(m.delta_eo) + "," + Optional(m.confidence.gap_desired) + "," +
         Optional(m.confidence.gap_undesired) + "," + m.undefined_flags;
  return row;
}

std::string MetricsCsv(std::span<const pipeline::RunRecord> records) {
  if (records.empty()) throw std::invalid_argument("no run records to report");
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : records) out += MetricsRow(r) + "\n";
  return out;
}

std::string CurveCsv(std::span<const pipeline::CurvePoint> points) {
  std::string out = std::string(kCurveHeader) + "\n";
  for (const auto& p : points) {
    out += p.method + "," + FormatNumber(p.param) + "," +
           FormatNumber(p.mean_acc) + "," + FormatNumber(p.std_acc) + "," +
           FormatNumber(p.mean_dp) + "," + FormatNumber(p.std_dp) + "," +
           FormatNumber(p.mean_eo) + "," + FormatNumber(p.std_eo) + "," +
           std::to_string(p.n) + "\n";
  }
  return out;
}

std::string CurveSvg(std::span<const pipeline::CurvePoint> points) {
  constexpr double kW = 360, kH = 300, kPad = 40;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  std::map<std::string, std::vector<const pipeline::CurvePoint*>> by_method;
  for (const auto& p : points) by_method[p.method].push_back(&p);

  auto panel = [&](double x0, const char* label, auto value) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& p : points) {
      const double y = value(p);
      if (std::isnan(p.mean_acc) || std::isnan(y)) continue;
      xmin = std::min(xmin, p.mean_acc);
      xmax = std::max(xmax, p.mean_acc);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
    if (!(xmax >= xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax - xmin < 1e-9) xmin -= 0.01, xmax += 0.01;
    if (ymax - ymin < 1e-9) ymin -= 0.01, ymax += 0.01;
    auto sx = [&](double v) { return x0 + kPad + (v - xmin) / (xmax - xmin) * (kW - 2 * kPad); };
    auto sy = [&](double v) { return kH - kPad - (v - ymin) / (ymax - ymin) * (kH - 2 * kPad); };
    std::string s = "<g>\n";
    s += "<rect x=\"" + FormatNumber(x0 + kPad) + "\" y=\"" + FormatNumber(kPad) +
         "\" width=\"" + FormatNumber(kW - 2 * kPad) + "\" height=\"" +
         FormatNumber(kH - 2 * kPad) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    s += "<text x=\"" + FormatNumber(x0 + kW / 2) + "\" y=\"" +
         FormatNumber(kH - 8) + "\" text-anchor=\"middle\">accuracy</text>\n";
    s += "<text x=\"" + FormatNumber(x0 + 10) + "\" y=\"" + FormatNumber(kPad - 10) +
         "\">" + label + "</text>\n";
    size_t color = 0;
    for (const auto& [method, series] : by_method) {
      const char* c = kColors[color++ % 6];
      std::string line;
      for (const auto* p : series) {
        const double y = value(*p);
        if (std::isnan(p->mean_acc) || std::isnan(y)) continue;
        const std::string px = FormatNumber(sx(p->mean_acc));
        const std::string py = FormatNumber(sy(y));
        line += px + "," + py + " ";
        s += "<circle cx=\"" + px + "\" cy=\"" + py + "\" r=\"3\" fill=\"" + c +
             "\"/>\n";
      }
      s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + c +
           "\"><title>" + method + "</title></polyline>\n";
    }
    return s + "</g>\n";
  };

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + FormatNumber(2 * kW) +
      "\" height=\"" + FormatNumber(kH) + "\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n";
  svg += panel(0, "DP", [](const pipeline::CurvePoint& p) { return p.mean_dp; });
  svg += panel(kW, "delta EO",
               [](const pipeline::CurvePoint& p) { return p.mean_eo; });
  return svg + "</svg>\n";
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace rnf::reports
