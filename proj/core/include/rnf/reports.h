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

// Metrics and curve CSVs plus a minimal SVG plot of fairness-accuracy curves.
// Undefined values serialize as empty fields. Column order is stable; new
// columns are only ever appended.

#ifndef RNF_REPORTS_H_
#define RNF_REPORTS_H_

#include <filesystem>
#include <span>
#include <string>

#include "rnf/pipeline.h"

namespace rnf::reports {

inline constexpr char kMetricsHeader[] =
    "run_id,method,seed,alpha,beta,q,gamma,T,accuracy,dp,delta_eo,gap1,gap2,"
    "undefined_flags";
inline constexpr char kCurveHeader[] =
    "method,param,mean_acc,std_acc,mean_dp,std_dp,mean_eo,std_eo,n";

// Shortest decimal that round-trips; empty for NaN.
std::string FormatNumber(double value);

std::string MetricsRow(const pipeline::RunRecord& record);
// Header plus one row per record. Throws std::invalid_argument when empty.
std::string MetricsCsv(std::span<const pipeline::RunRecord> records);
std::string CurveCsv(std::span<const pipeline::CurvePoint> points);
// Two panels: (accuracy, DP) and (accuracy, delta-EO), one polyline per method.
std::string CurveSvg(std::span<const pipeline::CurvePoint> points);

void WriteText(const std::filesystem::path& path, const std::string& text);

}  // namespace rnf::reports

#endif  // RNF_REPORTS_H_
