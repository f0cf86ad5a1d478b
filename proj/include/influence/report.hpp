// Copyright 2026 The Influence Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "influence/corpus.hpp"
#include "influence/ensemble.hpp"
#include "influence/preprocess.hpp"

namespace influence::report {

inline constexpr int kSchemaVersion = 1;

// Round half away from zero at two decimals, applied to the exact binary
// value. "20.328" -> "20.33", "-0.125" -> "-0.13".
std::string format_2dp(double value);
double round_2dp(double value);

struct ModelColumn {
  std::string name;
  std::string identifier;
};

struct PrecedenceEntry {
  std::string influencer;
  std::string influencee;
  corpus::DateRange influencer_dates;
  corpus::DateRange influencee_dates;
  corpus::PrecedenceRelation relation;
};

struct AnalysisReport {
  std::string config_hash;
  std::vector<ModelColumn> models;  // same order as the score table
  std::string strategy;
  std::string pooling;  // "model-default", "mean" or "cls"
  ensemble::ScoreTable scores;
  std::optional<ensemble::ScoreTable> lateral;
  std::vector<PrecedenceEntry> precedence;
  std::vector<preprocess::PreprocessReport> preprocessing;
  std::vector<std::string> caveats;
  // Wall-clock times; written only to the run_meta.json sidecar.
  std::string started_at;
  std::string finished_at;
};

// One row per model plus Average, Maximum, Minimum and Range rows; one column
// per influencer.
std::string target_csv(const AnalysisReport& report, const ensemble::ScoreTable& table, std::string_view target);

// Everything in the report, derived statistics and votes included. Numbers
// keep full precision.
nlohmann::json to_json(const AnalysisReport& report, const std::vector<std::pair<std::string, std::string>>& artifacts = {});
AnalysisReport report_from_json(const nlohmann::json& j);

struct RadarSeries {
  std::string name;
  std::vector<double> values;  // one per axis, percent
};

struct RadarChartSpec {
  std::string title;
  std::vector<std::string> axes;
  std::vector<RadarSeries> series;
};

RadarChartSpec radar_for(const ensemble::ScoreTable& table, std::string_view target, std::string title);
// 0 to the next multiple of 10 at or above the largest value (10 if none is
// positive).
double radial_max(const RadarChartSpec& spec);
std::string render_radar_svg(const RadarChartSpec& spec);

std::string render_summary(const AnalysisReport& report);

// File names used inside a report directory.
std::string csv_name(std::string_view target);
std::string svg_name(std::string_view target);
inline constexpr std::string_view kJsonName = "report.json";
inline constexpr std::string_view kSummaryName = "summary.md";
inline constexpr std::string_view kRunMetaName = "run_meta.json";
inline constexpr std::string_view kLateralCsvName = "lateral.csv";
inline constexpr std::string_view kLateralSvgName = "radar_lateral.svg";

// Writes the CSV tables and report.json (listing `extra_artifacts` plus the
// CSVs with their digests). Throws IncompleteGrid before writing anything when
// a table has holes. Returns the written file names.
std::vector<std::string> emit_tables(const AnalysisReport& report, const std::filesystem::path& dir,
                                     std::vector<std::pair<std::string, std::string>> extra_artifacts = {});
std::filesystem::path emit_radar_svg(const RadarChartSpec& spec, const std::filesystem::path& file);
std::filesystem::path emit_summary(const AnalysisReport& report, const std::filesystem::path& dir);

// Radar charts, summary, tables and JSON, then the timestamp sidecar.
std::vector<std::string> emit_report(const AnalysisReport& report, const std::filesystem::path& dir);

}  // namespace influence::report
