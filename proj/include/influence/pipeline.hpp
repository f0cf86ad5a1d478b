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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "influence/embed.hpp"
#include "influence/similarity.hpp"

namespace influence::pipeline {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr std::string_view kCacheDirEnv = "INFLUENCE_CACHE_DIR";

// A run specification. Relative paths in the file resolve against the
// directory holding it.
//
//   schema_version = 1
//   [corpus]
//   manifest = "corpus.toml"
//   split = true
//   split_marker = "HAVE ADOPTED THIS REGULATION:"
//   strip_structure = false
//   [preprocess]
//   annotations = ["annotations.tsv"]
//   lexicons = ["lexicon.tsv"]
//   [models]
//   names = ["reference"]
//   bundles_dir = "bundles"        # holds one directory per identifier
//   pooling = "mean"               # optional override
//   [scoring]
//   strategy = "pair-mean"
//   lateral = true
//   write_matrices = false
//   [run]
//   output_dir = "out"
//   strict_precedence = true
//   cache_dir = "cache"            # optional; else $INFLUENCE_CACHE_DIR
//   threads = 1
struct AnalysisConfig {
  std::filesystem::path source;  // the config file, if any
  std::filesystem::path manifest;
  bool split = true;
  std::string split_marker;
  bool strip_structure = false;
  std::vector<std::filesystem::path> annotations;
  std::vector<std::filesystem::path> lexicons;
  std::vector<std::string> models;  // registry names, in table order
  std::filesystem::path bundles_dir;
  std::optional<embed::Pooling> pooling;
  similarity::AggregationStrategy strategy;
  bool lateral = true;
  bool write_matrices = false;
  std::filesystem::path output_dir;
  bool strict_precedence = true;
  std::optional<std::filesystem::path> cache_dir;
  std::size_t threads = 1;

  // Digest of every setting that can change results. Paths, thread count
  // and cache location are excluded.
  std::string hash() const;
};

AnalysisConfig parse_config(std::string_view toml, const std::filesystem::path& base_dir);
AnalysisConfig load_config(const std::filesystem::path& path);
// Checks referenced paths and model names. Throws MissingFile, UnknownModel
// or ConfigInvalid.
void validate(const AnalysisConfig& config);

enum class Stage { Preprocess, Embed, Score, Ensemble, Report };
std::string_view stage_name(Stage stage);
Stage parse_stage(std::string_view name);

// Run directory layout under output_dir:
//   run.json
//   preprocess/  documents.json parts.json texts/<part>.txt
//   embed/       <model>.json <model>/<part>.emb [reference.vocab]
//   score/       scores.json [matrices/<model>/<a>__<b>.csv]
//   ensemble/    ensemble.json
//   report/      scores_<target>.csv lateral.csv radar_*.svg summary.md report.json run_meta.json
// Every stage reads its inputs from the run directory and throws
// MissingUpstreamArtifact when they are absent.
void run_stage(const AnalysisConfig& config, Stage stage);
void run_all(const AnalysisConfig& config);

}  // namespace influence::pipeline
