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

// Per-model score grids for three theories against the two Act parts and the
// lateral pairs, with the summary rows printed beside them (two decimals).

#include <array>
#include <string>
#include <vector>

#include "influence/ensemble.hpp"

// Published per-model score grids and their printed summary rows. Body
// cells are inputs; the summary rows are what compute_stats must reproduce.
namespace fixtures {

inline const std::vector<std::string> kModels = {"SBERT", "ALBERT", "DistilBERT", "RoBERTa", "TinyBERT"};
inline const std::vector<std::string> kTheories = {"virtue", "deontological", "consequentialism"};
inline const std::vector<std::string> kPairs = {"virtue~deontological", "virtue~consequentialism",
                                                "deontological~consequentialism"};

struct Grid {
  std::string target;
  std::vector<std::string> columns;
  std::array<std::array<double, 3>, 5> cells;  // model x column
  // Average, Maximum, Minimum, Range; one value per column.
  std::array<std::array<double, 3>, 4> printed;
};

inline const Grid kPreamble = {
    "preamble",
    kTheories,
    {{{18.80, 26.62, 11.73}, {15.05, 21.14, 18.09}, {36.13, 40.30, 36.76}, {14.34, 21.36, 15.88}, {17.32, 14.81, 26.48}}},
    {{{20.33, 24.85, 21.79}, {36.13, 40.30, 36.76}, {14.34, 14.81, 11.73}, {21.79, 25.49, 25.03}}},
};

inline const Grid kProvisions = {
    "provisions",
    kTheories,
    {{{9.92, 20.61, 2.26}, {12.40, 19.81, 15.61}, {36.57, 42.29, 39.41}, {14.08, 18.54, 16.72}, {19.13, 14.67, 26.53}}},
    {{{18.42, 23.18, 20.11}, {36.57, 42.29, 39.41}, {9.92, 14.67, 2.26}, {26.65, 27.62, 37.15}}},
};

inline const Grid kLateral = {
    "lateral",
    kPairs,
    {{{44.12, 34.67, 41.96}, {30.80, 33.48, 36.21}, {56.31, 56.60, 57.87}, {39.83, 34.03, 47.93}, {30.24, 33.27, 30.48}}},
    {{{40.26, 38.41, 42.89}, {56.31, 56.60, 57.87}, {30.24, 33.27, 30.48}, {26.07, 23.33, 27.39}}},
};

inline influence::ensemble::ScoreTable table_of(const Grid& g) {
  influence::ensemble::ScoreTable t(kModels, g.columns, {g.target});
  for (std::size_t m = 0; m < kModels.size(); ++m) {
    for (std::size_t c = 0; c < g.columns.size(); ++c) t.set(kModels[m], g.columns[c], g.target, g.cells[m][c]);
  }
  return t;
}

// Both parts of the influence grid in one table.
inline influence::ensemble::ScoreTable influence_table() {
  influence::ensemble::ScoreTable t(kModels, kTheories, {kPreamble.target, kProvisions.target});
  for (const Grid* g : {&kPreamble, &kProvisions}) {
    for (std::size_t m = 0; m < kModels.size(); ++m) {
      for (std::size_t c = 0; c < kTheories.size(); ++c) t.set(kModels[m], kTheories[c], g->target, g->cells[m][c]);
    }
  }
  return t;
}

}  // namespace fixtures
