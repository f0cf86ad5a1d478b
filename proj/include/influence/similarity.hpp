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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "influence/embed.hpp"

namespace influence::similarity {

struct SimilarityScore {
  double cosine = 0.0;
  double percent = 0.0;  // cosine * 100, unrounded
};

SimilarityScore make_score(double cosine);

// Cosine similarity, clamped to [-1, 1].
SimilarityScore cosine(const embed::EmbeddingVector& x, const embed::EmbeddingVector& y);
double cosine(std::span<const double> x, std::span<const double> y);

// arccos(cosine) / pi, in [0, 1]. A metric on the unit sphere.
double cosine_distance(const embed::EmbeddingVector& x, const embed::EmbeddingVector& y);

struct SentenceSimMatrix {
  std::string model;  // model identifier
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> entries;             // row-major cosines
  std::vector<std::size_t> row_sentences;  // original sentence index per row
  std::vector<std::size_t> col_sentences;
  std::vector<std::size_t> excluded_rows;  // zero-norm sentences left out
  std::vector<std::size_t> excluded_cols;

  double at(std::size_t r, std::size_t c) const { return entries[r * cols + c]; }
};

// Rows are sentences of `a` (influencer), columns sentences of `b`.
SentenceSimMatrix sentence_sim_matrix(const embed::EmbeddingMatrix& a, const embed::EmbeddingMatrix& b,
                                      std::size_t threads = 1);

enum class Strategy { Centroid, PairMean, BestMatchSym };

struct AggregationStrategy {
  Strategy kind = Strategy::PairMean;
  // Centroid only: scale every sentence vector to unit length first.
  bool normalize_first = false;

  // "pair-mean", "best-match", "centroid" or "centroid-normalized".
  std::string name() const;
  static AggregationStrategy parse(std::string_view name);
  bool operator==(const AggregationStrategy&) const = default;
};

// PairMean: mean of all entries, summed in row-major order.
// BestMatchSym: 0.5 * (mean of row maxima + mean of column maxima).
SimilarityScore aggregate(const SentenceSimMatrix& matrix, const AggregationStrategy& strategy);

// Cosine between the centroids of the non-zero sentence vectors. The
// centroids are compared as sums, which leaves the cosine unchanged.
SimilarityScore centroid_score(const embed::EmbeddingMatrix& a, const embed::EmbeddingMatrix& b, bool normalize_first);

struct DocumentScore {
  SimilarityScore score;
  AggregationStrategy strategy;
  std::vector<std::size_t> excluded_rows;
  std::vector<std::size_t> excluded_cols;
};

DocumentScore aggregate_document_score(const embed::EmbeddingMatrix& a, const embed::EmbeddingMatrix& b,
                                       const AggregationStrategy& strategy, std::size_t threads = 1);

// Dense CSV: header "sentence,<column sentence indices>", one line per row.
std::string matrix_csv(const SentenceSimMatrix& matrix);

}  // namespace influence::similarity
