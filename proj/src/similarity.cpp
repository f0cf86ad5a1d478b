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

#include "influence/similarity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <thread>

#include <fmt/format.h>

#include "influence/errors.hpp"

namespace influence::similarity {

using embed::EmbeddingMatrix;
using embed::EmbeddingVector;

SimilarityScore make_score(double c) { return {c, c * 100.0}; }

namespace {

double clamp_unit(double c) { return std::clamp(c, -1.0, 1.0); }

double dot(std::span<const float> x, std::span<const float> y) {
  // Products of two floats are exact in double.
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return sum;
}

void check_pair(const EmbeddingVector& x, const EmbeddingVector& y) {
  if (x.dims() != y.dims()) {
    throw Error(Errc::DimensionMismatch, fmt::format("vectors of width {} and {}", x.dims(), y.dims()));
  }
  if (x.l2_norm() == 0.0 || y.l2_norm() == 0.0) throw Error(Errc::ZeroNormVector, "cosine of a zero vector");
}

}  // namespace

SimilarityScore cosine(const EmbeddingVector& x, const EmbeddingVector& y) {
  check_pair(x, y);
  return make_score(clamp_unit(dot(x.values(), y.values()) / (x.l2_norm() * y.l2_norm())));
}

double cosine(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(Errc::DimensionMismatch, fmt::format("vectors of width {} and {}", x.size(), y.size()));
  }
  double xy = 0.0;
  double xx = 0.0;
  double yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx == 0.0 || yy == 0.0) throw Error(Errc::ZeroNormVector, "cosine of a zero vector");
  return clamp_unit(xy / (std::sqrt(xx) * std::sqrt(yy)));
}

double cosine_distance(const EmbeddingVector& x, const EmbeddingVector& y) {
  return std::acos(cosine(x, y).cosine) / std::numbers::pi;
}

namespace {

void check_models(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  if (a.model.identifier != b.model.identifier) {
    throw Error(Errc::ModelMismatch, fmt::format("'{}' embeddings compared with '{}' embeddings", a.model.identifier,
                                                 b.model.identifier));
  }
  if (a.dims() != b.dims()) {
    throw Error(Errc::DimensionMismatch, fmt::format("{}-d rows compared with {}-d rows", a.dims(), b.dims()));
  }
}

std::vector<std::size_t> nonzero_rows(const EmbeddingMatrix& m, std::vector<std::size_t>& excluded) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    (m.rows[i].l2_norm() > 0.0 ? kept : excluded).push_back(i);
  }
  if (kept.empty()) {
    throw Error(Errc::AllRowsZeroNorm, fmt::format("every sentence vector of '{}' is zero", m.source_part));
  }
  return kept;
}

}  // namespace

SentenceSimMatrix sentence_sim_matrix(const EmbeddingMatrix& a, const EmbeddingMatrix& b, std::size_t threads) {
  check_models(a, b);
  SentenceSimMatrix m;
  m.model = a.model.identifier;
  m.row_sentences = nonzero_rows(a, m.excluded_rows);
  m.col_sentences = nonzero_rows(b, m.excluded_cols);
  m.rows = m.row_sentences.size();
  m.cols = m.col_sentences.size();
  m.entries.assign(m.rows * m.cols, 0.0);

  auto fill_rows = [&](std::size_t first, std::size_t step) {
    for (std::size_t r = first; r < m.rows; r += step) {
      const EmbeddingVector& x = a.rows[m.row_sentences[r]];
      for (std::size_t c = 0; c < m.cols; ++c) {
        const EmbeddingVector& y = b.rows[m.col_sentences[c]];
        m.entries[r * m.cols + c] = clamp_unit(dot(x.values(), y.values()) / (x.l2_norm() * y.l2_norm()));
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, m.rows);
  if (workers == 1) {
    fill_rows(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(fill_rows, t, workers);
  }
  return m;
}

std::string AggregationStrategy::name() const {
  switch (kind) {
    case Strategy::PairMean: return "pair-mean";
    case Strategy::BestMatchSym: return "best-match";
    case Strategy::Centroid: return normalize_first ? "centroid-normalized" : "centroid";
  }
  return "pair-mean";
}

AggregationStrategy AggregationStrategy::parse(std::string_view name) {
  if (name == "pair-mean") return {Strategy::PairMean, false};
  if (name == "best-match") return {Strategy::BestMatchSym, false};
  if (name == "centroid") return {Strategy::Centroid, false};
  if (name == "centroid-normalized") return {Strategy::Centroid, true};
  throw Error(Errc::ConfigInvalid,
              fmt::format("unknown aggregation strategy '{}' (pair-mean, best-match, centroid, centroid-normalized)", name));
}

SimilarityScore aggregate(const SentenceSimMatrix& m, const AggregationStrategy& strategy) {
  if (m.rows == 0 || m.cols == 0) throw Error(Errc::EmptyMatrix, "similarity matrix is empty");
  switch (strategy.kind) {
    case Strategy::PairMean: {
      double sum = 0.0;
      for (double v : m.entries) sum += v;
      return make_score(clamp_unit(sum / static_cast<double>(m.entries.size())));
    }
    case Strategy::BestMatchSym: {
      double row_sum = 0.0;
      for (std::size_t r = 0; r < m.rows; ++r) {
        double best = m.at(r, 0);
        for (std::size_t c = 1; c < m.cols; ++c) best = std::max(best, m.at(r, c));
        row_sum += best;
      }
      double col_sum = 0.0;
      for (std::size_t c = 0; c < m.cols; ++c) {
        double best = m.at(0, c);
        for (std::size_t r = 1; r < m.rows; ++r) best = std::max(best, m.at(r, c));
        col_sum += best;
      }
      const double v = 0.5 * (row_sum / static_cast<double>(m.rows) + col_sum / static_cast<double>(m.cols));
      return make_score(clamp_unit(v));
    }
    case Strategy::Centroid:
      break;
  }
  throw Error(Errc::ConfigInvalid, "the centroid strategy needs the sentence vectors, not the similarity matrix");
}

namespace {

std::vector<double> centroid_sum(const EmbeddingMatrix& m, bool normalize_first, std::vector<std::size_t>& excluded) {
  const auto kept = nonzero_rows(m, excluded);
  std::vector<double> sum(m.dims(), 0.0);
  for (std::size_t i : kept) {
    const EmbeddingVector& row = m.rows[i];
    const double scale = normalize_first ? 1.0 / row.l2_norm() : 1.0;
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += static_cast<double>(row[d]) * scale;
  }
  return sum;
}

}  // namespace

SimilarityScore centroid_score(const EmbeddingMatrix& a, const EmbeddingMatrix& b, bool normalize_first) {
  check_models(a, b);
  std::vector<std::size_t> ignored;
  const auto x = centroid_sum(a, normalize_first, ignored);
  const auto y = centroid_sum(b, normalize_first, ignored);
  return make_score(cosine(std::span<const double>(x), std::span<const double>(y)));
}

DocumentScore aggregate_document_score(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                                       const AggregationStrategy& strategy, std::size_t threads) {
  DocumentScore out;
  out.strategy = strategy;
  if (a.rows.empty() || b.rows.empty()) throw Error(Errc::EmptyMatrix, "document without sentences");
  if (strategy.kind == Strategy::Centroid) {
    check_models(a, b);
    const auto x = centroid_sum(a, strategy.normalize_first, out.excluded_rows);
    const auto y = centroid_sum(b, strategy.normalize_first, out.excluded_cols);
    out.score = make_score(cosine(std::span<const double>(x), std::span<const double>(y)));
    return out;
  }
  const SentenceSimMatrix m = sentence_sim_matrix(a, b, threads);
  out.score = aggregate(m, strategy);
  out.excluded_rows = m.excluded_rows;
  out.excluded_cols = m.excluded_cols;
  return out;
}

std::string matrix_csv(const SentenceSimMatrix& m) {
  std::string out = "sentence";
  for (std::size_t c : m.col_sentences) out += fmt::format(",{}", c);
  out += '\n';
  char buf[64];
  for (std::size_t r = 0; r < m.rows; ++r) {
    out += fmt::format("{}", m.row_sentences[r]);
    for (std::size_t c = 0; c < m.cols; ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, m.at(r, c));
      out.push_back(',');
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

}  // namespace influence::similarity
