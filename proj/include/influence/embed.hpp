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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "influence/corpus.hpp"

namespace influence::embed {

enum class Family { SBERT, ALBERT, DistilBERT, RoBERTa, TinyBERT, Reference };
enum class Pooling { Mean, Cls };

std::string_view family_name(Family family);
std::optional<Family> parse_family(std::string_view name);
std::string_view pooling_name(Pooling pooling);
Pooling parse_pooling(std::string_view name);

struct ModelSpec {
  std::string name;        // short display name, e.g. "SBERT"
  std::string identifier;  // checkpoint identifier
  Family family = Family::Reference;
  Pooling pooling = Pooling::Mean;
  // Token budget including special tokens; 0 means unbounded.
  std::size_t max_tokens = 0;
  // Output width; 0 for the reference backend, whose width is the size of
  // the run vocabulary.
  std::size_t dims = 0;
};

// Five transformer encoders followed by the term-frequency reference.
const std::vector<ModelSpec>& registry();

// Looks a model up by display name or identifier (case-insensitive).
const ModelSpec& find_model(std::string_view name_or_identifier);

std::vector<ModelSpec> filter_registry(std::optional<Family> family);

inline constexpr std::string_view kReferenceName = "reference";

class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<float> values);

  std::size_t dims() const { return values_.size(); }
  std::span<const float> values() const { return values_; }
  float operator[](std::size_t i) const { return values_[i]; }
  double l2_norm() const { return norm_; }

  bool operator==(const EmbeddingVector& other) const { return values_ == other.values_; }

 private:
  std::vector<float> values_;
  double norm_ = 0.0;
};

struct EmbeddingMatrix {
  ModelSpec model;
  std::string source_part;
  std::vector<EmbeddingVector> rows;  // row i embeds sentence i
  std::vector<std::size_t> truncated;  // sentence indices cut at max_tokens

  std::size_t dims() const { return rows.empty() ? 0 : rows.front().dims(); }
};

// Sorted, de-duplicated term list.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> terms);

  // Union of the lowercased letter tokens of all texts.
  static Vocabulary from_texts(std::span<const std::string> texts);

  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  const std::vector<std::string>& terms() const { return terms_; }
  std::optional<std::size_t> index_of(std::string_view term) const;
  // Stable digest of the term list.
  std::string hash() const;

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Component i counts occurrences of vocabulary term i among the lowercased
// letter tokens of `text`.
EmbeddingVector tf_vector(std::string_view text, const Vocabulary& vocabulary);

// `token_vectors` is row-major, one row of `dims` values per token.
EmbeddingVector pool_tokens(std::span<const float> token_vectors, std::size_t dims,
                            std::span<const std::int64_t> attention_mask, Pooling strategy);

struct BackendOutput {
  EmbeddingVector vector;
  bool truncated = false;
};

// A sentence encoder. embed() must be safe to call concurrently.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual const ModelSpec& model() const = 0;
  // Part of every cache key; must change whenever outputs could change.
  virtual std::string cache_identity() const = 0;
  virtual BackendOutput embed(std::string_view sentence) const = 0;
  // Whether embed() would truncate this sentence. Cheap; used on cache hits.
  virtual bool truncates(std::string_view /*sentence*/) const { return false; }

  std::size_t invocations() const { return invocations_.load(); }

 protected:
  void count_invocation() const { invocations_.fetch_add(1); }

 private:
  mutable std::atomic<std::size_t> invocations_{0};
};

// Term-frequency vectors over a fixed vocabulary.
class ReferenceBackend final : public EmbeddingBackend {
 public:
  explicit ReferenceBackend(Vocabulary vocabulary);

  const ModelSpec& model() const override { return model_; }
  std::string cache_identity() const override;
  BackendOutput embed(std::string_view sentence) const override;
  const Vocabulary& vocabulary() const { return vocabulary_; }

 private:
  Vocabulary vocabulary_;
  ModelSpec model_;
};

class EmbeddingCache;

struct EmbedOptions {
  std::string part_id;
  // Digest of the preprocessed text the sentences came from.
  std::string text_hash;
  std::size_t threads = 1;
};

EmbeddingMatrix embed_sentences(const EmbeddingBackend& backend, const std::vector<corpus::Sentence>& sentences,
                                EmbeddingCache* cache, const EmbedOptions& options);

}  // namespace influence::embed
