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

#include "influence/embed.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "influence/cache.hpp"
#include "influence/errors.hpp"
#include "influence/hash.hpp"
#include "influence/text.hpp"

namespace influence::embed {

std::string_view family_name(Family family) {
  switch (family) {
    case Family::SBERT: return "SBERT";
    case Family::ALBERT: return "ALBERT";
    case Family::DistilBERT: return "DistilBERT";
    case Family::RoBERTa: return "RoBERTa";
    case Family::TinyBERT: return "TinyBERT";
    case Family::Reference: return "Reference";
  }
  return "Reference";
}

std::optional<Family> parse_family(std::string_view name) {
  const std::string lowered = text::to_lower(name);
  for (Family f : {Family::SBERT, Family::ALBERT, Family::DistilBERT, Family::RoBERTa, Family::TinyBERT,
                   Family::Reference}) {
    if (text::to_lower(family_name(f)) == lowered) return f;
  }
  return std::nullopt;
}

std::string_view pooling_name(Pooling pooling) { return pooling == Pooling::Mean ? "mean" : "cls"; }

Pooling parse_pooling(std::string_view name) {
  const std::string lowered = text::to_lower(name);
  if (lowered == "mean") return Pooling::Mean;
  if (lowered == "cls") return Pooling::Cls;
  throw Error(Errc::ConfigInvalid, fmt::format("unknown pooling '{}' (expected mean or cls)", name));
}

const std::vector<ModelSpec>& registry() {
  static const std::vector<ModelSpec> models = {
      {"SBERT", "all-MPNet-base-v2", Family::SBERT, Pooling::Mean, 384, 768},
      {"ALBERT", "paraphrase-albert-small-v2", Family::ALBERT, Pooling::Mean, 100, 768},
      {"DistilBERT", "distilbert-base-nli-stsb-mean-tokens", Family::DistilBERT, Pooling::Mean, 128, 768},
      {"RoBERTa", "all-distilroberta-v1", Family::RoBERTa, Pooling::Mean, 512, 768},
      {"TinyBERT", "paraphrase-TinyBERT-L6-v2", Family::TinyBERT, Pooling::Mean, 128, 768},
      {std::string(kReferenceName), "term-frequency", Family::Reference, Pooling::Mean, 0, 0},
  };
  return models;
}

const ModelSpec& find_model(std::string_view key) {
  const std::string lowered = text::to_lower(key);
  for (const auto& m : registry()) {
    if (text::to_lower(m.name) == lowered || text::to_lower(m.identifier) == lowered) return m;
  }
  throw Error(Errc::UnknownModel, fmt::format("'{}' is not in the model registry", key));
}

std::vector<ModelSpec> filter_registry(std::optional<Family> family) {
  std::vector<ModelSpec> out;
  for (const auto& m : registry()) {
    if (!family || m.family == *family) out.push_back(m);
  }
  return out;
}

EmbeddingVector::EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {
  double sum = 0.0;
  for (float v : values_) sum += static_cast<double>(v) * static_cast<double>(v);
  norm_ = std::sqrt(sum);
}

Vocabulary::Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
  std::sort(terms_.begin(), terms_.end());
  terms_.erase(std::unique(terms_.begin(), terms_.end()), terms_.end());
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) index_.emplace(terms_[i], i);
}

Vocabulary Vocabulary::from_texts(std::span<const std::string> texts) {
  std::vector<std::string> terms;
  for (const auto& t : texts) {
    for (auto& tok : text::letter_tokens(t)) terms.push_back(std::move(tok.lowered));
  }
  return Vocabulary(std::move(terms));
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view term) const {
  const auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::hash() const {
  std::string joined;
  for (const auto& t : terms_) {
    joined += t;
    joined.push_back('\n');
  }
  return sha256_hex(joined);
}

EmbeddingVector tf_vector(std::string_view input, const Vocabulary& vocabulary) {
  if (vocabulary.empty()) throw Error(Errc::EmptyVocabulary, "term-frequency vocabulary is empty");
  std::vector<float> counts(vocabulary.size(), 0.0f);
  for (const auto& tok : text::letter_tokens(input)) {
    if (auto idx = vocabulary.index_of(tok.lowered)) counts[*idx] += 1.0f;
  }
  return EmbeddingVector(std::move(counts));
}

EmbeddingVector pool_tokens(std::span<const float> token_vectors, std::size_t dims,
                            std::span<const std::int64_t> attention_mask, Pooling strategy) {
  if (dims == 0 || token_vectors.size() % dims != 0) {
    throw Error(Errc::DimensionMismatch, fmt::format("{} values do not form rows of width {}", token_vectors.size(), dims));
  }
  const std::size_t tokens = token_vectors.size() / dims;
  if (attention_mask.size() != tokens) {
    throw Error(Errc::DimensionMismatch,
                fmt::format("attention mask has {} entries for {} token vectors", attention_mask.size(), tokens));
  }
  if (std::none_of(attention_mask.begin(), attention_mask.end(), [](std::int64_t m) { return m != 0; })) {
    throw Error(Errc::AllMasked, "every token is masked");
  }
  if (strategy == Pooling::Cls) {
    return EmbeddingVector(std::vector<float>(token_vectors.begin(), token_vectors.begin() + static_cast<std::ptrdiff_t>(dims)));
  }
  std::vector<double> sum(dims, 0.0);
  std::size_t count = 0;
  for (std::size_t t = 0; t < tokens; ++t) {
    if (attention_mask[t] == 0) continue;
    ++count;
    const float* row = token_vectors.data() + t * dims;
    for (std::size_t d = 0; d < dims; ++d) sum[d] += row[d];
  }
  std::vector<float> pooled(dims);
  for (std::size_t d = 0; d < dims; ++d) pooled[d] = static_cast<float>(sum[d] / static_cast<double>(count));
  return EmbeddingVector(std::move(pooled));
}

ReferenceBackend::ReferenceBackend(Vocabulary vocabulary) : vocabulary_(std::move(vocabulary)) {
  if (vocabulary_.empty()) throw Error(Errc::EmptyVocabulary, "term-frequency vocabulary is empty");
  model_ = find_model(kReferenceName);
  model_.dims = vocabulary_.size();
}

std::string ReferenceBackend::cache_identity() const {
  return fmt::format("{}@{}", model_.identifier, vocabulary_.hash().substr(0, 16));
}

BackendOutput ReferenceBackend::embed(std::string_view sentence) const {
  count_invocation();
  return {tf_vector(sentence, vocabulary_), false};
}

EmbeddingMatrix embed_sentences(const EmbeddingBackend& backend, const std::vector<corpus::Sentence>& sentences,
                                EmbeddingCache* cache, const EmbedOptions& options) {
  if (sentences.empty()) {
    throw Error(Errc::EmptySentenceList, fmt::format("no sentences to embed for part '{}'", options.part_id));
  }
  const std::string identity = backend.cache_identity();
  if (cache != nullptr && cache->model_identity() != identity) {
    throw Error(Errc::ModelMismatch,
                fmt::format("cache holds '{}' but the backend is '{}'", cache->model_identity(), identity));
  }

  EmbeddingMatrix matrix;
  matrix.model = backend.model();
  matrix.source_part = options.part_id;
  matrix.rows.resize(sentences.size());
  std::vector<char> truncated(sentences.size(), 0);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= sentences.size()) return;
      try {
        const std::string& sentence = sentences[i].text;
        std::uint64_t key = 0;
        if (cache != nullptr) {
          key = EmbeddingCache::key(identity, options.text_hash, sentence);
          if (auto hit = cache->lookup(key)) {
            matrix.rows[i] = std::move(*hit);
            truncated[i] = backend.truncates(sentence) ? 1 : 0;
            continue;
          }
        }
        BackendOutput out = backend.embed(sentence);
        truncated[i] = out.truncated ? 1 : 0;
        if (cache != nullptr) cache->insert(key, out.vector);
        matrix.rows[i] = std::move(out.vector);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(sentences.size());
        return;
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, sentences.size());
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (truncated[i] == 0) continue;
    matrix.truncated.push_back(i);
    spdlog::warn("{}: sentence {} of part '{}' exceeds {} tokens and was truncated", backend.model().name, i,
                 options.part_id, backend.model().max_tokens);
  }
  const std::size_t dims = matrix.rows.front().dims();
  for (const auto& row : matrix.rows) {
    if (row.dims() != dims) throw Error(Errc::DimensionMismatch, "backend produced rows of different widths");
  }
  return matrix;
}

}  // namespace influence::embed
