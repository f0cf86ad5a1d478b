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
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "influence/embed.hpp"

namespace influence::onnx {
class Model;
}

namespace influence::tokenizer {
class Tokenizer;
}

namespace influence::embed {

// manifest.json inside a model bundle directory.
struct BundleManifest {
  struct ParityFixture {
    std::string text;
    std::vector<double> vector;
  };

  int format_version = 1;
  std::string identifier;
  std::size_t dims = 0;
  std::size_t max_tokens = 0;
  Pooling pooling = Pooling::Mean;
  // Whether the recorded parity vectors are L2-normalized.
  bool normalized = false;
  std::string graph_file = "model.onnx";
  std::string tokenizer_file = "tokenizer.json";
  std::vector<std::string> input_names;  // subset of input_ids, attention_mask, token_type_ids
  std::string output_name;
  // "token_embeddings" ([1, T, D], pooled here) or "sentence_embedding" ([1, D]).
  std::string output_kind = "token_embeddings";
  std::vector<ParityFixture> parity;
  std::string revision;
  nlohmann::json tools;
};

inline constexpr std::string_view kBundleManifestName = "manifest.json";

BundleManifest parse_bundle_manifest(const nlohmann::json& j);
BundleManifest load_bundle_manifest(const std::filesystem::path& dir);
nlohmann::json to_json(const BundleManifest& manifest);

// Sentence encoder over an exported graph and its tokenizer.
class TransformerBackend final : public EmbeddingBackend {
 public:
  // `spec` comes from the registry; the manifest's max_tokens and dims win
  // over the registry values. `pooling` overrides the manifest pooling.
  static std::unique_ptr<TransformerBackend> load(const std::filesystem::path& bundle_dir, const ModelSpec& spec,
                                                  std::optional<Pooling> pooling = std::nullopt);
  ~TransformerBackend() override;

  const ModelSpec& model() const override { return model_; }
  std::string cache_identity() const override;
  BackendOutput embed(std::string_view sentence) const override;
  bool truncates(std::string_view sentence) const override;

  const BundleManifest& manifest() const { return manifest_; }
  // Token ids after truncation, special tokens included.
  std::vector<std::int64_t> token_ids(std::string_view sentence) const;

 private:
  TransformerBackend() = default;

  ModelSpec model_;
  BundleManifest manifest_;
  std::string graph_digest_;
  std::unique_ptr<onnx::Model> graph_;
  std::unique_ptr<tokenizer::Tokenizer> tokenizer_;
};

struct ParityEntry {
  std::string text;
  double max_abs_delta = 0.0;
  double cosine = 0.0;
};

struct ParityReport {
  std::vector<ParityEntry> entries;
  bool passed = false;
};

inline constexpr double kParityMaxDelta = 1e-4;
inline constexpr double kParityMinCosine = 0.9999;

// Embeds every parity fixture and compares it with the recorded vector.
// Throws ParityFailure (listing per-fixture deltas) when a fixture misses
// either threshold, or when the manifest has no fixtures.
ParityReport verify_bundle(const TransformerBackend& backend, double max_delta = kParityMaxDelta,
                           double min_cosine = kParityMinCosine);

}  // namespace influence::embed
