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
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

// Reads the tokenizer.json format written by the Hugging Face tokenizers
// library and encodes single sentences to ids. Only the inference path is
// covered: no offsets, no pair inputs, no padding.
namespace influence::tokenizer {

struct Encoding {
  std::vector<std::int64_t> ids;
  std::vector<std::int64_t> type_ids;
  std::vector<std::string> tokens;
  bool truncated = false;
};

class Tokenizer {
 public:
  // Throws ModelLoadFailure on malformed files and unsupported components.
  static std::unique_ptr<Tokenizer> load(const std::filesystem::path& path);
  static std::unique_ptr<Tokenizer> parse(const nlohmann::json& j);
  ~Tokenizer();

  // `max_length` counts special tokens; 0 disables truncation. Content
  // tokens are cut from the right. Throws TokenizationFailure.
  Encoding encode(std::string_view text, std::size_t max_length = 0) const;

  // Number of special tokens the post-processor adds to one sequence.
  std::size_t special_tokens_count() const;
  std::optional<std::int64_t> token_to_id(std::string_view token) const;

  struct Impl;

 private:
  explicit Tokenizer(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

// "normalizer:BertNormalizer", "model:WordPiece" and so on, sorted.
std::vector<std::string> supported_components();

}  // namespace influence::tokenizer
