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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "influence/embed.hpp"

namespace influence::embed {

// Keyed store of embedding vectors for a single model identity.
//
// On-disk layout (little-endian):
//   header  : magic "INFLEMBC" | u32 version | u32 dims | u64 model hash
//   records : u64 key | dims x f32
// Readers may run concurrently; inserts take an exclusive lock.
class EmbeddingCache {
 public:
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::string_view kMagic = "INFLEMBC";

  explicit EmbeddingCache(std::string model_identity);

  static std::uint64_t key(std::string_view model_identity, std::string_view text_hash, std::string_view sentence);

  const std::string& model_identity() const { return identity_; }
  std::uint64_t model_hash() const { return model_hash_; }

  std::optional<EmbeddingVector> lookup(std::uint64_t key) const;
  void insert(std::uint64_t key, const EmbeddingVector& vector);
  std::size_t size() const;

  // Merges the records of `path` into this cache. A missing file is not an
  // error; a file for another model or with torn records is.
  void load(const std::filesystem::path& path);
  // Atomic replace via a temporary file. Records are written in key order.
  void save(const std::filesystem::path& path) const;

  // Conventional file name for this model inside a cache directory.
  std::filesystem::path file_in(const std::filesystem::path& dir) const;

 private:
  std::string identity_;
  std::uint64_t model_hash_;
  std::size_t dims_ = 0;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::uint64_t, std::vector<float>> entries_;
};

}  // namespace influence::embed
