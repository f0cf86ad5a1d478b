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

#include "influence/cache.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <mutex>

#include <fmt/format.h>

#include "influence/errors.hpp"
#include "influence/hash.hpp"

namespace influence::embed {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "cache I/O assumes a little-endian host");
static_assert(sizeof(float) == 4);

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool get(std::istream& in, T& value) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::string model_identity)
    : identity_(std::move(model_identity)), model_hash_(sha256_u64(identity_)) {}

std::uint64_t EmbeddingCache::key(std::string_view model_identity, std::string_view text_hash, std::string_view sentence) {
  std::string material;
  material.reserve(model_identity.size() + text_hash.size() + sentence.size() + 2);
  material.append(model_identity).push_back('\0');
  material.append(text_hash).push_back('\0');
  material.append(sentence);
  return sha256_u64(material);
}

std::optional<EmbeddingVector> EmbeddingCache::lookup(std::uint64_t key) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return EmbeddingVector(it->second);
}

void EmbeddingCache::insert(std::uint64_t key, const EmbeddingVector& vector) {
  std::unique_lock lock(mutex_);
  if (dims_ == 0) dims_ = vector.dims();
  if (vector.dims() != dims_) {
    throw Error(Errc::DimensionMismatch, fmt::format("cache for '{}' holds {}-d vectors, got {}", identity_, dims_, vector.dims()));
  }
  entries_.insert_or_assign(key, std::vector<float>(vector.values().begin(), vector.values().end()));
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

void EmbeddingCache::load(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, fmt::format("cannot open cache {}", path.string()));

  char magic[8];
  std::uint32_t version = 0;
  std::uint32_t dims = 0;
  std::uint64_t model_hash = 0;
  if (!in.read(magic, sizeof magic) || std::string_view(magic, sizeof magic) != kMagic || !get(in, version) ||
      !get(in, dims) || !get(in, model_hash)) {
    throw Error(Errc::CacheCorrupt, fmt::format("{}: bad cache header", path.string()));
  }
  if (version != kVersion) {
    throw Error(Errc::CacheCorrupt, fmt::format("{}: unsupported cache version {}", path.string(), version));
  }
  if (model_hash != model_hash_) {
    throw Error(Errc::CacheCorrupt, fmt::format("{}: cache belongs to another model", path.string()));
  }

  std::unique_lock lock(mutex_);
  if (dims_ != 0 && dims != dims_) {
    throw Error(Errc::CacheCorrupt, fmt::format("{}: {}-d records, expected {}", path.string(), dims, dims_));
  }
  for (;;) {
    std::uint64_t key = 0;
    if (!get(in, key)) {
      if (in.gcount() != 0) throw Error(Errc::CacheCorrupt, fmt::format("{}: torn record key", path.string()));
      break;
    }
    std::vector<float> values(dims);
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(dims * sizeof(float)))) {
      throw Error(Errc::CacheCorrupt, fmt::format("{}: torn record body", path.string()));
    }
    entries_.insert_or_assign(key, std::move(values));
  }
  if (dims_ == 0 && !entries_.empty()) dims_ = dims;
}

void EmbeddingCache::save(const fs::path& path) const {
  std::shared_lock lock(mutex_);
  std::vector<std::uint64_t> keys;
  keys.reserve(entries_.size());
  for (const auto& [k, _] : entries_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());

  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, fmt::format("cannot write cache {}", tmp.string()));
    out.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
    put(out, kVersion);
    put(out, static_cast<std::uint32_t>(dims_));
    put(out, model_hash_);
    for (std::uint64_t k : keys) {
      const auto& values = entries_.at(k);
      put(out, k);
      out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
    }
    if (!out) throw Error(Errc::IoFailure, fmt::format("short write to {}", tmp.string()));
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoFailure, fmt::format("cannot move {} into place: {}", tmp.string(), ec.message()));
}

fs::path EmbeddingCache::file_in(const fs::path& dir) const { return dir / (hex_u64(model_hash_) + ".embc"); }

}  // namespace influence::embed
