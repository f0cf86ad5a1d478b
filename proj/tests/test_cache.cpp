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

#include <cstring>
#include <random>

#include <doctest.h>

#include "influence/cache.hpp"
#include "influence/hash.hpp"
#include "support.hpp"

using namespace influence::embed;
using influence::Errc;
using testing::TempDir;

namespace {

EmbeddingVector random_vector(std::mt19937& rng, std::size_t dims) {
  std::uniform_real_distribution<float> u(-10, 10);
  std::vector<float> v(dims);
  for (auto& x : v) x = u(rng);
  return EmbeddingVector(std::move(v));
}

bool same_bits(const EmbeddingVector& a, const EmbeddingVector& b) {
  return a.dims() == b.dims() && std::memcmp(a.values().data(), b.values().data(), a.dims() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("cache keys separate every component") {
  const auto k = EmbeddingCache::key("m", "h", "s");
  CHECK(k == EmbeddingCache::key("m", "h", "s"));
  CHECK(k != EmbeddingCache::key("m2", "h", "s"));
  CHECK(k != EmbeddingCache::key("m", "h2", "s"));
  CHECK(k != EmbeddingCache::key("m", "h", "s2"));
  // no ambiguity from concatenation
  CHECK(EmbeddingCache::key("ab", "c", "d") != EmbeddingCache::key("a", "bc", "d"));
}

TEST_CASE("store then load is bit-identical") {
  TempDir tmp;
  std::mt19937 rng(29);
  EmbeddingCache cache("model@rev");
  std::vector<std::pair<std::uint64_t, EmbeddingVector>> stored;
  for (int i = 0; i < 500; ++i) {
    auto v = random_vector(rng, 48);
    const auto key = EmbeddingCache::key("model@rev", "h", std::to_string(i));
    cache.insert(key, v);
    stored.emplace_back(key, std::move(v));
  }
  // special values survive too
  const EmbeddingVector special({-0.0f, 1e-40f, 3.4e38f, -1.0f, 0.1f, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
                                 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  cache.insert(7, special);
  stored.emplace_back(7, special);
  const auto file = cache.file_in(tmp.path());
  cache.save(file);

  EmbeddingCache loaded("model@rev");
  loaded.load(file);
  CHECK(loaded.size() == stored.size());
  for (const auto& [key, v] : stored) {
    const auto hit = loaded.lookup(key);
    REQUIRE(hit.has_value());
    CHECK(same_bits(*hit, v));
  }
  // saving is deterministic
  const auto again = tmp / "again.bin";
  loaded.save(again);
  CHECK(testing::slurp(again) == testing::slurp(file));
}

TEST_CASE("cache file layout") {
  TempDir tmp;
  EmbeddingCache cache("id");
  cache.insert(0x0102030405060708ULL, EmbeddingVector({1.0f, -2.0f}));
  cache.save(tmp / "c.bin");
  const std::string bytes = testing::slurp(tmp / "c.bin");
  REQUIRE(bytes.size() == 8 + 4 + 4 + 8 + 8 + 2 * 4);
  CHECK(bytes.substr(0, 8) == "INFLEMBC");
  std::uint32_t version = 0, dims = 0;
  std::uint64_t model = 0, key = 0;
  float x = 0, y = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&dims, bytes.data() + 12, 4);
  std::memcpy(&model, bytes.data() + 16, 8);
  std::memcpy(&key, bytes.data() + 24, 8);
  std::memcpy(&x, bytes.data() + 32, 4);
  std::memcpy(&y, bytes.data() + 36, 4);
  CHECK(version == 1);
  CHECK(dims == 2);
  CHECK(model == cache.model_hash());
  CHECK(key == 0x0102030405060708ULL);
  CHECK(x == 1.0f);
  CHECK(y == -2.0f);
}

TEST_CASE("cache load failures") {
  TempDir tmp;
  EmbeddingCache cache("a");
  cache.insert(1, EmbeddingVector({1.0f, 2.0f}));
  cache.save(tmp / "a.bin");

  EmbeddingCache missing("a");
  CHECK_NOTHROW(missing.load(tmp / "none.bin"));
  CHECK(missing.size() == 0);

  EmbeddingCache other("b");
  CHECK_ERRC(other.load(tmp / "a.bin"), Errc::CacheCorrupt);

  std::string torn = testing::slurp(tmp / "a.bin");
  torn.pop_back();
  testing::spill(tmp / "torn.bin", torn);
  EmbeddingCache t("a");
  CHECK_ERRC(t.load(tmp / "torn.bin"), Errc::CacheCorrupt);

  testing::spill(tmp / "junk.bin", "not a cache file at all");
  EmbeddingCache j("a");
  CHECK_ERRC(j.load(tmp / "junk.bin"), Errc::CacheCorrupt);

  CHECK_ERRC(cache.insert(2, EmbeddingVector({1.0f})), Errc::DimensionMismatch);
}
