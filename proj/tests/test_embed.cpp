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

#include <algorithm>
#include <numeric>
#include <random>

#include <doctest.h>

#include "influence/cache.hpp"
#include "influence/embed.hpp"
#include "support.hpp"

using namespace influence::embed;
using influence::Errc;
using influence::corpus::Sentence;

namespace {

std::vector<float> values(const EmbeddingVector& v) { return {v.values().begin(), v.values().end()}; }

std::vector<Sentence> sentences(const std::vector<std::string>& texts) {
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < texts.size(); ++i) out.push_back({i, texts[i], {0, texts[i].size()}});
  return out;
}

}  // namespace

TEST_CASE("registry") {
  const auto& r = registry();
  REQUIRE(r.size() == 6);
  const std::vector<std::string> ids = {"all-MPNet-base-v2", "paraphrase-albert-small-v2",
                                        "distilbert-base-nli-stsb-mean-tokens", "all-distilroberta-v1",
                                        "paraphrase-TinyBERT-L6-v2"};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CHECK(r[i].identifier == ids[i]);
    CHECK(r[i].pooling == Pooling::Mean);
    CHECK(r[i].dims > 0);
  }
  CHECK(r[5].family == Family::Reference);
  CHECK(find_model("sbert").identifier == "all-MPNet-base-v2");
  CHECK(find_model("ALL-DISTILROBERTA-V1").name == "RoBERTa");
  CHECK_ERRC(find_model("not-a-model"), Errc::UnknownModel);
  CHECK(filter_registry(Family::SBERT).size() == 1);
  CHECK(filter_registry(std::nullopt).size() == 6);
  CHECK(parse_family("tinybert") == Family::TinyBERT);
  CHECK_FALSE(parse_family("gpt").has_value());
}

TEST_CASE("embedding vector norm") {
  const EmbeddingVector v({3.0f, 4.0f});
  CHECK(v.dims() == 2);
  CHECK(v.l2_norm() == 5.0);
  CHECK(EmbeddingVector().l2_norm() == 0.0);
}

TEST_CASE("tf_vector examples") {
  CHECK(values(tf_vector("good good law", Vocabulary({"good", "law"}))) == std::vector<float>{2, 1});
  const Vocabulary v({"law", "governs", "making"});  // sorted: governs, law, making
  CHECK(v.terms() == std::vector<std::string>{"governs", "law", "making"});
  CHECK(values(tf_vector("Law governs law-making", v)) == std::vector<float>{1, 2, 1});
  CHECK(tf_vector("", v).l2_norm() == 0.0);
  CHECK_ERRC(tf_vector("x", Vocabulary()), Errc::EmptyVocabulary);
}

TEST_CASE("tf_vector is additive") {
  std::mt19937 rng(17);
  const std::vector<std::string> words = {"law", "Duty", "virtue", "good", "risk", "care", "x1", "-", "AI", "é"};
  const Vocabulary vocab({"law", "duty", "virtue", "good", "risk", "care", "x", "ai"});
  auto sample = [&] {
    std::string s;
    for (std::size_t i = 0, n = rng() % 12; i < n; ++i) s += words[rng() % words.size()] + (rng() % 3 ? " " : ",");
    return s;
  };
  for (int iter = 0; iter < 1000; ++iter) {
    const std::string a = sample();
    const std::string b = sample();
    const auto ab = values(tf_vector(a + " " + b, vocab));
    const auto va = values(tf_vector(a, vocab));
    const auto vb = values(tf_vector(b, vocab));
    for (std::size_t k = 0; k < ab.size(); ++k) CHECK(ab[k] == va[k] + vb[k]);
  }
}

TEST_CASE("vocabulary from texts") {
  const std::vector<std::string> texts = {"Beta alpha", "gamma, Alpha!"};
  const auto v = Vocabulary::from_texts(texts);
  CHECK(v.terms() == std::vector<std::string>{"alpha", "beta", "gamma"});
  CHECK(v.index_of("gamma") == 2u);
  CHECK_FALSE(v.index_of("delta").has_value());
  CHECK(v.hash() == Vocabulary({"gamma", "beta", "alpha"}).hash());
  CHECK(v.hash() != Vocabulary({"alpha", "beta"}).hash());
}

TEST_CASE("pool_tokens examples") {
  const std::vector<float> two = {1, 3, 3, 1};
  const std::vector<std::int64_t> both = {1, 1};
  CHECK(values(pool_tokens(two, 2, both, Pooling::Mean)) == std::vector<float>{2, 2});
  CHECK(values(pool_tokens(two, 2, both, Pooling::Cls)) == std::vector<float>{1, 3});
  const std::vector<float> three = {1, 0, 5, 5, 3, 0};
  const std::vector<std::int64_t> mask = {1, 0, 1};
  CHECK(values(pool_tokens(three, 2, mask, Pooling::Mean)) == std::vector<float>{2, 0});
  const std::vector<std::int64_t> none = {0, 0};
  CHECK_ERRC(pool_tokens(two, 2, none, Pooling::Mean), Errc::AllMasked);
  const std::vector<std::int64_t> short_mask = {1};
  CHECK_ERRC(pool_tokens(two, 2, short_mask, Pooling::Mean), Errc::DimensionMismatch);
}

TEST_CASE("mean pooling is permutation-equivariant") {
  std::mt19937 rng(19);
  std::uniform_real_distribution<float> u(-1, 1);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t tokens = 1 + rng() % 8;
    const std::size_t dims = 1 + rng() % 6;
    std::vector<float> m(tokens * dims);
    for (auto& x : m) x = u(rng);
    std::vector<std::int64_t> mask(tokens);
    for (auto& b : mask) b = rng() % 2;
    mask[rng() % tokens] = 1;
    std::vector<std::size_t> perm(tokens);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<float> pm(m.size());
    std::vector<std::int64_t> pmask(tokens);
    for (std::size_t t = 0; t < tokens; ++t) {
      std::copy_n(m.begin() + static_cast<std::ptrdiff_t>(perm[t] * dims), dims, pm.begin() + static_cast<std::ptrdiff_t>(t * dims));
      pmask[t] = mask[perm[t]];
    }
    const auto a = values(pool_tokens(m, dims, mask, Pooling::Mean));
    const auto b = values(pool_tokens(pm, dims, pmask, Pooling::Mean));
    for (std::size_t d = 0; d < dims; ++d) CHECK(a[d] == doctest::Approx(b[d]).epsilon(1e-6));
  }
}

TEST_CASE("embed_sentences with the reference backend") {
  const std::vector<std::string> texts = {"alpha beta beta", "gamma alpha"};
  const ReferenceBackend backend(Vocabulary::from_texts(texts));
  const auto m = embed_sentences(backend, sentences(texts), nullptr, {"p", "h", 1});
  REQUIRE(m.rows.size() == 2);
  CHECK(values(m.rows[0]) == std::vector<float>{1, 2, 0});
  CHECK(values(m.rows[1]) == std::vector<float>{1, 0, 1});
  CHECK(m.dims() == 3);
  CHECK(m.truncated.empty());
  CHECK_ERRC(embed_sentences(backend, {}, nullptr, {"p", "h", 1}), Errc::EmptySentenceList);
}

TEST_CASE("cache-warm rerun calls the backend zero times") {
  std::vector<std::string> texts;
  for (int i = 0; i < 40; ++i) texts.push_back("sentence number " + std::string(static_cast<std::size_t>(i + 1), 'a'));
  const auto sents = sentences(texts);
  const ReferenceBackend cold(Vocabulary::from_texts(texts));
  EmbeddingCache cache(cold.cache_identity());
  const auto first = embed_sentences(cold, sents, &cache, {"p", "h", 4});
  CHECK(cold.invocations() == texts.size());

  const ReferenceBackend warm(Vocabulary::from_texts(texts));
  const auto second = embed_sentences(warm, sents, &cache, {"p", "h", 3});
  CHECK(warm.invocations() == 0);
  CHECK(second.rows == first.rows);

  EmbeddingCache other("someone-else");
  CHECK_ERRC(embed_sentences(warm, sents, &other, {"p", "h", 1}), Errc::ModelMismatch);
}

TEST_CASE("embedding is independent of the thread count") {
  std::vector<std::string> texts;
  std::mt19937 rng(23);
  const std::vector<std::string> words = {"law", "duty", "care", "risk", "good"};
  for (int i = 0; i < 200; ++i) {
    std::string s;
    for (int w = 0; w < 6; ++w) s += words[rng() % words.size()] + " ";
    texts.push_back(s);
  }
  const ReferenceBackend backend(Vocabulary::from_texts(texts));
  const auto serial = embed_sentences(backend, sentences(texts), nullptr, {"p", "h", 1});
  for (std::size_t t : {2u, 5u, 16u}) CHECK(embed_sentences(backend, sentences(texts), nullptr, {"p", "h", t}).rows == serial.rows);
}

TEST_CASE("backend failures propagate") {
  struct Failing final : EmbeddingBackend {
    ModelSpec spec{"fail", "fail", Family::Reference, Pooling::Mean, 0, 1};
    const ModelSpec& model() const override { return spec; }
    std::string cache_identity() const override { return "fail"; }
    BackendOutput embed(std::string_view s) const override {
      if (s == "bad") throw influence::Error(Errc::TokenizationFailure, "bad input");
      return {EmbeddingVector({1.0f}), false};
    }
  } failing;
  CHECK_ERRC(embed_sentences(failing, sentences({"ok", "bad", "ok"}), nullptr, {"p", "h", 2}), Errc::TokenizationFailure);
}
