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

#include <random>
#include <set>
#include <thread>

#include <doctest.h>
#include <json.hpp>

#include "influence/errors.hpp"
#include "influence/tokenizer.hpp"
#include "support.hpp"

using namespace influence::tokenizer;
using influence::Errc;
using nlohmann::json;

namespace {

const json& cases() {
  static const json j = json::parse(testing::slurp(testing::fixtures() / "tokenizer_cases.json"));
  return j;
}

json load_json(const std::string& rel) { return json::parse(testing::slurp(testing::fixtures() / rel)); }

void collect_types(const json& j, const std::string& kind, std::set<std::string>& out) {
  if (j.is_null()) return;
  out.insert(kind + ":" + j.at("type").get<std::string>());
  for (const char* key : {"normalizers", "pretokenizers", "processors"}) {
    if (j.contains(key)) {
      for (const auto& sub : j.at(key)) collect_types(sub, kind, out);
    }
  }
}

}  // namespace

TEST_CASE("ids match the reference tokenizers library") {
  REQUIRE(cases().size() == 9);
  std::size_t n = 0;
  for (const auto& [file, list] : cases().items()) {
    CAPTURE(file);
    const auto tok = Tokenizer::load(testing::fixtures() / file);
    for (const auto& c : list) {
      const std::string text = c.at("text");
      CAPTURE(text);
      const Encoding full = tok->encode(text);
      CHECK(full.ids == c.at("ids").get<std::vector<std::int64_t>>());
      CHECK(full.type_ids == c.at("type_ids").get<std::vector<std::int64_t>>());
      CHECK(full.tokens.size() == full.ids.size());
      CHECK_FALSE(full.truncated);
      const Encoding cut = tok->encode(text, 12);
      CHECK(cut.ids == c.at("ids_max12").get<std::vector<std::int64_t>>());
      CHECK(cut.truncated == (full.ids.size() > 12));
      ++n;
    }
  }
  CHECK(n == 9 * 13);
}

TEST_CASE("fixtures exercise every supported component") {
  std::set<std::string> used;
  for (const auto& [file, _] : cases().items()) {
    const json j = load_json(file);
    collect_types(j.value("normalizer", json()), "normalizer", used);
    collect_types(j.value("pre_tokenizer", json()), "pre_tokenizer", used);
    collect_types(j.value("post_processor", json()), "post_processor", used);
    collect_types(j.value("decoder", json()), "decoder", used);
    collect_types(j.at("model"), "model", used);
  }
  std::vector<std::string> missing;
  for (const auto& c : supported_components()) {
    if (!used.count(c)) missing.push_back(c);
  }
  // These are accepted for completeness but no fixture file needs them.
  const std::set<std::string> untested_ok = {"normalizer:NFC", "normalizer:NFKD", "normalizer:NFD"};
  for (const auto& m : missing) CHECK_MESSAGE(untested_ok.count(m) == 1, m);
}

TEST_CASE("truncation keeps a prefix and the special tokens") {
  std::mt19937 rng(5);
  for (const auto& [file, list] : cases().items()) {
    CAPTURE(file);
    const auto tok = Tokenizer::load(testing::fixtures() / file);
    const std::size_t specials = tok->special_tokens_count();
    const Encoding none = tok->encode("");
    REQUIRE(none.ids.size() == specials);
    for (const auto& c : list) {
      const std::string text = c.at("text");
      const Encoding full = tok->encode(text);
      const std::size_t content = full.ids.size() - specials;
      for (std::size_t max = specials + 1; max <= full.ids.size() + 2; ++max) {
        const Encoding cut = tok->encode(text, max);
        CHECK(cut.ids.size() == std::min(full.ids.size(), max));
        CHECK(cut.truncated == (full.ids.size() > max));
        if (content == 0 || cut.ids.size() < specials) continue;
        // the leading special tokens, a content prefix, then the trailing ones
        const std::size_t kept = cut.ids.size() - specials;
        std::size_t lead = 0;
        while (lead < specials && full.ids[lead] == none.ids[lead]) ++lead;
        const std::size_t trail = specials - lead;
        CHECK(std::equal(cut.ids.begin(), cut.ids.begin() + static_cast<long>(lead + kept), full.ids.begin()));
        CHECK(std::equal(cut.ids.end() - static_cast<long>(trail), cut.ids.end(), full.ids.end() - static_cast<long>(trail)));
      }
    }
  }
}

TEST_CASE("encoding is deterministic and thread-independent") {
  const auto tok = Tokenizer::load(testing::fixtures() / "bundles/all-distilroberta-v1/tokenizer.json");
  const std::string s = "Obligations bind all parties equally, don't they?";
  const auto a = tok->encode(s);
  std::vector<Encoding> got(6);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < got.size(); ++t) pool.emplace_back([&, t] { got[t] = tok->encode(s); });
  for (auto& th : pool) th.join();
  for (const auto& g : got) CHECK(g.ids == a.ids);
}

TEST_CASE("special tokens and lookup") {
  const auto bert = Tokenizer::load(testing::fixtures() / "bundles/paraphrase-TinyBERT-L6-v2/tokenizer.json");
  CHECK(bert->special_tokens_count() == 2);
  CHECK(bert->token_to_id("[CLS]").has_value());
  CHECK_FALSE(bert->token_to_id("definitely-not-a-token").has_value());
  const auto empty = bert->encode("");
  CHECK(empty.ids.size() == 2);
  CHECK(empty.ids.front() == *bert->token_to_id("[CLS]"));
  CHECK(empty.ids.back() == *bert->token_to_id("[SEP]"));
}

TEST_CASE("malformed and unsupported files") {
  json j = load_json("bundles/paraphrase-TinyBERT-L6-v2/tokenizer.json");
  CHECK_NOTHROW(Tokenizer::parse(j));

  json bad_model = j;
  bad_model["model"]["type"] = "CharLevel";
  CHECK_ERRC(Tokenizer::parse(bad_model), Errc::ModelLoadFailure);

  json bad_norm = j;
  bad_norm["normalizer"] = {{"type", "Homoglyph"}};
  CHECK_ERRC(Tokenizer::parse(bad_norm), Errc::ModelLoadFailure);

  json bad_pre = j;
  bad_pre["pre_tokenizer"] = {{"type", "Sequence"}, {"pretokenizers", {{{"type", "UnicodeScripts2"}}}}};
  CHECK_ERRC(Tokenizer::parse(bad_pre), Errc::ModelLoadFailure);

  json no_model = j;
  no_model.erase("model");
  CHECK_ERRC(Tokenizer::parse(no_model), Errc::ModelLoadFailure);

  CHECK_ERRC(Tokenizer::parse(json::array()), Errc::ModelLoadFailure);
  CHECK_ERRC(Tokenizer::load(testing::fixtures() / "nope.json"), Errc::ModelLoadFailure);

  testing::TempDir dir;
  testing::spill(dir / "t.json", "{ not json");
  CHECK_ERRC(Tokenizer::load(dir / "t.json"), Errc::ModelLoadFailure);
}

TEST_CASE("max_length must fit the special tokens") {
  const auto tok = Tokenizer::load(testing::fixtures() / "bundles/paraphrase-TinyBERT-L6-v2/tokenizer.json");
  CHECK_ERRC(tok->encode("some words here", 1), Errc::TokenizationFailure);
  const auto bare = tok->encode("some words here", 2);
  CHECK(bare.ids == tok->encode("").ids);
  CHECK(bare.truncated);
  CHECK(tok->encode("some words here", 3).ids.size() == 3);
}
