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

#include <doctest.h>

#include "influence/hash.hpp"
#include "influence/text.hpp"

namespace text = influence::text;

TEST_CASE("utf8 validation") {
  CHECK(text::is_valid_utf8("plain"));
  CHECK(text::is_valid_utf8("caf\xc3\xa9"));
  CHECK_FALSE(text::is_valid_utf8("\xc3"));
  CHECK_FALSE(text::is_valid_utf8("\xc0\xaf"));          // overlong
  CHECK_FALSE(text::is_valid_utf8("\xed\xa0\x80"));      // surrogate
  CHECK_FALSE(text::is_valid_utf8("\xf4\x90\x80\x80"));  // past U+10FFFF
}

TEST_CASE("decode and encode agree") {
  for (char32_t cp : {U'a', U'é', U'中', U'\U0001F600'}) {
    std::string s;
    text::append_utf8(s, cp);
    const auto d = text::decode_at(s, 0);
    CHECK(d.value == cp);
    CHECK(d.length == s.size());
  }
  const auto bad = text::decode_at("\xff", 0);
  CHECK(bad.value == U'�');
  CHECK(bad.length == 1);
}

TEST_CASE("letter tokens lowercase maximal letter runs") {
  const auto toks = text::letter_tokens("Law governs law-making, 2024!");
  REQUIRE(toks.size() == 4);
  CHECK(toks[0].lowered == "law");
  CHECK(toks[1].lowered == "governs");
  CHECK(toks[2].lowered == "law");
  CHECK(toks[3].lowered == "making");
  CHECK(toks[3].begin == 16);
  CHECK(toks[3].end == 22);
  const auto accented = text::letter_tokens("\xc3\x89thique");
  REQUIRE(accented.size() == 1);
  CHECK(accented[0].lowered == "\xc3\xa9thique");
}

TEST_CASE("word boundaries sit between letters and non-letters") {
  const std::string s = "ab cd";
  CHECK(text::is_word_boundary(s, 0));
  CHECK_FALSE(text::is_word_boundary(s, 1));
  CHECK(text::is_word_boundary(s, 2));
  CHECK(text::is_word_boundary(s, 3));
  CHECK(text::is_word_boundary(s, 5));
}

TEST_CASE("sha256 known answers") {
  CHECK(influence::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(influence::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // first eight bytes ba 78 16 bf 8f 01 cf ea, little-endian
  CHECK(influence::sha256_u64("abc") == 0xeacf018fbf1678baULL);
}
