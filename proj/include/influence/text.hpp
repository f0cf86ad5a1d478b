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
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by the corpus, preprocess and embed layers. All offsets
// are byte offsets into UTF-8 strings.
namespace influence::text {

struct CodePoint {
  char32_t value = 0;
  std::size_t length = 0;  // encoded length in bytes
};

bool is_valid_utf8(std::string_view s);

// Decodes the code point starting at `pos`. Invalid sequences decode as
// U+FFFD with length 1 so callers always make progress.
CodePoint decode_at(std::string_view s, std::size_t pos);

void append_utf8(std::string& out, char32_t cp);

bool is_letter(char32_t cp);
bool is_upper(char32_t cp);
bool is_space(char32_t cp);
char32_t to_lower(char32_t cp);
char32_t to_upper(char32_t cp);

std::string to_lower(std::string_view s);

// True when `pos` is a UTF-8 boundary (start of a code point or end of text).
bool is_boundary(std::string_view s, std::size_t pos);

std::string_view trim(std::string_view s);

struct WordToken {
  std::string lowered;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Maximal runs of letters, lowercased. Used for term-frequency counting and
// blocklist checks.
std::vector<WordToken> letter_tokens(std::string_view s);

// Letter/non-letter transition test used for whole-word matching: true when
// the code point ending right before `pos` and the one starting at `pos` are
// not both letters.
bool is_word_boundary(std::string_view s, std::size_t pos);

}  // namespace influence::text
