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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace influence::corpus {

enum class Role { Influencer, Influencee };

std::string_view role_name(Role role);
Role parse_role(std::string_view name);

// Years are signed; negative values are BCE.
struct DateRange {
  int start_year = 0;
  int end_year = 0;

  bool operator==(const DateRange&) const = default;
};

void validate(const DateRange& range);

struct ManifestEntry {
  std::string id;
  std::string title;
  Role role = Role::Influencer;
  DateRange date_range;
  std::filesystem::path path;
  // Names of other theories and their proponents that must not survive
  // preprocessing of this document.
  std::vector<std::string> isolation_blocklist;
};

struct Document {
  std::string id;
  std::string title;
  Role role = Role::Influencer;
  DateRange date_range;
  std::string raw_text;
  std::filesystem::path source_path;
};

// Half-open byte range.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

struct Sentence {
  std::size_t index = 0;
  std::string text;
  Span char_span;  // offsets into the owning part's source text

  bool operator==(const Sentence&) const = default;
};

enum class PartLabel { Preamble, Provisions, Whole };

std::string_view part_label_name(PartLabel label);
PartLabel parse_part_label(std::string_view name);

struct DocumentPart {
  std::string part_id;
  std::string parent_doc;
  PartLabel label = PartLabel::Whole;
  std::string source_text;
  // Byte offset of source_text within the parent's raw text. Only meaningful
  // when the part was cut from the raw text without transformation.
  std::size_t offset = 0;
  std::vector<Sentence> sentences;
};

struct PrecedenceRelation {
  bool precedes = false;
  bool overlaps = false;
  bool valid_for_influence = false;

  bool operator==(const PrecedenceRelation&) const = default;
};

// Enacting formula that separates the recitals of an EU regulation from its
// articles.
inline constexpr std::string_view kDefaultSplitMarker = "HAVE ADOPTED THIS REGULATION:";

// Reads a UTF-8 text file. A leading byte-order mark is dropped; nothing else
// is altered.
Document load_document(const std::filesystem::path& path, const ManifestEntry& entry);

// Rule-based splitter: a sentence ends at '.', '!', '?' or '…' (plus any
// closing quotes/brackets) when followed by whitespace or end of text, or at a
// blank line. A period does not end a sentence after a known abbreviation,
// after a dotted token such as "U.S", after a bare number that opens the
// sentence (list numbering), or when the next word starts lowercase.
std::vector<Sentence> segment_sentences(std::string_view text);

// The abbreviation guard list used by segment_sentences (lowercase, without
// the final period).
const std::vector<std::string>& sentence_abbreviations();

// Cuts the influencee at the single occurrence of `marker`. The preamble is
// everything before the marker; the provisions start at the marker.
std::pair<DocumentPart, DocumentPart> split_influencee(const Document& doc,
                                                       std::string_view marker = kDefaultSplitMarker,
                                                       bool strip = false);

DocumentPart whole_part(const Document& doc, std::string text);

// Drops structural artifacts of legislative text: heading lines (Markdown
// headings, "Article 5", "CHAPTER III", "ANNEX I", ...) and leading recital or
// paragraph numbers such as "(12)" or "3.".
std::string strip_structure(std::string_view text);

PrecedenceRelation check_precedence(const DateRange& influencer, const DateRange& influencee);

// Corpus manifest: a TOML file with one [[document]] table per document.
// Relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

}  // namespace influence::corpus
