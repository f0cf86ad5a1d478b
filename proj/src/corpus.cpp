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

#include "influence/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <toml.hpp>

#include "influence/errors.hpp"
#include "influence/text.hpp"

namespace influence::corpus {

namespace fs = std::filesystem;

std::string_view role_name(Role role) {
  return role == Role::Influencer ? "influencer" : "influencee";
}

Role parse_role(std::string_view name) {
  const std::string lowered = text::to_lower(name);
  if (lowered == "influencer") return Role::Influencer;
  if (lowered == "influencee") return Role::Influencee;
  throw Error(Errc::ConfigInvalid, fmt::format("unknown document role '{}'", name));
}

std::string_view part_label_name(PartLabel label) {
  switch (label) {
    case PartLabel::Preamble: return "preamble";
    case PartLabel::Provisions: return "provisions";
    case PartLabel::Whole: return "whole";
  }
  return "whole";
}

PartLabel parse_part_label(std::string_view name) {
  if (name == "preamble") return PartLabel::Preamble;
  if (name == "provisions") return PartLabel::Provisions;
  if (name == "whole") return PartLabel::Whole;
  throw Error(Errc::ConfigInvalid, fmt::format("unknown part label '{}'", name));
}

void validate(const DateRange& range) {
  if (range.start_year > range.end_year) {
    throw Error(Errc::InvalidDateRange,
                fmt::format("start year {} is after end year {}", range.start_year, range.end_year));
  }
}

Document load_document(const fs::path& path, const ManifestEntry& entry) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(Errc::MissingFile, fmt::format("document '{}' not found at {}", entry.id, path.string()));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(Errc::MissingFile, fmt::format("cannot open {} for document '{}'", path.string(), entry.id));
  }
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xEF &&
      static_cast<unsigned char>(bytes[1]) == 0xBB && static_cast<unsigned char>(bytes[2]) == 0xBF) {
    bytes.erase(0, 3);
  }
  if (!text::is_valid_utf8(bytes)) {
    throw Error(Errc::NotUtf8, fmt::format("{} is not valid UTF-8", path.string()));
  }
  if (text::trim(bytes).empty()) {
    throw Error(Errc::EmptyDocument, fmt::format("document '{}' at {} is empty", entry.id, path.string()));
  }
  validate(entry.date_range);

  Document doc;
  doc.id = entry.id;
  doc.title = entry.title;
  doc.role = entry.role;
  doc.date_range = entry.date_range;
  doc.raw_text = std::move(bytes);
  doc.source_path = path;
  return doc;
}

// ---------------------------------------------------------------------------
// Sentence segmentation.

namespace {

const std::set<std::string, std::less<>>& abbreviation_set() {
  static const std::set<std::string, std::less<>> set = [] {
    std::set<std::string, std::less<>> s;
    for (const auto& a : sentence_abbreviations()) s.insert(a);
    return s;
  }();
  return set;
}

bool is_terminator(char32_t cp) { return cp == '.' || cp == '!' || cp == '?' || cp == U'…'; }

bool is_closer(char32_t cp) {
  return cp == '"' || cp == '\'' || cp == ')' || cp == ']' || cp == U'’' || cp == U'”' ||
         cp == U'»';
}

bool is_opener(char32_t cp) {
  return cp == '"' || cp == '\'' || cp == '(' || cp == '[' || cp == U'‘' || cp == U'“' ||
         cp == U'«';
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// "1", "12", "1.2" and "1.2.3" style list labels.
bool is_enumeration_label(std::string_view word) {
  if (word.empty()) return false;
  std::size_t start = 0;
  while (start <= word.size()) {
    const std::size_t dot = word.find('.', start);
    const std::string_view piece = word.substr(start, dot == std::string_view::npos ? word.npos : dot - start);
    if (!all_digits(piece) || piece.size() > 3) return false;
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return true;
}

// Decides whether the period at `dot` (ending the candidate at `after`) closes
// the sentence that began at `sentence_begin`.
bool period_ends_sentence(std::string_view s, std::size_t sentence_begin, std::size_t dot, std::size_t after) {
  // Token immediately before the period.
  std::size_t wb = dot;
  while (wb > sentence_begin) {
    std::size_t p = wb - 1;
    while (p > sentence_begin && !text::is_boundary(s, p)) --p;
    if (text::is_space(text::decode_at(s, p).value)) break;
    wb = p;
  }
  while (wb < dot && is_opener(text::decode_at(s, wb).value)) wb += text::decode_at(s, wb).length;
  const std::string_view word = s.substr(wb, dot - wb);

  if (!word.empty()) {
    const std::string lowered = text::to_lower(word);
    if (abbreviation_set().count(lowered) != 0) return false;
    // Dotted tokens such as "U.S" or "e.g" (the final period is excluded).
    if (word.find('.') != std::string_view::npos && !is_enumeration_label(word)) {
      const bool has_letter = std::any_of(word.begin(), word.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
      });
      if (has_letter) return false;
    }
    if (wb == sentence_begin && is_enumeration_label(word)) return false;
  }

  // A lowercase continuation means the period was not terminal.
  std::size_t p = after;
  while (p < s.size() && text::is_space(text::decode_at(s, p).value)) {
    if (s[p] == '\n') {
      // Blank lines always separate; handled by the caller.
      std::size_t q = p + 1;
      while (q < s.size() && (s[q] == ' ' || s[q] == '\t' || s[q] == '\r')) ++q;
      if (q < s.size() && s[q] == '\n') return true;
    }
    p += text::decode_at(s, p).length;
  }
  if (p < s.size()) {
    const char32_t next = text::decode_at(s, p).value;
    if (text::is_letter(next) && !text::is_upper(next) && text::to_upper(next) != next) return false;
  }
  return true;
}

// True when a newline at `pos` starts a blank line run.
bool blank_line_at(std::string_view s, std::size_t pos) {
  if (s[pos] != '\n') return false;
  std::size_t q = pos + 1;
  while (q < s.size() && (s[q] == ' ' || s[q] == '\t' || s[q] == '\r')) ++q;
  return q < s.size() && s[q] == '\n';
}

}  // namespace

const std::vector<std::string>& sentence_abbreviations() {
  static const std::vector<std::string> list = {
      "al",    "approx", "art",  "arts",  "b.c",   "b.c.e", "c.e",  "ca",     "cf",   "ch",
      "chap",  "cit",    "co",   "corp",  "dir",   "dr",    "e.g",  "e.u",    "ed",   "eds",
      "eq",    "eqs",    "fig",  "figs",  "i.e",   "ibid",  "inc",  "jr",     "ltd",  "mr",
      "mrs",   "ms",     "no",   "nos",   "nr",    "oj",    "op",   "para",   "paras", "par",
      "pp",    "prof",   "pt",   "rec",   "reg",   "sec",   "secs", "sr",     "st",   "subpara",
      "u.k",   "u.s",    "viz",  "vol",   "vols",  "vs",    "a.d",
  };
  return list;
}

std::vector<Sentence> segment_sentences(std::string_view s) {
  if (text::trim(s).empty()) throw Error(Errc::EmptyText, "cannot segment empty text");

  std::vector<Sentence> out;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t begin = kNone;
  std::size_t last_non_space = 0;  // end offset of the last non-space code point

  auto emit = [&](std::size_t end) {
    Sentence sent;
    sent.index = out.size();
    sent.char_span = {begin, end};
    sent.text = std::string(s.substr(begin, end - begin));
    out.push_back(std::move(sent));
    begin = kNone;
  };

  std::size_t pos = 0;
  while (pos < s.size()) {
    const text::CodePoint c = text::decode_at(s, pos);
    if (text::is_space(c.value)) {
      if (begin != kNone && blank_line_at(s, pos)) emit(last_non_space);
      pos += c.length;
      continue;
    }
    if (begin == kNone) begin = pos;
    if (!is_terminator(c.value)) {
      pos += c.length;
      last_non_space = pos;
      continue;
    }

    std::size_t after = pos + c.length;
    while (after < s.size()) {
      const text::CodePoint n = text::decode_at(s, after);
      if (!is_terminator(n.value) && !is_closer(n.value)) break;
      after += n.length;
    }
    last_non_space = after;
    const bool at_gap = after == s.size() || text::is_space(text::decode_at(s, after).value);
    // Only a single period is subject to the abbreviation guards; runs such
    // as "..." or "?!" end the sentence outright.
    const bool single_period = c.value == '.' && (after == pos + 1 || !is_terminator(text::decode_at(s, pos + 1).value));
    if (at_gap && (!single_period || period_ends_sentence(s, begin, pos, after))) {
      emit(after);
    }
    pos = after;
  }
  if (begin != kNone) emit(last_non_space);
  return out;
}

// ---------------------------------------------------------------------------
// Parts.

namespace {

DocumentPart make_part(const Document& doc, PartLabel label, std::string text, std::size_t offset) {
  DocumentPart part;
  part.parent_doc = doc.id;
  part.label = label;
  part.part_id = fmt::format("{}.{}", doc.id, part_label_name(label));
  part.source_text = std::move(text);
  part.offset = offset;
  part.sentences = segment_sentences(part.source_text);
  return part;
}

}  // namespace

std::pair<DocumentPart, DocumentPart> split_influencee(const Document& doc, std::string_view marker, bool strip) {
  if (doc.role != Role::Influencee) {
    throw Error(Errc::RoleMismatch, fmt::format("document '{}' is not an influencee", doc.id));
  }
  if (marker.empty()) throw Error(Errc::ConfigInvalid, "split marker is empty");
  const std::string_view raw = doc.raw_text;
  const std::size_t first = raw.find(marker);
  if (first == std::string_view::npos) {
    throw Error(Errc::MarkerNotFound, fmt::format("split marker '{}' not found in '{}'", marker, doc.id));
  }
  if (raw.find(marker, first + 1) != std::string_view::npos) {
    throw Error(Errc::MarkerAmbiguous, fmt::format("split marker '{}' occurs more than once in '{}'", marker, doc.id));
  }
  std::string preamble(raw.substr(0, first));
  std::string provisions(raw.substr(first));
  if (strip) {
    preamble = strip_structure(preamble);
    provisions = strip_structure(provisions);
  }
  return {make_part(doc, PartLabel::Preamble, std::move(preamble), 0),
          make_part(doc, PartLabel::Provisions, std::move(provisions), first)};
}

DocumentPart whole_part(const Document& doc, std::string text) {
  return make_part(doc, PartLabel::Whole, std::move(text), 0);
}

std::string strip_structure(std::string_view input) {
  static const std::regex heading(
      R"(^\s*(#{1,6}\s.*|(Article|ARTICLE)\s+\d+[a-z]?|(CHAPTER|Chapter|TITLE|Title|ANNEX|Annex)\s+[IVXLC]+|(SECTION|Section)\s+\d+)\s*$)");
  static const std::regex leading_number(R"(^(\s*)(\(\d+\)|\d+\.)\s+)");

  std::string out;
  out.reserve(input.size());
  std::size_t pos = 0;
  bool first = true;
  while (pos <= input.size()) {
    const std::size_t nl = input.find('\n', pos);
    const std::string line(input.substr(pos, nl == std::string_view::npos ? input.npos : nl - pos));
    if (!std::regex_match(line, heading)) {
      if (!first) out.push_back('\n');
      out += std::regex_replace(line, leading_number, "$1", std::regex_constants::format_first_only);
      first = false;
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

PrecedenceRelation check_precedence(const DateRange& influencer, const DateRange& influencee) {
  PrecedenceRelation rel;
  rel.precedes = influencer.start_year < influencee.start_year;
  rel.overlaps = influencer.start_year <= influencee.end_year && influencee.start_year <= influencer.end_year;
  rel.valid_for_influence = rel.precedes || rel.overlaps;
  return rel;
}

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(Errc::MissingFile, fmt::format("corpus manifest not found: {}", path.string()));
  }
  toml::table table;
  try {
    table = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw Error(Errc::ConfigInvalid, fmt::format("{}: {}", path.string(), e.description()));
  }
  const auto* docs = table["document"].as_array();
  if (docs == nullptr || docs->empty()) {
    throw Error(Errc::ConfigInvalid, fmt::format("{}: no [[document]] entries", path.string()));
  }
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::set<std::string> ids;
  for (const auto& node : *docs) {
    const auto* t = node.as_table();
    if (t == nullptr) throw Error(Errc::ConfigInvalid, "[[document]] entry is not a table");
    auto need_str = [&](const char* key) {
      auto v = (*t)[key].value<std::string>();
      if (!v || v->empty()) throw Error(Errc::ConfigInvalid, fmt::format("{}: document entry missing '{}'", path.string(), key));
      return *v;
    };
    auto need_int = [&](const char* key) {
      auto v = (*t)[key].value<std::int64_t>();
      if (!v) throw Error(Errc::ConfigInvalid, fmt::format("{}: document entry missing integer '{}'", path.string(), key));
      return static_cast<int>(*v);
    };
    ManifestEntry e;
    e.id = need_str("id");
    e.title = (*t)["title"].value_or(e.id);
    e.role = parse_role(need_str("role"));
    e.date_range = {need_int("start_year"), need_int("end_year")};
    validate(e.date_range);
    fs::path p = need_str("path");
    e.path = p.is_absolute() ? p : base / p;
    if (const auto* block = (*t)["isolation_blocklist"].as_array()) {
      for (const auto& term : *block) {
        if (auto s = term.value<std::string>()) e.isolation_blocklist.push_back(*s);
      }
    }
    if (!ids.insert(e.id).second) {
      throw Error(Errc::DuplicateId, fmt::format("{}: duplicate document id '{}'", path.string(), e.id));
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace influence::corpus
