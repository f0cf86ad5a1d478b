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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "influence/corpus.hpp"

namespace influence::preprocess {

enum class RuleKind { Structural, Annotation, KeepMarker, Lexical };

struct PreprocessRule {
  int id;
  RuleKind kind;
  std::string_view description;
};

inline constexpr int kRuleCount = 12;

// The twelve theory-text rules, in application order.
const std::array<PreprocessRule, kRuleCount>& rules();
RuleKind rule_kind(int rule_id);

enum class SpanAction { Delete, Replace, Keep };

struct AnnotationSpan {
  std::string doc_id;
  std::size_t start = 0;
  std::size_t end = 0;
  int rule_id = 4;
  SpanAction action = SpanAction::Delete;
  std::string replacement;
  std::string note;
};

struct LexiconEntry {
  std::string source_term;
  std::string replacement;
  int rule_id = 10;
};

struct RuleCount {
  // Net characters (bytes) removed by the rule; negative when the rule grew
  // the text.
  std::int64_t chars_removed = 0;
  std::size_t edits = 0;
};

struct PreprocessReport {
  std::string doc_id;
  std::array<RuleCount, kRuleCount> counts{};  // index = rule id - 1
  std::size_t keep_markers = 0;
  std::size_t input_length = 0;
  std::size_t output_length = 0;
  std::string input_hash;
  std::string output_hash;

  std::int64_t total_removed() const;
};

nlohmann::json to_json(const PreprocessReport& report);
PreprocessReport report_from_json(const nlohmann::json& j);

// Rules 1-3 over Markdown-style `#` headings: heading lines are dropped,
// and sections titled like a table of contents/abstract (rule 2) or a
// reference list (rule 3) are dropped together with their content up to
// the next heading of the same or a higher level. Remaining lines are kept
// byte for byte and rejoined with '\n'.
struct StructuralResult {
  struct Removed {
    std::size_t begin;
    std::size_t end;
    int rule_id;
  };
  std::string text;
  std::vector<Removed> removed;  // input coordinates, ascending, disjoint
};

StructuralResult structural_pass(std::string_view text);
std::string apply_structural_rules(const corpus::Document& doc);

// Applies Delete/Replace spans right to left; Keep spans (rule 7) are
// checked and left untouched. Offsets refer to `text`.
std::string apply_annotations(std::string_view text, std::vector<AnnotationSpan> spans,
                              PreprocessReport* report = nullptr);

// Whole-word, longest-match replacement. The first character of a match is
// compared case-insensitively and the replacement copies its case.
std::string normalize_spelling(std::string_view text, const std::vector<LexiconEntry>& lexicon,
                               PreprocessReport* report = nullptr);

// Rule 11 entries replace the term; rule 12 entries append " (translation)"
// after it unless that translation already follows.
std::string replace_foreign_terms(std::string_view text, const std::vector<LexiconEntry>& lexicon,
                                  PreprocessReport* report = nullptr);

struct PreprocessResult {
  std::string text;
  PreprocessReport report;
};

// Full rule pipeline 1 -> 12. Annotation offsets are byte offsets into the
// document's raw text; they are carried through the structural pass.
PreprocessResult preprocess_influencer(const corpus::Document& doc, const std::vector<AnnotationSpan>& spans,
                                       const std::vector<LexiconEntry>& lexicon);

// Blocklisted terms (whole word, case-insensitive) that occur in `text`.
std::vector<std::string> find_blocklisted_terms(std::string_view text, const std::vector<std::string>& blocklist);

// Annotation file: header line "# influence-annotations v1", then one
// tab-separated record per span: doc_id, start, end, rule, action
// (delete|replace|keep), replacement, note. Backslash escapes \t \n \\ are
// recognised in the last two fields. Blank lines and '#' comments are skipped.
inline constexpr std::string_view kAnnotationHeader = "# influence-annotations v1";
std::vector<AnnotationSpan> parse_annotations(std::string_view content, std::string_view origin = "<memory>");
std::vector<AnnotationSpan> load_annotations(const std::filesystem::path& path);
std::string format_annotations(const std::vector<AnnotationSpan>& spans);

// Lexicon file: header "# influence-lexicon v1", then tab-separated
// rule_id, term, replacement records.
inline constexpr std::string_view kLexiconHeader = "# influence-lexicon v1";
std::vector<LexiconEntry> parse_lexicon(std::string_view content, std::string_view origin = "<memory>");
std::vector<LexiconEntry> load_lexicon(const std::filesystem::path& path);

// Checks entry uniqueness and that no rule 10/11 replacement re-introduces a
// source term (which would break idempotence).
void validate_lexicon(const std::vector<LexiconEntry>& lexicon);

}  // namespace influence::preprocess
