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

#include "influence/preprocess.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include <fmt/format.h>

#include "influence/errors.hpp"
#include "influence/hash.hpp"
#include "influence/text.hpp"

namespace influence::preprocess {

namespace fs = std::filesystem;

const std::array<PreprocessRule, kRuleCount>& rules() {
  static const std::array<PreprocessRule, kRuleCount> table = {{
      {1, RuleKind::Structural, "Drop titles, subtitles and other headings."},
      {2, RuleKind::Structural, "Drop meta sections about the document itself (contents, abstract)."},
      {3, RuleKind::Structural, "Drop the reference list."},
      {4, RuleKind::Annotation, "Delete proper nouns."},
      {5, RuleKind::Annotation, "Delete passages on what the theory is not; negative examples stay."},
      {6, RuleKind::Annotation, "Reduce incremental arguments to their conclusions."},
      {7, RuleKind::KeepMarker, "Retain comparisons between variants of the same theory."},
      {8, RuleKind::Annotation, "Delete references to religions and religious symbols."},
      {9, RuleKind::Annotation, "Delete descriptions of, references to, or comparisons with other theories."},
      {10, RuleKind::Lexical, "Normalise spelling to US English."},
      {11, RuleKind::Lexical, "Replace foreign-language terms with a US-English equivalent."},
      {12, RuleKind::Lexical, "Append an English translation to foreign terms without an equivalent."},
  }};
  return table;
}

RuleKind rule_kind(int rule_id) {
  if (rule_id < 1 || rule_id > kRuleCount) {
    throw Error(Errc::InvalidAnnotation, fmt::format("rule id {} outside 1..12", rule_id));
  }
  return rules()[static_cast<std::size_t>(rule_id - 1)].kind;
}

std::int64_t PreprocessReport::total_removed() const {
  std::int64_t sum = 0;
  for (const auto& c : counts) sum += c.chars_removed;
  return sum;
}

nlohmann::json to_json(const PreprocessReport& report) {
  nlohmann::json rules_json = nlohmann::json::array();
  for (int id = 1; id <= kRuleCount; ++id) {
    const auto& c = report.counts[static_cast<std::size_t>(id - 1)];
    rules_json.push_back({{"rule", id}, {"chars_removed", c.chars_removed}, {"edits", c.edits}});
  }
  return {{"doc_id", report.doc_id},
          {"rules", rules_json},
          {"keep_markers", report.keep_markers},
          {"input_length", report.input_length},
          {"output_length", report.output_length},
          {"input_hash", report.input_hash},
          {"output_hash", report.output_hash}};
}

PreprocessReport report_from_json(const nlohmann::json& j) {
  PreprocessReport r;
  r.doc_id = j.at("doc_id").get<std::string>();
  for (const auto& rule : j.at("rules")) {
    const int id = rule.at("rule").get<int>();
    if (id < 1 || id > kRuleCount) continue;
    auto& c = r.counts[static_cast<std::size_t>(id - 1)];
    c.chars_removed = rule.at("chars_removed").get<std::int64_t>();
    c.edits = rule.at("edits").get<std::size_t>();
  }
  r.keep_markers = j.value("keep_markers", std::size_t{0});
  r.input_length = j.at("input_length").get<std::size_t>();
  r.output_length = j.at("output_length").get<std::size_t>();
  r.input_hash = j.at("input_hash").get<std::string>();
  r.output_hash = j.at("output_hash").get<std::string>();
  return r;
}

// ---------------------------------------------------------------------------
// Structural rules.

namespace {

struct Heading {
  int level = 0;
  std::string title;  // lowercased, trimmed, trailing '#'/':' removed
};

bool parse_heading(std::string_view line, Heading& out) {
  std::size_t p = 0;
  while (p < line.size() && p < 3 && line[p] == ' ') ++p;
  std::size_t hashes = 0;
  while (p + hashes < line.size() && line[p + hashes] == '#') ++hashes;
  if (hashes == 0 || hashes > 6) return false;
  const std::size_t after = p + hashes;
  if (after < line.size() && line[after] != ' ' && line[after] != '\t' && line[after] != '\r') return false;
  std::string_view title = text::trim(line.substr(after));
  while (!title.empty() && (title.back() == '#' || title.back() == ':')) title.remove_suffix(1);
  out.level = static_cast<int>(hashes);
  out.title = text::to_lower(text::trim(title));
  return true;
}

int section_rule(const std::string& title) {
  static const std::set<std::string, std::less<>> meta = {
      "abstract",      "table of contents", "contents",         "toc",
      "entry contents", "academic tools",   "other internet resources",
      "related entries", "acknowledgments", "acknowledgements", "copyright"};
  static const std::set<std::string, std::less<>> references = {
      "references", "bibliography", "works cited", "reference list", "sources", "further reading"};
  if (meta.count(title) != 0) return 2;
  if (references.count(title) != 0) return 3;
  return 0;
}

}  // namespace

StructuralResult structural_pass(std::string_view input) {
  struct Line {
    std::size_t begin;
    std::size_t end;  // excluding '\n'
    int rule = 0;     // 0 = kept
  };
  std::vector<Line> lines;
  for (std::size_t pos = 0;;) {
    const std::size_t nl = input.find('\n', pos);
    lines.push_back({pos, nl == std::string_view::npos ? input.size() : nl});
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }

  int active_rule = 0;
  int active_level = 0;
  for (auto& line : lines) {
    Heading h;
    const bool heading = parse_heading(input.substr(line.begin, line.end - line.begin), h);
    if (heading && active_rule != 0 && h.level <= active_level) active_rule = 0;
    if (heading && active_rule == 0) {
      const int rule = section_rule(h.title);
      if (rule != 0) {
        active_rule = rule;
        active_level = h.level;
      }
      line.rule = rule != 0 ? rule : 1;
      continue;
    }
    if (active_rule != 0) line.rule = active_rule;
  }

  StructuralResult result;
  const std::size_t n = lines.size();
  // Index of the first line of the trailing run of removed lines.
  std::size_t tail = n;
  while (tail > 0 && lines[tail - 1].rule != 0) --tail;

  for (std::size_t i = 0; i < n; ++i) {
    const Line& line = lines[i];
    if (line.rule == 0) {
      result.text.append(input.substr(line.begin, line.end - line.begin));
      if (i + 1 < tail) result.text.push_back('\n');
      continue;
    }
    std::size_t b = line.begin;
    std::size_t e = i + 1 < n ? lines[i + 1].begin : input.size();
    // The separator in front of a trailing removed run belongs to it.
    if (i == tail && i > 0) b -= 1;
    if (!result.removed.empty() && result.removed.back().end == b && result.removed.back().rule_id == line.rule) {
      result.removed.back().end = e;
    } else {
      result.removed.push_back({b, e, line.rule});
    }
  }
  return result;
}

std::string apply_structural_rules(const corpus::Document& doc) { return structural_pass(doc.raw_text).text; }

// ---------------------------------------------------------------------------
// Annotation spans.

namespace {

void check_span_shape(const AnnotationSpan& s) {
  if (s.start >= s.end) {
    throw Error(Errc::InvalidAnnotation, fmt::format("span [{}, {}) in '{}' is empty or reversed", s.start, s.end, s.doc_id));
  }
  const RuleKind kind = rule_kind(s.rule_id);
  if (kind != RuleKind::Annotation && kind != RuleKind::KeepMarker) {
    throw Error(Errc::InvalidAnnotation, fmt::format("rule {} cannot be applied through annotations", s.rule_id));
  }
  if ((kind == RuleKind::KeepMarker) != (s.action == SpanAction::Keep)) {
    throw Error(Errc::InvalidAnnotation,
                fmt::format("span [{}, {}) in '{}': keep is the only action for rule 7 and rule 7 only", s.start, s.end, s.doc_id));
  }
  if (s.action == SpanAction::Delete && !s.replacement.empty()) {
    throw Error(Errc::InvalidAnnotation, fmt::format("delete span [{}, {}) carries a replacement", s.start, s.end));
  }
}

std::int64_t signed_len(std::size_t n) { return static_cast<std::int64_t>(n); }

}  // namespace

std::string apply_annotations(std::string_view input, std::vector<AnnotationSpan> spans, PreprocessReport* report) {
  for (const auto& s : spans) {
    check_span_shape(s);
    if (s.end > input.size() || !text::is_boundary(input, s.start) || !text::is_boundary(input, s.end)) {
      throw Error(Errc::SpanOutOfBounds,
                  fmt::format("span [{}, {}) in '{}' does not fit a text of {} bytes", s.start, s.end, s.doc_id, input.size()));
    }
  }
  std::sort(spans.begin(), spans.end(), [](const AnnotationSpan& a, const AnnotationSpan& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].start < spans[i - 1].end) {
      throw Error(Errc::OverlappingSpans, fmt::format("spans [{}, {}) and [{}, {}) overlap", spans[i - 1].start,
                                                      spans[i - 1].end, spans[i].start, spans[i].end));
    }
  }

  std::string out(input);
  for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
    const std::size_t len = it->end - it->start;
    if (it->action == SpanAction::Keep) {
      if (report != nullptr) ++report->keep_markers;
      continue;
    }
    const std::string_view replacement = it->action == SpanAction::Replace ? std::string_view(it->replacement) : "";
    out.replace(it->start, len, replacement);
    if (report != nullptr) {
      auto& c = report->counts[static_cast<std::size_t>(it->rule_id - 1)];
      c.chars_removed += signed_len(len) - signed_len(replacement.size());
      ++c.edits;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexical rules.

namespace {

// Entries bucketed by the lowercased first code point, longest term first.
class TermMatcher {
 public:
  explicit TermMatcher(const std::vector<const LexiconEntry*>& entries) {
    for (const LexiconEntry* e : entries) {
      const char32_t first = text::to_lower(text::decode_at(e->source_term, 0).value);
      buckets_[first].push_back(e);
    }
    for (auto& [_, list] : buckets_) {
      std::stable_sort(list.begin(), list.end(), [](const LexiconEntry* a, const LexiconEntry* b) {
        return a->source_term.size() > b->source_term.size();
      });
    }
  }

  struct Match {
    const LexiconEntry* entry = nullptr;
    std::size_t length = 0;
    bool upper_first = false;
  };

  // Longest whole-word match starting at `pos`, which must be a word
  // boundary.
  Match match_at(std::string_view s, std::size_t pos) const {
    const text::CodePoint first = text::decode_at(s, pos);
    const auto it = buckets_.find(text::to_lower(first.value));
    if (it == buckets_.end()) return {};
    for (const LexiconEntry* e : it->second) {
      const std::string_view term = e->source_term;
      const std::size_t term_first = text::decode_at(term, 0).length;
      const std::size_t match_len = first.length + (term.size() - term_first);
      if (pos + match_len > s.size()) continue;
      if (s.substr(pos + first.length, term.size() - term_first) != term.substr(term_first)) continue;
      if (!text::is_word_boundary(s, pos + match_len)) continue;
      return {e, match_len, text::is_upper(first.value)};
    }
    return {};
  }

 private:
  std::map<char32_t, std::vector<const LexiconEntry*>> buckets_;
};

std::string with_case_of(std::string_view replacement, bool upper_first) {
  if (replacement.empty()) return {};
  const text::CodePoint first = text::decode_at(replacement, 0);
  std::string out;
  text::append_utf8(out, upper_first ? text::to_upper(first.value) : text::to_lower(first.value));
  out.append(replacement.substr(first.length));
  return out;
}

// One left-to-right pass applying `entries` (all of one rule).
std::string lexical_pass(std::string_view input, const std::vector<const LexiconEntry*>& entries, int rule_id,
                         PreprocessReport* report) {
  if (entries.empty()) return std::string(input);
  const TermMatcher matcher(entries);
  std::string out;
  out.reserve(input.size());
  std::size_t pos = 0;
  while (pos < input.size()) {
    if (text::is_word_boundary(input, pos)) {
      const auto m = matcher.match_at(input, pos);
      if (m.entry != nullptr) {
        const std::string_view matched = input.substr(pos, m.length);
        std::string emitted;
        if (rule_id == 12) {
          const std::string suffix = fmt::format(" ({})", m.entry->replacement);
          emitted = std::string(matched);
          if (input.substr(pos + m.length, suffix.size()) != suffix) emitted += suffix;
        } else {
          emitted = with_case_of(m.entry->replacement, m.upper_first);
        }
        if (report != nullptr && emitted != matched) {
          auto& c = report->counts[static_cast<std::size_t>(rule_id - 1)];
          c.chars_removed += signed_len(matched.size()) - signed_len(emitted.size());
          ++c.edits;
        }
        out += emitted;
        pos += m.length;
        continue;
      }
    }
    const std::size_t len = text::decode_at(input, pos).length;
    out.append(input.substr(pos, len));
    pos += len;
  }
  return out;
}

std::vector<const LexiconEntry*> entries_for(const std::vector<LexiconEntry>& lexicon, int rule_id) {
  std::vector<const LexiconEntry*> out;
  for (const auto& e : lexicon) {
    if (e.rule_id == rule_id) out.push_back(&e);
  }
  return out;
}

}  // namespace

std::string normalize_spelling(std::string_view input, const std::vector<LexiconEntry>& lexicon, PreprocessReport* report) {
  return lexical_pass(input, entries_for(lexicon, 10), 10, report);
}

std::string replace_foreign_terms(std::string_view input, const std::vector<LexiconEntry>& lexicon,
                                  PreprocessReport* report) {
  const std::string replaced = lexical_pass(input, entries_for(lexicon, 11), 11, report);
  return lexical_pass(replaced, entries_for(lexicon, 12), 12, report);
}

void validate_lexicon(const std::vector<LexiconEntry>& lexicon) {
  std::set<std::pair<std::string, int>> seen;
  for (const auto& e : lexicon) {
    if (e.rule_id < 10 || e.rule_id > 12) {
      throw Error(Errc::InvalidLexicon, fmt::format("lexicon entry '{}' has non-lexical rule {}", e.source_term, e.rule_id));
    }
    if (e.source_term.empty() || !text::is_valid_utf8(e.source_term)) {
      throw Error(Errc::InvalidLexicon, "lexicon entry with empty or invalid source term");
    }
    if (!seen.insert({e.source_term, e.rule_id}).second) {
      throw Error(Errc::InvalidLexicon, fmt::format("duplicate lexicon entry '{}' for rule {}", e.source_term, e.rule_id));
    }
  }
  for (int rule : {10, 11}) {
    const auto entries = entries_for(lexicon, rule);
    if (entries.empty()) continue;
    const TermMatcher matcher(entries);
    for (const LexiconEntry* e : entries) {
      const std::string_view r = e->replacement;
      for (std::size_t pos = 0; pos < r.size(); pos += text::decode_at(r, pos).length) {
        if (text::is_word_boundary(r, pos) && matcher.match_at(r, pos).entry != nullptr) {
          throw Error(Errc::InvalidLexicon,
                      fmt::format("replacement '{}' for '{}' contains a rule-{} source term", e->replacement, e->source_term, rule));
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Pipeline.

namespace {

// Maps an offset of the structural pass input onto its output.
class OffsetMap {
 public:
  explicit OffsetMap(const std::vector<StructuralResult::Removed>& removed) : removed_(removed) {}

  std::size_t map(std::size_t x) const {
    std::size_t shift = 0;
    for (const auto& r : removed_) {
      if (r.begin >= x) break;
      shift += std::min(r.end, x) - r.begin;
    }
    return x - shift;
  }

  std::size_t removed_within(std::size_t b, std::size_t e) const {
    std::size_t n = 0;
    for (const auto& r : removed_) {
      const std::size_t lo = std::max(b, r.begin);
      const std::size_t hi = std::min(e, r.end);
      if (lo < hi) n += hi - lo;
    }
    return n;
  }

 private:
  const std::vector<StructuralResult::Removed>& removed_;
};

}  // namespace

PreprocessResult preprocess_influencer(const corpus::Document& doc, const std::vector<AnnotationSpan>& spans,
                                       const std::vector<LexiconEntry>& lexicon) {
  if (doc.role != corpus::Role::Influencer) {
    throw Error(Errc::PolicyViolation,
                fmt::format("document '{}' is the influencee; it is scored as-is and never preprocessed", doc.id));
  }
  validate_lexicon(lexicon);

  PreprocessResult result;
  PreprocessReport& report = result.report;
  report.doc_id = doc.id;
  report.input_length = doc.raw_text.size();
  report.input_hash = sha256_hex(doc.raw_text);

  // Rules 1-3.
  StructuralResult structural = structural_pass(doc.raw_text);
  for (const auto& r : structural.removed) {
    auto& c = report.counts[static_cast<std::size_t>(r.rule_id - 1)];
    c.chars_removed += signed_len(r.end - r.begin);
    ++c.edits;
  }

  // Rules 4-9: translate raw offsets into the structural output.
  const OffsetMap offsets(structural.removed);
  std::vector<AnnotationSpan> mapped;
  for (const auto& s : spans) {
    if (s.doc_id != doc.id) continue;
    check_span_shape(s);
    if (s.end > doc.raw_text.size() || !text::is_boundary(doc.raw_text, s.start) ||
        !text::is_boundary(doc.raw_text, s.end)) {
      throw Error(Errc::SpanOutOfBounds, fmt::format("span [{}, {}) does not fit '{}' ({} bytes)", s.start, s.end,
                                                     doc.id, doc.raw_text.size()));
    }
    AnnotationSpan m = s;
    m.start = offsets.map(s.start);
    m.end = offsets.map(s.end);
    if (s.action != SpanAction::Delete && offsets.removed_within(s.start, s.end) != 0) {
      throw Error(Errc::SpanConflict, fmt::format("{} span [{}, {}) in '{}' crosses text removed by rules 1-3",
                                                  s.action == SpanAction::Keep ? "keep" : "replace", s.start, s.end, doc.id));
    }
    if (m.start == m.end) continue;  // entirely inside removed structure
    mapped.push_back(std::move(m));
  }
  // Overlap is judged on the raw offsets the annotator wrote.
  {
    std::vector<std::pair<std::size_t, std::size_t>> raw;
    for (const auto& s : spans) {
      if (s.doc_id == doc.id) raw.emplace_back(s.start, s.end);
    }
    std::sort(raw.begin(), raw.end());
    for (std::size_t i = 1; i < raw.size(); ++i) {
      if (raw[i].first < raw[i - 1].second) {
        throw Error(Errc::OverlappingSpans, fmt::format("spans [{}, {}) and [{}, {}) in '{}' overlap", raw[i - 1].first,
                                                        raw[i - 1].second, raw[i].first, raw[i].second, doc.id));
      }
    }
  }
  std::string current = apply_annotations(structural.text, std::move(mapped), &report);

  // Rules 10-12.
  current = normalize_spelling(current, lexicon, &report);
  current = replace_foreign_terms(current, lexicon, &report);

  report.output_length = current.size();
  report.output_hash = sha256_hex(current);
  result.text = std::move(current);
  return result;
}

std::vector<std::string> find_blocklisted_terms(std::string_view input, const std::vector<std::string>& blocklist) {
  const std::string lowered = text::to_lower(input);
  std::vector<std::string> hits;
  for (const auto& term : blocklist) {
    const std::string needle = text::to_lower(term);
    if (needle.empty()) continue;
    for (std::size_t pos = lowered.find(needle); pos != std::string::npos; pos = lowered.find(needle, pos + 1)) {
      if (text::is_word_boundary(lowered, pos) && text::is_word_boundary(lowered, pos + needle.size())) {
        hits.push_back(term);
        break;
      }
    }
  }
  return hits;
}

// ---------------------------------------------------------------------------
// Files.

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, fmt::format("cannot read {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  for (std::size_t pos = 0;;) {
    const std::size_t tab = line.find('\t', pos);
    fields.push_back(line.substr(pos, tab == std::string_view::npos ? line.npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return fields;
}

std::string unescape(std::string_view field) {
  std::string out;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field[i] == '\\' && i + 1 < field.size()) {
      const char n = field[++i];
      out.push_back(n == 't' ? '\t' : n == 'n' ? '\n' : n);
    } else {
      out.push_back(field[i]);
    }
  }
  return out;
}

std::string escape(std::string_view field) {
  std::string out;
  for (char c : field) {
    if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else if (c == '\\') out += "\\\\";
    else out.push_back(c);
  }
  return out;
}

template <typename Fn>
void for_each_record(std::string_view content, std::string_view header, std::string_view origin, Errc errc, Fn&& fn) {
  std::size_t line_no = 0;
  bool saw_header = false;
  for (std::size_t pos = 0; pos < content.size();) {
    const std::size_t nl = content.find('\n', pos);
    std::string_view line = content.substr(pos, nl == std::string_view::npos ? content.npos : nl - pos);
    pos = nl == std::string_view::npos ? content.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!saw_header) {
      if (line != header) {
        throw Error(errc, fmt::format("{}: first line must be '{}'", origin, header));
      }
      saw_header = true;
      continue;
    }
    if (text::trim(line).empty() || line.front() == '#') continue;
    fn(split_tabs(line), line_no);
  }
  if (!saw_header) throw Error(errc, fmt::format("{}: missing header '{}'", origin, header));
}

std::size_t parse_size(std::string_view field, std::string_view origin, std::size_t line_no, Errc errc) {
  std::size_t value = 0;
  if (field.empty()) throw Error(errc, fmt::format("{}:{}: empty number", origin, line_no));
  for (char c : field) {
    if (c < '0' || c > '9') throw Error(errc, fmt::format("{}:{}: '{}' is not a number", origin, line_no, field));
    value = value * 10 + static_cast<std::size_t>(c - '0');
  }
  return value;
}

}  // namespace

std::vector<AnnotationSpan> parse_annotations(std::string_view content, std::string_view origin) {
  std::vector<AnnotationSpan> spans;
  for_each_record(content, kAnnotationHeader, origin, Errc::InvalidAnnotation,
                  [&](const std::vector<std::string_view>& f, std::size_t line_no) {
                    if (f.size() < 5 || f.size() > 7) {
                      throw Error(Errc::InvalidAnnotation, fmt::format("{}:{}: expected 5-7 fields, got {}", origin, line_no, f.size()));
                    }
                    AnnotationSpan s;
                    s.doc_id = std::string(f[0]);
                    s.start = parse_size(f[1], origin, line_no, Errc::InvalidAnnotation);
                    s.end = parse_size(f[2], origin, line_no, Errc::InvalidAnnotation);
                    s.rule_id = static_cast<int>(parse_size(f[3], origin, line_no, Errc::InvalidAnnotation));
                    if (f[4] == "delete") s.action = SpanAction::Delete;
                    else if (f[4] == "replace") s.action = SpanAction::Replace;
                    else if (f[4] == "keep") s.action = SpanAction::Keep;
                    else throw Error(Errc::InvalidAnnotation, fmt::format("{}:{}: unknown action '{}'", origin, line_no, f[4]));
                    if (f.size() > 5) s.replacement = unescape(f[5]);
                    if (f.size() > 6) s.note = unescape(f[6]);
                    try {
                      check_span_shape(s);
                    } catch (const Error& e) {
                      throw Error(Errc::InvalidAnnotation, fmt::format("{}:{}: {}", origin, line_no, e.what()));
                    }
                    spans.push_back(std::move(s));
                  });
  return spans;
}

std::vector<AnnotationSpan> load_annotations(const fs::path& path) {
  return parse_annotations(read_file(path), path.string());
}

std::string format_annotations(const std::vector<AnnotationSpan>& spans) {
  std::string out(kAnnotationHeader);
  out += '\n';
  for (const auto& s : spans) {
    const char* action = s.action == SpanAction::Delete ? "delete" : s.action == SpanAction::Replace ? "replace" : "keep";
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", s.doc_id, s.start, s.end, s.rule_id, action, escape(s.replacement),
                       escape(s.note));
  }
  return out;
}

std::vector<LexiconEntry> parse_lexicon(std::string_view content, std::string_view origin) {
  std::vector<LexiconEntry> entries;
  for_each_record(content, kLexiconHeader, origin, Errc::InvalidLexicon,
                  [&](const std::vector<std::string_view>& f, std::size_t line_no) {
                    if (f.size() != 3) {
                      throw Error(Errc::InvalidLexicon, fmt::format("{}:{}: expected 3 fields, got {}", origin, line_no, f.size()));
                    }
                    LexiconEntry e;
                    e.rule_id = static_cast<int>(parse_size(f[0], origin, line_no, Errc::InvalidLexicon));
                    e.source_term = unescape(f[1]);
                    e.replacement = unescape(f[2]);
                    entries.push_back(std::move(e));
                  });
  validate_lexicon(entries);
  return entries;
}

std::vector<LexiconEntry> load_lexicon(const fs::path& path) { return parse_lexicon(read_file(path), path.string()); }

}  // namespace influence::preprocess
