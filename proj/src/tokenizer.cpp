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

#include "influence/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <unordered_map>

#include <fmt/format.h>
#include <unicode/brkiter.h>
#include <unicode/normalizer2.h>
#include <unicode/regex.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "influence/errors.hpp"
#include "influence/text.hpp"

namespace influence::tokenizer {

using nlohmann::json;

namespace {

[[noreturn]] void load_fail(const std::string& msg) { throw Error(Errc::ModelLoadFailure, "tokenizer: " + msg); }
[[noreturn]] void encode_fail(const std::string& msg) { throw Error(Errc::TokenizationFailure, msg); }

// ---------------------------------------------------------------- unicode

std::u32string decode(std::string_view s) {
  std::u32string out;
  for (std::size_t pos = 0; pos < s.size();) {
    const auto c = text::decode_at(s, pos);
    out.push_back(c.value);
    pos += c.length;
  }
  return out;
}

std::string encode(std::u32string_view s) {
  std::string out;
  for (char32_t c : s) text::append_utf8(out, c);
  return out;
}

std::string encode(char32_t c) {
  std::string out;
  text::append_utf8(out, c);
  return out;
}

icu::UnicodeString to_icu(std::string_view s) {
  return icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<std::int32_t>(s.size())));
}

std::string from_icu(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

bool is_whitespace(char32_t c) { return u_hasBinaryProperty(static_cast<UChar32>(c), UCHAR_WHITE_SPACE) != 0; }

bool is_control(char32_t c) {
  if (c == U'\t' || c == U'\n' || c == U'\r') return false;
  const auto mask = U_GET_GC_MASK(static_cast<UChar32>(c));
  return (mask & U_GC_C_MASK) != 0;
}

bool is_punctuation(char32_t c) {
  if (c < 0x80 && std::ispunct(static_cast<int>(c))) return true;
  return (U_GET_GC_MASK(static_cast<UChar32>(c)) & U_GC_P_MASK) != 0;
}

bool is_mark_nonspacing(char32_t c) { return u_charType(static_cast<UChar32>(c)) == U_NON_SPACING_MARK; }

bool is_numeric(char32_t c) { return (U_GET_GC_MASK(static_cast<UChar32>(c)) & U_GC_N_MASK) != 0; }

bool is_chinese(char32_t c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x20000 && c <= 0x2A6DF) ||
         (c >= 0x2A700 && c <= 0x2B73F) || (c >= 0x2B740 && c <= 0x2B81F) || (c >= 0x2B920 && c <= 0x2CEAF) ||
         (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

// Full per-character lowercasing, no context rules.
std::string lowercase(std::string_view s) {
  std::string out;
  for (char32_t c : decode(s)) {
    icu::UnicodeString u(static_cast<UChar32>(c));
    u.toLower(icu::Locale::getRoot());
    out += from_icu(u);
  }
  return out;
}

std::string icu_normalize(std::string_view s, const icu::Normalizer2* (*get)(UErrorCode&)) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = get(status);
  if (U_FAILURE(status)) encode_fail("unicode normalizer unavailable");
  const icu::UnicodeString out = n->normalize(to_icu(s), status);
  if (U_FAILURE(status)) encode_fail("unicode normalization failed");
  return from_icu(out);
}

std::string strip_accents(std::string_view s) {
  std::u32string out;
  for (char32_t c : decode(s)) {
    if (!is_mark_nonspacing(c)) out.push_back(c);
  }
  return encode(out);
}

// ---------------------------------------------------------------- regex

class Regex {
 public:
  explicit Regex(std::string_view pattern) {
    UErrorCode status = U_ZERO_ERROR;
    UParseError perr;
    pattern_.reset(icu::RegexPattern::compile(to_icu(pattern), 0, perr, status));
    if (U_FAILURE(status)) load_fail(fmt::format("bad regex '{}'", pattern));
  }

  // Byte ranges of successive non-overlapping matches.
  std::vector<std::pair<std::size_t, std::size_t>> find_all(std::string_view s) const {
    const icu::UnicodeString u = to_icu(s);
    // UTF-16 index to UTF-8 byte offset.
    std::vector<std::size_t> byte_at(static_cast<std::size_t>(u.length()) + 1, 0);
    std::size_t bytes = 0;
    for (std::int32_t k = 0; k < u.length();) {
      const UChar32 c = u.char32At(k);
      const std::int32_t units = U16_LENGTH(c);
      for (std::int32_t q = 0; q < units; ++q) byte_at[static_cast<std::size_t>(k + q)] = bytes;
      bytes += encode(static_cast<char32_t>(c)).size();
      k += units;
    }
    byte_at.back() = bytes;
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::RegexMatcher> m(pattern_->matcher(u, status));
    if (U_FAILURE(status)) encode_fail("regex matcher failed");
    std::vector<std::pair<std::size_t, std::size_t>> out;
    while (m->find(status) && U_SUCCESS(status)) {
      const auto b = static_cast<std::size_t>(m->start(status));
      const auto e = static_cast<std::size_t>(m->end(status));
      if (e == b) continue;  // empty matches split nothing
      out.emplace_back(byte_at[b], byte_at[e]);
    }
    return out;
  }

 private:
  std::unique_ptr<icu::RegexPattern> pattern_;
};

std::string escape_regex(std::string_view literal) {
  std::string out;
  for (char c : literal) {
    if (std::strchr("\\^$.|?*+()[]{}", c) != nullptr && c != '\0') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

// A "pattern" field is either {"String": s} or {"Regex": r}.
std::unique_ptr<Regex> pattern_of(const json& p) {
  if (p.contains("String")) return std::make_unique<Regex>(escape_regex(p.at("String").get<std::string>()));
  if (p.contains("Regex")) return std::make_unique<Regex>(p.at("Regex").get<std::string>());
  load_fail("pattern must be String or Regex");
}

// ---------------------------------------------------------------- splitting

enum class Behavior { Removed, Isolated, MergedWithPrevious, MergedWithNext, Contiguous };

Behavior parse_behavior(const std::string& s) {
  if (s == "Removed") return Behavior::Removed;
  if (s == "Isolated") return Behavior::Isolated;
  if (s == "MergedWithPrevious") return Behavior::MergedWithPrevious;
  if (s == "MergedWithNext") return Behavior::MergedWithNext;
  if (s == "Contiguous") return Behavior::Contiguous;
  load_fail(fmt::format("unknown split behavior '{}'", s));
}

using Segments = std::vector<std::pair<std::string, bool>>;  // text, is_match

Segments segments_from_ranges(std::string_view s, const std::vector<std::pair<std::size_t, std::size_t>>& matches,
                              bool invert) {
  Segments out;
  std::size_t pos = 0;
  for (const auto& [b, e] : matches) {
    if (b > pos) out.emplace_back(std::string(s.substr(pos, b - pos)), invert);
    out.emplace_back(std::string(s.substr(b, e - b)), !invert);
    pos = e;
  }
  if (pos < s.size()) out.emplace_back(std::string(s.substr(pos)), invert);
  return out;
}

Segments segments_by_char(std::string_view s, const std::function<bool(char32_t)>& pred) {
  Segments out;
  std::string run;
  for (std::size_t pos = 0; pos < s.size();) {
    const auto c = text::decode_at(s, pos);
    const std::string ch(s.substr(pos, c.length));
    pos += c.length;
    if (pred(c.value)) {
      if (!run.empty()) out.emplace_back(std::move(run), false);
      run.clear();
      out.emplace_back(ch, true);
    } else {
      run += ch;
    }
  }
  if (!run.empty()) out.emplace_back(std::move(run), false);
  return out;
}

std::vector<std::string> apply_behavior(const Segments& segs, Behavior behavior) {
  std::vector<std::string> out;
  switch (behavior) {
    case Behavior::Removed:
      for (const auto& [t, m] : segs) {
        if (!m) out.push_back(t);
      }
      break;
    case Behavior::Isolated:
      for (const auto& [t, m] : segs) out.push_back(t);
      break;
    case Behavior::Contiguous: {
      bool prev_match = false;
      for (const auto& [t, m] : segs) {
        if (m && prev_match && !out.empty()) {
          out.back() += t;
        } else {
          out.push_back(t);
        }
        prev_match = m;
      }
      break;
    }
    case Behavior::MergedWithPrevious: {
      bool prev_match = false;
      for (const auto& [t, m] : segs) {
        if (m && !prev_match && !out.empty()) {
          out.back() += t;
        } else {
          out.push_back(t);
        }
        prev_match = m;
      }
      break;
    }
    case Behavior::MergedWithNext: {
      bool prev_match = false;
      for (const auto& [t, m] : segs) {
        if (!m && prev_match && !out.empty()) {
          out.back() += t;
        } else {
          out.push_back(t);
        }
        prev_match = m;
      }
      break;
    }
  }
  std::erase_if(out, [](const std::string& t) { return t.empty(); });
  return out;
}

// ---------------------------------------------------------------- normalizers

class Normalizer {
 public:
  virtual ~Normalizer() = default;
  virtual std::string normalize(std::string s) const = 0;
};

class BertNormalizer final : public Normalizer {
 public:
  explicit BertNormalizer(const json& j)
      : clean_(j.value("clean_text", true)),
        chinese_(j.value("handle_chinese_chars", true)),
        lower_(j.value("lowercase", true)) {
    const auto& sa = j.contains("strip_accents") ? j.at("strip_accents") : json();
    strip_ = sa.is_null() ? lower_ : sa.get<bool>();
  }

  std::string normalize(std::string s) const override {
    if (clean_) {
      std::u32string out;
      for (char32_t c : decode(s)) {
        if (c == 0 || c == 0xFFFD || is_control(c)) continue;
        out.push_back(is_whitespace(c) ? U' ' : c);
      }
      s = encode(out);
    }
    if (chinese_) {
      std::u32string out;
      for (char32_t c : decode(s)) {
        if (is_chinese(c)) {
          out += U' ';
          out += c;
          out += U' ';
        } else {
          out.push_back(c);
        }
      }
      s = encode(out);
    }
    if (strip_) s = strip_accents(icu_normalize(s, icu::Normalizer2::getNFDInstance));
    if (lower_) s = lowercase(s);
    return s;
  }

 private:
  bool clean_, chinese_, lower_, strip_ = false;
};

class Lowercase final : public Normalizer {
 public:
  std::string normalize(std::string s) const override { return lowercase(s); }
};

class StripAccents final : public Normalizer {
 public:
  std::string normalize(std::string s) const override { return strip_accents(s); }
};

class UnicodeForm final : public Normalizer {
 public:
  explicit UnicodeForm(const icu::Normalizer2* (*get)(UErrorCode&)) : get_(get) {}
  std::string normalize(std::string s) const override { return icu_normalize(s, get_); }

 private:
  const icu::Normalizer2* (*get_)(UErrorCode&);
};

class Replace final : public Normalizer {
 public:
  explicit Replace(const json& j) : pattern_(pattern_of(j.at("pattern"))), content_(j.at("content").get<std::string>()) {}

  std::string normalize(std::string s) const override {
    std::string out;
    std::size_t pos = 0;
    for (const auto& [b, e] : pattern_->find_all(s)) {
      out.append(s, pos, b - pos);
      out += content_;
      pos = e;
    }
    out.append(s, pos);
    return out;
  }

 private:
  std::unique_ptr<Regex> pattern_;
  std::string content_;
};

class Strip final : public Normalizer {
 public:
  explicit Strip(const json& j) : left_(j.value("strip_left", true)), right_(j.value("strip_right", true)) {}

  std::string normalize(std::string s) const override {
    std::u32string u = decode(s);
    std::size_t b = 0;
    std::size_t e = u.size();
    if (left_) {
      while (b < e && is_whitespace(u[b])) ++b;
    }
    if (right_) {
      while (e > b && is_whitespace(u[e - 1])) --e;
    }
    return encode(std::u32string_view(u).substr(b, e - b));
  }

 private:
  bool left_, right_;
};

class Prepend final : public Normalizer {
 public:
  explicit Prepend(const json& j) : prefix_(j.at("prepend").get<std::string>()) {}
  std::string normalize(std::string s) const override { return s.empty() ? s : prefix_ + s; }

 private:
  std::string prefix_;
};

std::string base64_decode(std::string_view in) {
  static const auto table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    const char* chars = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    for (int k = 0; k < 64; ++k) t[static_cast<unsigned char>(chars[k])] = k;
    return t;
  }();
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : in) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    const int v = table[static_cast<unsigned char>(c)];
    if (v < 0) load_fail("precompiled charsmap is not base64");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

// SentencePiece normalization rules: a double-array trie over UTF-8 bytes
// whose leaves point into a table of NUL-terminated replacements.
class Precompiled final : public Normalizer {
 public:
  explicit Precompiled(const json& j) {
    const std::string blob = base64_decode(j.at("precompiled_charsmap").get<std::string>());
    if (blob.size() < 4) load_fail("precompiled charsmap is truncated");
    std::uint32_t trie_bytes = 0;
    std::memcpy(&trie_bytes, blob.data(), 4);
    if (trie_bytes % 4 != 0 || 4 + static_cast<std::size_t>(trie_bytes) > blob.size()) {
      load_fail("precompiled charsmap has a bad trie size");
    }
    units_.resize(trie_bytes / 4);
    std::memcpy(units_.data(), blob.data() + 4, trie_bytes);
    normalized_ = blob.substr(4 + trie_bytes);
    if (units_.empty()) load_fail("precompiled charsmap has an empty trie");
  }

  std::string normalize(std::string s) const override {
    std::string out;
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::BreakIterator> it(icu::BreakIterator::createCharacterInstance(icu::Locale::getRoot(), status));
    if (U_FAILURE(status)) encode_fail("grapheme iterator unavailable");
    const icu::UnicodeString u = to_icu(s);
    it->setText(u);
    std::int32_t start = it->first();
    for (std::int32_t end = it->next(); end != icu::BreakIterator::DONE; start = end, end = it->next()) {
      const std::string g = from_icu(icu::UnicodeString(u, start, end - start));
      if (g.size() < 6) {
        if (auto r = transform(g)) {
          out += *r;
          continue;
        }
      }
      for (std::size_t pos = 0; pos < g.size();) {
        const auto c = text::decode_at(g, pos);
        const std::string part = g.substr(pos, c.length);
        if (auto r = transform(part)) {
          out += *r;
        } else {
          out += part;
        }
        pos += c.length;
      }
    }
    return out;
  }

 private:
  static bool has_leaf(std::uint32_t u) { return ((u >> 8) & 1) != 0; }
  static std::uint32_t value(std::uint32_t u) { return u & ((1U << 31) - 1); }
  static std::uint32_t label(std::uint32_t u) { return u & ((1U << 31) | 0xFFU); }
  static std::size_t offset(std::uint32_t u) { return (u >> 10) << ((u & (1U << 9)) >> 6); }

  std::uint32_t unit(std::size_t pos) const {
    if (pos >= units_.size()) encode_fail("precompiled charsmap lookup out of range");
    return units_[pos];
  }

  // Replacement for the shortest matching prefix of `chunk`, as the
  // reference implementation does.
  std::optional<std::string> transform(std::string_view chunk) const {
    std::size_t node = 0;
    std::uint32_t u = unit(node);
    node ^= offset(u);
    for (char ch : chunk) {
      const auto c = static_cast<unsigned char>(ch);
      if (c == 0) break;
      node ^= c;
      u = unit(node);
      if (label(u) != c) return std::nullopt;
      node ^= offset(u);
      if (has_leaf(u)) {
        const std::size_t at = value(unit(node));
        if (at >= normalized_.size()) encode_fail("precompiled charsmap value out of range");
        const std::size_t stop = normalized_.find('\0', at);
        return normalized_.substr(at, stop == std::string::npos ? std::string::npos : stop - at);
      }
    }
    return std::nullopt;
  }

  std::vector<std::uint32_t> units_;
  std::string normalized_;
};

class NormalizerSequence final : public Normalizer {
 public:
  explicit NormalizerSequence(std::vector<std::unique_ptr<Normalizer>> parts) : parts_(std::move(parts)) {}
  std::string normalize(std::string s) const override {
    for (const auto& p : parts_) s = p->normalize(std::move(s));
    return s;
  }

 private:
  std::vector<std::unique_ptr<Normalizer>> parts_;
};

std::unique_ptr<Normalizer> make_normalizer(const json& j) {
  if (j.is_null()) return nullptr;
  const std::string type = j.at("type").get<std::string>();
  if (type == "BertNormalizer") return std::make_unique<BertNormalizer>(j);
  if (type == "Lowercase") return std::make_unique<Lowercase>();
  if (type == "StripAccents") return std::make_unique<StripAccents>();
  if (type == "NFC") return std::make_unique<UnicodeForm>(icu::Normalizer2::getNFCInstance);
  if (type == "NFD") return std::make_unique<UnicodeForm>(icu::Normalizer2::getNFDInstance);
  if (type == "NFKC") return std::make_unique<UnicodeForm>(icu::Normalizer2::getNFKCInstance);
  if (type == "NFKD") return std::make_unique<UnicodeForm>(icu::Normalizer2::getNFKDInstance);
  if (type == "Replace") return std::make_unique<Replace>(j);
  if (type == "Strip") return std::make_unique<Strip>(j);
  if (type == "Prepend") return std::make_unique<Prepend>(j);
  if (type == "Precompiled") return std::make_unique<Precompiled>(j);
  if (type == "Sequence") {
    std::vector<std::unique_ptr<Normalizer>> parts;
    for (const auto& p : j.at("normalizers")) {
      if (auto n = make_normalizer(p)) parts.push_back(std::move(n));
    }
    return std::make_unique<NormalizerSequence>(std::move(parts));
  }
  load_fail(fmt::format("unsupported normalizer '{}'", type));
}

// ---------------------------------------------------------------- pre-tokenizers

class PreTokenizer {
 public:
  virtual ~PreTokenizer() = default;
  // `first` is true for the piece that starts the input text.
  virtual std::vector<std::string> split(const std::string& piece, bool first) const = 0;
};

class BertPre final : public PreTokenizer {
 public:
  std::vector<std::string> split(const std::string& piece, bool) const override {
    std::vector<std::string> out;
    for (const auto& word : apply_behavior(segments_by_char(piece, is_whitespace), Behavior::Removed)) {
      for (auto& p : apply_behavior(segments_by_char(word, is_punctuation), Behavior::Isolated)) out.push_back(std::move(p));
    }
    return out;
  }
};

class WhitespaceSplit final : public PreTokenizer {
 public:
  std::vector<std::string> split(const std::string& piece, bool) const override {
    return apply_behavior(segments_by_char(piece, is_whitespace), Behavior::Removed);
  }
};

class RegexSplit final : public PreTokenizer {
 public:
  RegexSplit(std::unique_ptr<Regex> re, Behavior behavior, bool invert)
      : re_(std::move(re)), behavior_(behavior), invert_(invert) {}
  std::vector<std::string> split(const std::string& piece, bool) const override {
    return apply_behavior(segments_from_ranges(piece, re_->find_all(piece), invert_), behavior_);
  }

 private:
  std::unique_ptr<Regex> re_;
  Behavior behavior_;
  bool invert_;
};

class CharSplit final : public PreTokenizer {
 public:
  CharSplit(bool (*pred)(char32_t), Behavior behavior) : pred_(pred), behavior_(behavior) {}
  std::vector<std::string> split(const std::string& piece, bool) const override {
    return apply_behavior(segments_by_char(piece, pred_), behavior_);
  }

 private:
  bool (*pred_)(char32_t);
  Behavior behavior_;
};

class Metaspace final : public PreTokenizer {
 public:
  explicit Metaspace(const json& j) {
    if (j.contains("replacement")) replacement_ = j.at("replacement").get<std::string>();
    else if (j.contains("str_rep")) replacement_ = j.at("str_rep").get<std::string>();
    if (j.contains("prepend_scheme")) {
      scheme_ = j.at("prepend_scheme").get<std::string>();
    } else {
      scheme_ = j.value("add_prefix_space", true) ? "always" : "never";
    }
    if (scheme_ != "always" && scheme_ != "first" && scheme_ != "never") {
      load_fail(fmt::format("unknown Metaspace prepend_scheme '{}'", scheme_));
    }
    split_ = j.value("split", true);
    if (decode(replacement_).size() != 1) load_fail("Metaspace replacement must be one character");
  }

  std::vector<std::string> split(const std::string& piece, bool first) const override {
    std::string s;
    for (char c : piece) {
      if (c == ' ') s += replacement_;
      else s.push_back(c);
    }
    const bool prepend = scheme_ == "always" || (scheme_ == "first" && first);
    if (prepend && s.rfind(replacement_, 0) != 0) s = replacement_ + s;
    if (!split_) return {s};
    const char32_t r = decode(replacement_)[0];
    Segments segs;
    std::string run;
    for (std::size_t pos = 0; pos < s.size();) {
      const auto c = text::decode_at(s, pos);
      if (c.value == r) {
        if (!run.empty()) segs.emplace_back(std::move(run), false);
        run.clear();
        segs.emplace_back(replacement_, true);
      } else {
        run.append(s, pos, c.length);
      }
      pos += c.length;
    }
    if (!run.empty()) segs.emplace_back(std::move(run), false);
    return apply_behavior(segs, Behavior::MergedWithNext);
  }

 private:
  std::string replacement_ = "\xE2\x96\x81";
  std::string scheme_;
  bool split_ = true;
};

const std::array<std::string, 256>& byte_chars() {
  static const auto table = [] {
    std::array<std::string, 256> t;
    int extra = 0;
    for (int b = 0; b < 256; ++b) {
      const bool printable = (b >= '!' && b <= '~') || (b >= 0xA1 && b <= 0xAC) || (b >= 0xAE && b <= 0xFF);
      t[static_cast<std::size_t>(b)] = encode(static_cast<char32_t>(printable ? b : 256 + extra++));
    }
    return t;
  }();
  return table;
}

constexpr std::string_view kGpt2Pattern =
    R"('s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+)";

class ByteLevel final : public PreTokenizer {
 public:
  explicit ByteLevel(const json& j)
      : prefix_(j.value("add_prefix_space", true)), regex_(j.value("use_regex", true) ? std::make_unique<Regex>(kGpt2Pattern) : nullptr) {}

  std::vector<std::string> split(const std::string& piece, bool) const override {
    std::string s = piece;
    if (prefix_ && s.rfind(' ', 0) != 0) s = " " + s;
    std::vector<std::string> parts;
    if (regex_) {
      parts = apply_behavior(segments_from_ranges(s, regex_->find_all(s), false), Behavior::Isolated);
    } else {
      parts = {s};
    }
    for (auto& p : parts) {
      std::string mapped;
      for (char c : p) mapped += byte_chars()[static_cast<unsigned char>(c)];
      p = std::move(mapped);
    }
    return parts;
  }

 private:
  bool prefix_;
  std::unique_ptr<Regex> regex_;
};

class PreSequence final : public PreTokenizer {
 public:
  explicit PreSequence(std::vector<std::unique_ptr<PreTokenizer>> parts) : parts_(std::move(parts)) {}
  std::vector<std::string> split(const std::string& piece, bool first) const override {
    std::vector<std::string> cur{piece};
    for (const auto& p : parts_) {
      std::vector<std::string> next;
      for (std::size_t k = 0; k < cur.size(); ++k) {
        for (auto& s : p->split(cur[k], first && k == 0)) next.push_back(std::move(s));
      }
      cur = std::move(next);
    }
    return cur;
  }

 private:
  std::vector<std::unique_ptr<PreTokenizer>> parts_;
};

bool is_digit(char32_t c) { return is_numeric(c); }
bool is_punct(char32_t c) { return is_punctuation(c); }

std::unique_ptr<PreTokenizer> make_pre_tokenizer(const json& j) {
  if (j.is_null()) return nullptr;
  const std::string type = j.at("type").get<std::string>();
  if (type == "BertPreTokenizer") return std::make_unique<BertPre>();
  if (type == "WhitespaceSplit") return std::make_unique<WhitespaceSplit>();
  if (type == "Whitespace") {
    return std::make_unique<RegexSplit>(std::make_unique<Regex>(R"(\w+|[^\w\s]+)"), Behavior::Removed, true);
  }
  if (type == "Metaspace") return std::make_unique<Metaspace>(j);
  if (type == "ByteLevel") return std::make_unique<ByteLevel>(j);
  if (type == "Punctuation") {
    return std::make_unique<CharSplit>(is_punct, parse_behavior(j.value("behavior", std::string("Isolated"))));
  }
  if (type == "Digits") {
    return std::make_unique<CharSplit>(is_digit, j.value("individual_digits", false) ? Behavior::Isolated : Behavior::Contiguous);
  }
  if (type == "Split") {
    return std::make_unique<RegexSplit>(pattern_of(j.at("pattern")), parse_behavior(j.at("behavior").get<std::string>()),
                                        j.value("invert", false));
  }
  if (type == "Sequence") {
    std::vector<std::unique_ptr<PreTokenizer>> parts;
    for (const auto& p : j.at("pretokenizers")) {
      if (auto t = make_pre_tokenizer(p)) parts.push_back(std::move(t));
    }
    return std::make_unique<PreSequence>(std::move(parts));
  }
  load_fail(fmt::format("unsupported pre_tokenizer '{}'", type));
}

// ---------------------------------------------------------------- models

using Vocab = std::unordered_map<std::string, std::int64_t>;

using Tokens = std::vector<std::pair<std::string, std::int64_t>>;

class TokenModel {
 public:
  virtual ~TokenModel() = default;
  virtual Tokens tokenize(const std::string& word) const = 0;
  virtual std::optional<std::int64_t> id_of(std::string_view token) const = 0;
};

class VocabModel : public TokenModel {
 public:
  std::optional<std::int64_t> id_of(std::string_view token) const override {
    const auto it = vocab_.find(std::string(token));
    if (it == vocab_.end()) return std::nullopt;
    return it->second;
  }

 protected:
  bool has(const std::string& t) const { return vocab_.count(t) != 0; }
  Tokens with_ids(std::vector<std::string> tokens) const {
    Tokens out;
    for (auto& t : tokens) {
      const auto it = vocab_.find(t);
      if (it == vocab_.end()) encode_fail(fmt::format("token '{}' is not in the vocabulary", t));
      out.emplace_back(std::move(t), it->second);
    }
    return out;
  }
  Vocab vocab_;
};

Vocab vocab_object(const json& j) {
  Vocab v;
  for (const auto& [k, id] : j.items()) v.emplace(k, id.get<std::int64_t>());
  return v;
}

class WordPiece final : public VocabModel {
 public:
  explicit WordPiece(const json& j)
      : unk_(j.value("unk_token", std::string("[UNK]"))),
        prefix_(j.value("continuing_subword_prefix", std::string("##"))),
        max_chars_(j.value("max_input_chars_per_word", std::size_t{100})) {
    vocab_ = vocab_object(j.at("vocab"));
  }

  Tokens tokenize(const std::string& word) const override { return with_ids(pieces(word)); }

 private:
  std::vector<std::string> pieces(const std::string& word) const {
    const std::u32string chars = decode(word);
    if (chars.size() > max_chars_) return {unk_};
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < chars.size()) {
      std::size_t end = chars.size();
      std::string found;
      while (start < end) {
        std::string sub = encode(std::u32string_view(chars).substr(start, end - start));
        if (start > 0) sub = prefix_ + sub;
        if (has(sub)) {
          found = std::move(sub);
          break;
        }
        --end;
      }
      if (found.empty()) return {unk_};
      out.push_back(std::move(found));
      start = end;
    }
    return out;
  }

  std::string unk_;
  std::string prefix_;
  std::size_t max_chars_;
};

class Bpe final : public VocabModel {
 public:
  explicit Bpe(const json& j) {
    vocab_ = vocab_object(j.at("vocab"));
    if (j.contains("unk_token") && !j.at("unk_token").is_null()) unk_ = j.at("unk_token").get<std::string>();
    if (j.contains("continuing_subword_prefix") && !j.at("continuing_subword_prefix").is_null()) {
      prefix_ = j.at("continuing_subword_prefix").get<std::string>();
    }
    if (j.contains("end_of_word_suffix") && !j.at("end_of_word_suffix").is_null()) {
      suffix_ = j.at("end_of_word_suffix").get<std::string>();
    }
    fuse_unk_ = j.value("fuse_unk", false);
    byte_fallback_ = j.value("byte_fallback", false);
    ignore_merges_ = j.value("ignore_merges", false);
    std::size_t rank = 0;
    for (const auto& m : j.at("merges")) {
      std::string a;
      std::string b;
      if (m.is_string()) {
        const std::string s = m.get<std::string>();
        const auto sp = s.find(' ');
        if (sp == std::string::npos) load_fail(fmt::format("bad merge '{}'", s));
        a = s.substr(0, sp);
        b = s.substr(sp + 1);
      } else {
        a = m.at(0).get<std::string>();
        b = m.at(1).get<std::string>();
      }
      std::string merged = a + b.substr(std::min(prefix_.size(), b.size()));
      if (!has(merged)) load_fail(fmt::format("merge result '{}' is not in the vocabulary", merged));
      ranks_.emplace(a + '\x01' + b, std::make_pair(rank++, std::move(merged)));
    }
  }

  Tokens tokenize(const std::string& word) const override { return with_ids(pieces(word)); }

 private:
  std::vector<std::string> pieces(const std::string& word) const {
    if (ignore_merges_ && has(word)) return {word};
    const std::u32string chars = decode(word);
    std::vector<std::string> syms;
    std::vector<bool> unknown;
    for (std::size_t k = 0; k < chars.size(); ++k) {
      std::string s = encode(chars[k]);
      if (k > 0) s = prefix_ + s;
      if (k + 1 == chars.size()) s += suffix_;
      if (has(s)) {
        syms.push_back(std::move(s));
        unknown.push_back(false);
        continue;
      }
      if (byte_fallback_) {
        const std::string raw = encode(chars[k]);
        std::vector<std::string> bytes;
        for (char c : raw) bytes.push_back(fmt::format("<0x{:02X}>", static_cast<unsigned char>(c)));
        if (std::all_of(bytes.begin(), bytes.end(), [&](const std::string& t) { return has(t); })) {
          for (auto& t : bytes) {
            syms.push_back(std::move(t));
            unknown.push_back(false);
          }
          continue;
        }
      }
      if (unk_.empty()) encode_fail(fmt::format("character U+{:04X} is not in the vocabulary", static_cast<std::uint32_t>(chars[k])));
      if (fuse_unk_ && !unknown.empty() && unknown.back()) continue;
      syms.push_back(unk_);
      unknown.push_back(true);
    }
    for (;;) {
      std::size_t best = std::numeric_limits<std::size_t>::max();
      std::size_t at = 0;
      const std::string* merged = nullptr;
      for (std::size_t k = 0; k + 1 < syms.size(); ++k) {
        if (unknown[k] || unknown[k + 1]) continue;
        const auto it = ranks_.find(syms[k] + '\x01' + syms[k + 1]);
        if (it != ranks_.end() && it->second.first < best) {
          best = it->second.first;
          at = k;
          merged = &it->second.second;
        }
      }
      if (merged == nullptr) break;
      syms[at] = *merged;
      syms.erase(syms.begin() + static_cast<std::ptrdiff_t>(at) + 1);
      unknown.erase(unknown.begin() + static_cast<std::ptrdiff_t>(at) + 1);
    }
    return syms;
  }

  std::string unk_;
  std::string prefix_;
  std::string suffix_;
  bool fuse_unk_ = false;
  bool byte_fallback_ = false;
  bool ignore_merges_ = false;
  std::unordered_map<std::string, std::pair<std::size_t, std::string>> ranks_;
};

class Unigram final : public TokenModel {
 public:
  explicit Unigram(const json& j) {
    double min_score = std::numeric_limits<double>::infinity();
    for (const auto& entry : j.at("vocab")) {
      const std::string piece = entry.at(0).get<std::string>();
      const double score = entry.at(1).get<double>();
      const auto id = static_cast<std::int64_t>(pieces_.size());
      pieces_.emplace_back(piece, score);
      ids_.emplace(piece, id);
      max_len_ = std::max(max_len_, piece.size());
      min_score = std::min(min_score, score);
    }
    if (j.contains("unk_id") && !j.at("unk_id").is_null()) {
      unk_id_ = j.at("unk_id").get<std::int64_t>();
      if (unk_id_ < 0 || static_cast<std::size_t>(unk_id_) >= pieces_.size()) load_fail("Unigram unk_id out of range");
    }
    byte_fallback_ = j.value("byte_fallback", false);
    unk_score_ = min_score - 10.0;
  }

  std::optional<std::int64_t> id_of(std::string_view token) const override {
    const auto it = ids_.find(std::string(token));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  Tokens tokenize(const std::string& s) const override {
    struct Best {
      std::int64_t id = -1;
      double score = 0.0;
      std::optional<std::size_t> start;
    };
    std::vector<Best> best(s.size() + 1);
    best[0].start = 0;
    for (std::size_t pos = 0; pos < s.size();) {
      const std::size_t clen = text::decode_at(s, pos).length;
      if (!best[pos].start) {
        pos += clen;
        continue;
      }
      const double here = best[pos].score;
      bool single = false;
      for (std::size_t len = 1; len <= max_len_ && pos + len <= s.size(); ++len) {
        if (!text::is_boundary(s, pos + len)) continue;
        const auto it = ids_.find(s.substr(pos, len));
        if (it == ids_.end()) continue;
        Best& t = best[pos + len];
        const double cand = here + pieces_[static_cast<std::size_t>(it->second)].second;
        if (!t.start || cand > t.score) t = Best{it->second, cand, pos};
        if (len == clen) single = true;
      }
      if (!single) {
        if (unk_id_ < 0) encode_fail("text has a character outside the vocabulary and no unknown token");
        Best& t = best[pos + clen];
        const double cand = here + unk_score_;
        if (!t.start || cand > t.score) t = Best{unk_id_, cand, pos};
      }
      pos += clen;
    }
    std::vector<std::string> rev;
    std::vector<bool> rev_unk;
    for (std::size_t end = s.size(); end > 0;) {
      const Best& b = best[end];
      if (!b.start) encode_fail("no segmentation found");
      rev.push_back(s.substr(*b.start, end - *b.start));
      rev_unk.push_back(b.id == unk_id_);
      end = *b.start;
    }
    // Adjacent unknown pieces fuse into one.
    Tokens out;
    bool prev_unk = false;
    for (std::size_t k = rev.size(); k-- > 0;) {
      if (rev_unk[k] && prev_unk) {
        out.back().first += rev[k];
      } else {
        out.emplace_back(rev[k], rev_unk[k] ? unk_id_ : ids_.at(rev[k]));
      }
      prev_unk = rev_unk[k];
    }
    if (!byte_fallback_) return out;
    Tokens expanded;
    for (auto& t : out) {
      if (t.second != unk_id_) {
        expanded.push_back(std::move(t));
        continue;
      }
      Tokens bytes;
      for (char c : t.first) {
        const std::string b = fmt::format("<0x{:02X}>", static_cast<unsigned char>(c));
        const auto it = ids_.find(b);
        if (it == ids_.end()) break;
        bytes.emplace_back(b, it->second);
      }
      if (bytes.size() == t.first.size()) {
        for (auto& b : bytes) expanded.push_back(std::move(b));
      } else {
        expanded.push_back(std::move(t));
      }
    }
    return expanded;
  }

 private:
  std::vector<std::pair<std::string, double>> pieces_;
  std::unordered_map<std::string, std::int64_t> ids_;
  std::size_t max_len_ = 0;
  std::int64_t unk_id_ = -1;
  double unk_score_ = 0.0;
  bool byte_fallback_ = false;
};

std::unique_ptr<TokenModel> make_model(const json& j) {
  std::string type = j.value("type", std::string());
  if (type.empty()) {
    // Older files leave the model type implicit.
    if (j.contains("merges")) type = "BPE";
    else if (j.contains("vocab") && j.at("vocab").is_array()) type = "Unigram";
    else type = "WordPiece";
  }
  if (type == "WordPiece") return std::make_unique<WordPiece>(j);
  if (type == "BPE") return std::make_unique<Bpe>(j);
  if (type == "Unigram") return std::make_unique<Unigram>(j);
  load_fail(fmt::format("unsupported model '{}'", type));
}

// ---------------------------------------------------------------- post-processing

struct Piece {
  bool sequence = false;
  std::vector<std::int64_t> ids;  // special token ids
  std::vector<std::string> tokens;
  std::int64_t type_id = 0;
};

std::vector<Piece> make_template(const json& j) {
  if (j.is_null()) return {{true, {}, {}, 0}};
  const std::string type = j.at("type").get<std::string>();
  auto pair_piece = [](const json& p) {
    return Piece{false, {p.at(1).get<std::int64_t>()}, {p.at(0).get<std::string>()}, 0};
  };
  if (type == "BertProcessing" || type == "RobertaProcessing") {
    return {pair_piece(j.at("cls")), {true, {}, {}, 0}, pair_piece(j.at("sep"))};
  }
  if (type == "ByteLevel") return {{true, {}, {}, 0}};
  if (type == "TemplateProcessing") {
    std::vector<Piece> out;
    const json& specials = j.at("special_tokens");
    for (const auto& item : j.at("single")) {
      if (item.contains("Sequence")) {
        out.push_back({true, {}, {}, item.at("Sequence").value("type_id", std::int64_t{0})});
        continue;
      }
      const json& st = item.at("SpecialToken");
      const std::string name = st.at("id").get<std::string>();
      if (!specials.contains(name)) load_fail(fmt::format("template names unknown special token '{}'", name));
      const json& def = specials.at(name);
      Piece p;
      p.ids = def.at("ids").get<std::vector<std::int64_t>>();
      p.tokens = def.at("tokens").get<std::vector<std::string>>();
      p.type_id = st.value("type_id", std::int64_t{0});
      out.push_back(std::move(p));
    }
    return out;
  }
  if (type == "Sequence") {
    // ByteLevel steps only touch offsets; at most one step may add tokens.
    std::vector<Piece> result{{true, {}, {}, 0}};
    for (const auto& p : j.at("processors")) {
      auto t = make_template(p);
      if (t.size() > 1) {
        if (result.size() > 1) load_fail("post_processor sequence adds special tokens twice");
        result = std::move(t);
      }
    }
    return result;
  }
  load_fail(fmt::format("unsupported post_processor '{}'", type));
}

struct AddedToken {
  std::string content;
  std::int64_t id = 0;
  bool single_word = false;
  bool lstrip = false;
  bool rstrip = false;
  bool normalized = false;
  bool special = false;
};

}  // namespace

struct Tokenizer::Impl {
  std::unique_ptr<Normalizer> normalizer;
  std::unique_ptr<PreTokenizer> pre;
  std::unique_ptr<TokenModel> model;
  std::vector<Piece> templ;
  std::vector<AddedToken> added;
  std::size_t specials = 0;

  std::optional<std::int64_t> id_of(std::string_view token) const {
    for (const auto& a : added) {
      if (a.content == token) return a.id;
    }
    return model->id_of(token);
  }

  struct Chunk {
    std::string text;
    const AddedToken* token = nullptr;  // set when the chunk is an added token
    bool first = false;
  };

  // Splits `chunk` around leftmost-longest occurrences of added tokens whose
  // `normalized` flag equals `normalized_pass`.
  void split_added(const Chunk& chunk, bool normalized_pass, std::vector<Chunk>& out) const {
    const std::string& s = chunk.text;
    std::size_t pos = 0;
    std::size_t emitted = 0;
    bool first = chunk.first;
    auto emit_text = [&](std::size_t b, std::size_t e) {
      if (e > b) out.push_back({s.substr(b, e - b), nullptr, first && b == 0});
    };
    while (pos < s.size()) {
      const AddedToken* hit = nullptr;
      for (const auto& a : added) {
        if (a.normalized != normalized_pass || a.content.empty()) continue;
        if (s.compare(pos, a.content.size(), a.content) != 0) continue;
        if (a.single_word) {
          const bool left_ok = pos == 0 || text::is_word_boundary(s, pos);
          const bool right_ok = pos + a.content.size() == s.size() || text::is_word_boundary(s, pos + a.content.size());
          if (!left_ok || !right_ok) continue;
        }
        if (hit == nullptr || a.content.size() > hit->content.size()) hit = &a;
      }
      if (hit == nullptr) {
        pos += text::decode_at(s, pos).length;
        continue;
      }
      std::size_t b = pos;
      std::size_t e = pos + hit->content.size();
      if (hit->lstrip) {
        while (b > emitted && is_whitespace(static_cast<unsigned char>(s[b - 1]))) --b;
      }
      if (hit->rstrip) {
        while (e < s.size() && is_whitespace(static_cast<unsigned char>(s[e]))) ++e;
      }
      emit_text(emitted, b);
      out.push_back({hit->content, hit, false});
      emitted = e;
      pos = e;
    }
    emit_text(emitted, s.size());
  }
};

Tokenizer::Tokenizer(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Tokenizer::~Tokenizer() = default;

std::unique_ptr<Tokenizer> Tokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) load_fail(fmt::format("cannot read {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    load_fail(fmt::format("{} is not valid JSON: {}", path.string(), e.what()));
  }
  return parse(j);
}

std::unique_ptr<Tokenizer> Tokenizer::parse(const json& j) {
  auto impl = std::make_unique<Impl>();
  try {
    impl->normalizer = make_normalizer(j.value("normalizer", json()));
    impl->pre = make_pre_tokenizer(j.value("pre_tokenizer", json()));
    impl->model = make_model(j.at("model"));
    impl->templ = make_template(j.value("post_processor", json()));
    for (const auto& a : j.value("added_tokens", json::array())) {
      AddedToken t;
      t.content = a.at("content").get<std::string>();
      t.id = a.at("id").get<std::int64_t>();
      t.single_word = a.value("single_word", false);
      t.lstrip = a.value("lstrip", false);
      t.rstrip = a.value("rstrip", false);
      t.special = a.value("special", false);
      t.normalized = a.value("normalized", !t.special);
      impl->added.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    load_fail(fmt::format("malformed tokenizer.json: {}", e.what()));
  }
  for (const auto& p : impl->templ) {
    if (!p.sequence) impl->specials += p.ids.size();
  }
  if (std::count_if(impl->templ.begin(), impl->templ.end(), [](const Piece& p) { return p.sequence; }) != 1) {
    load_fail("post_processor must place the sequence exactly once");
  }
  return std::unique_ptr<Tokenizer>(new Tokenizer(std::move(impl)));
}

std::size_t Tokenizer::special_tokens_count() const { return impl_->specials; }

std::optional<std::int64_t> Tokenizer::token_to_id(std::string_view token) const { return impl_->id_of(token); }

Encoding Tokenizer::encode(std::string_view input, std::size_t max_length) const {
  if (!text::is_valid_utf8(input)) encode_fail("input is not valid UTF-8");
  const Impl& m = *impl_;

  std::vector<Impl::Chunk> raw;
  m.split_added({std::string(input), nullptr, true}, false, raw);
  std::vector<Impl::Chunk> chunks;
  for (auto& c : raw) {
    if (c.token != nullptr) {
      chunks.push_back(std::move(c));
      continue;
    }
    if (m.normalizer) c.text = m.normalizer->normalize(std::move(c.text));
    m.split_added(c, true, chunks);
  }

  std::vector<std::string> tokens;
  std::vector<std::int64_t> ids;
  for (const auto& c : chunks) {
    if (c.token != nullptr) {
      tokens.push_back(c.token->content);
      ids.push_back(c.token->id);
      continue;
    }
    const std::vector<std::string> words = m.pre ? m.pre->split(c.text, c.first) : std::vector<std::string>{c.text};
    for (const auto& w : words) {
      for (auto& [t, id] : m.model->tokenize(w)) {
        ids.push_back(id);
        tokens.push_back(std::move(t));
      }
    }
  }

  Encoding enc;
  if (max_length > 0) {
    if (max_length < m.specials) encode_fail("max_length is smaller than the special token count");
    const std::size_t room = max_length - m.specials;
    if (ids.size() > room) {
      ids.resize(room);
      tokens.resize(room);
      enc.truncated = true;
    }
  }
  for (const auto& p : m.templ) {
    if (p.sequence) {
      enc.ids.insert(enc.ids.end(), ids.begin(), ids.end());
      enc.tokens.insert(enc.tokens.end(), tokens.begin(), tokens.end());
      enc.type_ids.insert(enc.type_ids.end(), ids.size(), p.type_id);
    } else {
      enc.ids.insert(enc.ids.end(), p.ids.begin(), p.ids.end());
      enc.tokens.insert(enc.tokens.end(), p.tokens.begin(), p.tokens.end());
      enc.type_ids.insert(enc.type_ids.end(), p.ids.size(), p.type_id);
    }
  }
  return enc;
}

std::vector<std::string> supported_components() {
  return {
      "model:BPE",
      "model:Unigram",
      "model:WordPiece",
      "normalizer:BertNormalizer",
      "normalizer:Lowercase",
      "normalizer:NFC",
      "normalizer:NFD",
      "normalizer:NFKC",
      "normalizer:NFKD",
      "normalizer:Precompiled",
      "normalizer:Prepend",
      "normalizer:Replace",
      "normalizer:Sequence",
      "normalizer:StripAccents",
      "normalizer:Strip",
      "post_processor:BertProcessing",
      "post_processor:ByteLevel",
      "post_processor:RobertaProcessing",
      "post_processor:Sequence",
      "post_processor:TemplateProcessing",
      "pre_tokenizer:BertPreTokenizer",
      "pre_tokenizer:ByteLevel",
      "pre_tokenizer:Digits",
      "pre_tokenizer:Metaspace",
      "pre_tokenizer:Punctuation",
      "pre_tokenizer:Sequence",
      "pre_tokenizer:Split",
      "pre_tokenizer:Whitespace",
      "pre_tokenizer:WhitespaceSplit",
  };
}

}  // namespace influence::tokenizer
