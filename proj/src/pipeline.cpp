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

#include "influence/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>
#include <toml.hpp>

#include "influence/cache.hpp"
#include "influence/corpus.hpp"
#include "influence/ensemble.hpp"
#include "influence/errors.hpp"
#include "influence/hash.hpp"
#include "influence/preprocess.hpp"
#include "influence/report.hpp"
#include "influence/transformer.hpp"

namespace influence::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

namespace {

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"corpus", {"manifest", "split", "split_marker", "strip_structure"}},
      {"preprocess", {"annotations", "lexicons"}},
      {"models", {"names", "bundles_dir", "pooling"}},
      {"scoring", {"strategy", "lateral", "write_matrices"}},
      {"run", {"output_dir", "strict_precedence", "cache_dir", "threads"}},
  };
  return keys;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <typename T>
std::optional<T> typed(const toml::table& t, std::string_view section, std::string_view key) {
  const toml::node_view node = t[section][key];
  if (!node) return std::nullopt;
  if (auto v = node.value_exact<T>()) return *v;
  throw Error(Errc::ConfigInvalid, fmt::format("config key {}.{} has the wrong type", section, key));
}

std::vector<std::string> string_list(const toml::table& t, std::string_view section, std::string_view key) {
  const toml::node_view node = t[section][key];
  if (!node) return {};
  const auto* arr = node.as_array();
  if (arr == nullptr) throw Error(Errc::ConfigInvalid, fmt::format("config key {}.{} must be a list of strings", section, key));
  std::vector<std::string> out;
  for (const auto& item : *arr) {
    auto s = item.value_exact<std::string>();
    if (!s) throw Error(Errc::ConfigInvalid, fmt::format("config key {}.{} must be a list of strings", section, key));
    out.push_back(*s);
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_digest(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return "";
  return sha256_hex(read_file(path));
}

}  // namespace

AnalysisConfig parse_config(std::string_view source, const fs::path& base_dir) {
  toml::table t;
  try {
    t = toml::parse(source);
  } catch (const toml::parse_error& e) {
    throw Error(Errc::ConfigInvalid, fmt::format("config: {} (line {})", e.description(), e.source().begin.line));
  }
  const auto version = t["schema_version"].value_exact<std::int64_t>();
  if (!version) throw Error(Errc::ConfigInvalid, "config: missing integer schema_version");
  if (*version != kConfigSchemaVersion) {
    throw Error(Errc::ConfigInvalid, fmt::format("config: schema_version {} is not supported (expected {})", *version,
                                                 kConfigSchemaVersion));
  }
  for (const auto& [key, node] : t) {
    const std::string k(key.str());
    if (k == "schema_version") continue;
    const auto it = allowed_keys().find(k);
    if (it == allowed_keys().end() || !node.is_table()) {
      throw Error(Errc::ConfigInvalid, fmt::format("config: unknown section '{}'", k));
    }
    for (const auto& [sub, _] : *node.as_table()) {
      if (!it->second.contains(std::string(sub.str()))) {
        throw Error(Errc::ConfigInvalid, fmt::format("config: unknown key {}.{}", k, sub.str()));
      }
    }
  }

  AnalysisConfig c;
  const auto manifest = typed<std::string>(t, "corpus", "manifest");
  if (!manifest) throw Error(Errc::ConfigInvalid, "config: corpus.manifest is required");
  c.manifest = resolve(base_dir, *manifest);
  c.split = typed<bool>(t, "corpus", "split").value_or(true);
  c.split_marker = typed<std::string>(t, "corpus", "split_marker").value_or(std::string(corpus::kDefaultSplitMarker));
  c.strip_structure = typed<bool>(t, "corpus", "strip_structure").value_or(false);
  for (const auto& p : string_list(t, "preprocess", "annotations")) c.annotations.push_back(resolve(base_dir, p));
  for (const auto& p : string_list(t, "preprocess", "lexicons")) c.lexicons.push_back(resolve(base_dir, p));
  c.models = string_list(t, "models", "names");
  if (c.models.empty()) c.models.emplace_back(embed::kReferenceName);
  c.bundles_dir = resolve(base_dir, typed<std::string>(t, "models", "bundles_dir").value_or("bundles"));
  if (auto p = typed<std::string>(t, "models", "pooling")) c.pooling = embed::parse_pooling(*p);
  c.strategy = similarity::AggregationStrategy::parse(typed<std::string>(t, "scoring", "strategy").value_or("pair-mean"));
  c.lateral = typed<bool>(t, "scoring", "lateral").value_or(true);
  c.write_matrices = typed<bool>(t, "scoring", "write_matrices").value_or(false);
  c.output_dir = resolve(base_dir, typed<std::string>(t, "run", "output_dir").value_or("out"));
  c.strict_precedence = typed<bool>(t, "run", "strict_precedence").value_or(true);
  if (auto p = typed<std::string>(t, "run", "cache_dir")) {
    c.cache_dir = resolve(base_dir, *p);
  } else if (const char* env = std::getenv(std::string(kCacheDirEnv).c_str()); env != nullptr && *env != '\0') {
    c.cache_dir = fs::path(env);
  }
  const auto threads = typed<std::int64_t>(t, "run", "threads").value_or(1);
  if (threads < 1) throw Error(Errc::ConfigInvalid, "config: run.threads must be at least 1");
  c.threads = static_cast<std::size_t>(threads);
  return c;
}

AnalysisConfig load_config(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(Errc::MissingFile, fmt::format("config file not found: {}", path.string()));
  AnalysisConfig c = parse_config(read_file(path), fs::absolute(path).parent_path());
  c.source = path;
  return c;
}

void validate(const AnalysisConfig& c) {
  std::error_code ec;
  auto need_file = [&](const fs::path& p, std::string_view what) {
    if (!fs::is_regular_file(p, ec)) throw Error(Errc::MissingFile, fmt::format("{} not found: {}", what, p.string()));
  };
  need_file(c.manifest, "corpus manifest");
  for (const auto& p : c.annotations) need_file(p, "annotation file");
  for (const auto& p : c.lexicons) need_file(p, "lexicon file");
  if (c.split && c.split_marker.empty()) throw Error(Errc::ConfigInvalid, "config: corpus.split_marker is empty");
  std::set<std::string> seen;
  for (const auto& name : c.models) {
    const auto& spec = embed::find_model(name);
    if (!seen.insert(spec.name).second) throw Error(Errc::ConfigInvalid, fmt::format("config: model '{}' listed twice", name));
    if (spec.family != embed::Family::Reference) {
      const fs::path dir = c.bundles_dir / spec.identifier;
      if (!fs::is_directory(dir, ec)) {
        throw Error(Errc::MissingFile, fmt::format("model bundle for '{}' not found: {}", spec.name, dir.string()));
      }
    }
  }
  if (c.threads < 1) throw Error(Errc::ConfigInvalid, "config: threads must be at least 1");
}

std::string AnalysisConfig::hash() const {
  json j = {{"schema_version", kConfigSchemaVersion},
            {"manifest", file_digest(manifest)},
            {"split", split},
            {"split_marker", split_marker},
            {"strip_structure", strip_structure},
            {"models", models},
            {"pooling", pooling ? std::string(embed::pooling_name(*pooling)) : "model-default"},
            {"strategy", strategy.name()},
            {"lateral", lateral},
            {"write_matrices", write_matrices},
            {"strict_precedence", strict_precedence}};
  for (const auto& p : annotations) j["annotations"].push_back(file_digest(p));
  for (const auto& p : lexicons) j["lexicons"].push_back(file_digest(p));
  return sha256_hex(j.dump());
}

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::Preprocess: return "preprocess";
    case Stage::Embed: return "embed";
    case Stage::Score: return "score";
    case Stage::Ensemble: return "ensemble";
    case Stage::Report: return "report";
  }
  return "preprocess";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::Preprocess, Stage::Embed, Stage::Score, Stage::Ensemble, Stage::Report}) {
    if (stage_name(s) == name) return s;
  }
  throw Error(Errc::ConfigInvalid, fmt::format("unknown stage '{}'", name));
}

// ---------------------------------------------------------------- run dir

namespace {

constexpr std::string_view kMatrixMagic = "INFLEMBM";

std::string sanitize(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out;
}

void write_text(const fs::path& path, std::string_view content) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, fmt::format("cannot write {}", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(Errc::IoFailure, fmt::format("short write to {}", path.string()));
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_upstream(const fs::path& path, std::string_view producer) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(Errc::MissingUpstreamArtifact,
                fmt::format("{} is missing; run the '{}' stage first", path.string(), producer));
  }
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::MissingUpstreamArtifact, fmt::format("{} is unreadable ({}); rerun '{}'", path.string(), e.what(), producer));
  }
}

std::string serialize_matrix(const embed::EmbeddingMatrix& m) {
  std::string out(kMatrixMagic);
  auto put32 = [&](std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), sizeof v); };
  put32(1);
  put32(static_cast<std::uint32_t>(m.rows.size()));
  put32(static_cast<std::uint32_t>(m.dims()));
  for (const auto& row : m.rows) {
    out.append(reinterpret_cast<const char*>(row.values().data()), row.dims() * sizeof(float));
  }
  return out;
}

std::vector<embed::EmbeddingVector> parse_matrix(const std::string& bytes, const fs::path& origin) {
  auto bad = [&] { return Error(Errc::MissingUpstreamArtifact, fmt::format("{} is corrupt; rerun 'embed'", origin.string())); };
  if (bytes.size() < kMatrixMagic.size() + 12 || bytes.compare(0, kMatrixMagic.size(), kMatrixMagic) != 0) throw bad();
  std::size_t pos = kMatrixMagic.size();
  auto get32 = [&] {
    std::uint32_t v = 0;
    std::memcpy(&v, bytes.data() + pos, sizeof v);
    pos += sizeof v;
    return v;
  };
  if (get32() != 1) throw bad();
  const std::size_t rows = get32();
  const std::size_t dims = get32();
  if (bytes.size() != pos + rows * dims * sizeof(float)) throw bad();
  std::vector<embed::EmbeddingVector> out;
  out.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<float> v(dims);
    std::memcpy(v.data(), bytes.data() + pos, dims * sizeof(float));
    pos += dims * sizeof(float);
    out.emplace_back(std::move(v));
  }
  return out;
}

struct RunDir {
  fs::path root;
  fs::path preprocess() const { return root / "preprocess"; }
  fs::path embed() const { return root / "embed"; }
  fs::path score() const { return root / "score"; }
  fs::path ensemble() const { return root / "ensemble"; }
  fs::path report() const { return root / "report"; }
  fs::path documents_json() const { return preprocess() / "documents.json"; }
  fs::path parts_json() const { return preprocess() / "parts.json"; }
  fs::path model_json(std::string_view model) const { return embed() / (sanitize(model) + ".json"); }
  fs::path scores_json() const { return score() / "scores.json"; }
  fs::path ensemble_json() const { return ensemble() / "ensemble.json"; }
};

void mark_stage(const RunDir& dir, const AnalysisConfig& config, Stage stage) {
  const fs::path path = dir.root / "run.json";
  std::vector<std::string> done;
  std::error_code ec;
  if (fs::is_regular_file(path, ec)) {
    try {
      const json old = json::parse(read_file(path));
      if (old.value("config_hash", "") == config.hash()) done = old.at("stages").get<std::vector<std::string>>();
    } catch (const json::exception&) {
    }
  }
  const std::string name(stage_name(stage));
  if (std::find(done.begin(), done.end(), name) == done.end()) done.push_back(name);
  std::vector<std::string> ordered;
  for (Stage s : {Stage::Preprocess, Stage::Embed, Stage::Score, Stage::Ensemble, Stage::Report}) {
    if (std::find(done.begin(), done.end(), stage_name(s)) != done.end()) ordered.emplace_back(stage_name(s));
  }
  write_json(path, {{"schema_version", kConfigSchemaVersion}, {"config_hash", config.hash()}, {"stages", ordered}});
}

// ---------------------------------------------------------------- preprocess

json sentences_json(const corpus::DocumentPart& part) {
  json arr = json::array();
  for (const auto& s : part.sentences) {
    arr.push_back({{"index", s.index}, {"text", s.text}, {"begin", s.char_span.begin}, {"end", s.char_span.end}});
  }
  return arr;
}

void stage_preprocess(const AnalysisConfig& config, const RunDir& dir) {
  const auto entries = corpus::load_manifest(config.manifest);
  std::vector<corpus::Document> influencers;
  std::optional<corpus::Document> influencee;
  for (const auto& e : entries) {
    corpus::Document doc = corpus::load_document(e.path, e);
    if (e.role == corpus::Role::Influencee) {
      if (influencee) {
        throw Error(Errc::ConfigInvalid, fmt::format("manifest lists two influencees: '{}' and '{}'", influencee->id, e.id));
      }
      influencee = std::move(doc);
    } else {
      influencers.push_back(std::move(doc));
    }
  }
  if (!influencee) throw Error(Errc::ConfigInvalid, "manifest has no influencee document");
  if (influencers.empty()) throw Error(Errc::ConfigInvalid, "manifest has no influencer documents");

  std::vector<std::string> caveats;
  json precedence = json::array();
  for (const auto& doc : influencers) {
    const auto rel = corpus::check_precedence(doc.date_range, influencee->date_range);
    precedence.push_back({{"influencer", doc.id},
                          {"influencee", influencee->id},
                          {"influencer_dates", {doc.date_range.start_year, doc.date_range.end_year}},
                          {"influencee_dates", {influencee->date_range.start_year, influencee->date_range.end_year}},
                          {"precedes", rel.precedes},
                          {"overlaps", rel.overlaps},
                          {"valid_for_influence", rel.valid_for_influence}});
    if (rel.valid_for_influence) continue;
    const std::string msg = fmt::format(
        "influencer '{}' ({} to {}) is dated after influencee '{}' ({} to {}); influence needs temporal precedence or "
        "concurrency",
        doc.id, doc.date_range.start_year, doc.date_range.end_year, influencee->id, influencee->date_range.start_year,
        influencee->date_range.end_year);
    if (config.strict_precedence) throw Error(Errc::PrecedenceViolation, msg);
    spdlog::warn("{}", msg);
    caveats.push_back("precedence: " + msg);
  }

  std::vector<preprocess::AnnotationSpan> spans;
  for (const auto& p : config.annotations) {
    auto more = preprocess::load_annotations(p);
    spans.insert(spans.end(), more.begin(), more.end());
  }
  for (const auto& s : spans) {
    if (s.doc_id == influencee->id) {
      throw Error(Errc::PolicyViolation, fmt::format("annotation targets the influencee '{}', which is never preprocessed", s.doc_id));
    }
    const bool known = std::any_of(influencers.begin(), influencers.end(), [&](const auto& d) { return d.id == s.doc_id; });
    if (!known) throw Error(Errc::InvalidAnnotation, fmt::format("annotation names unknown document '{}'", s.doc_id));
  }
  std::vector<preprocess::LexiconEntry> lexicon;
  for (const auto& p : config.lexicons) {
    auto more = preprocess::load_lexicon(p);
    lexicon.insert(lexicon.end(), more.begin(), more.end());
  }
  preprocess::validate_lexicon(lexicon);

  json parts = json::array();
  json reports = json::array();
  auto add_part = [&](const corpus::DocumentPart& part, corpus::Role role) {
    const std::string file = "texts/" + sanitize(part.part_id) + ".txt";
    write_text(dir.preprocess() / file, part.source_text);
    parts.push_back({{"part_id", part.part_id},
                     {"parent_doc", part.parent_doc},
                     {"role", corpus::role_name(role)},
                     {"label", corpus::part_label_name(part.label)},
                     {"text_file", file},
                     {"text_hash", sha256_hex(part.source_text)},
                     {"sentences", sentences_json(part)}});
  };

  for (const auto& doc : influencers) {
    auto result = preprocess::preprocess_influencer(doc, spans, lexicon);
    const auto& blocklist =
        std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.id == doc.id; })->isolation_blocklist;
    const auto hits = preprocess::find_blocklisted_terms(result.text, blocklist);
    if (!hits.empty()) {
      std::string list;
      for (const auto& h : hits) list += (list.empty() ? "" : ", ") + h;
      throw Error(Errc::IsolationViolation,
                  fmt::format("'{}' still mentions other theories after preprocessing: {}", doc.id, list));
    }
    reports.push_back(preprocess::to_json(result.report));
    try {
      add_part(corpus::whole_part(doc, std::move(result.text)), doc.role);
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyText) throw;
      throw Error(Errc::EmptyText, fmt::format("preprocessing left no text in '{}'", doc.id));
    }
  }
  if (config.split) {
    auto [pre, prov] = corpus::split_influencee(*influencee, config.split_marker, config.strip_structure);
    add_part(pre, influencee->role);
    add_part(prov, influencee->role);
  } else {
    const std::string text = config.strip_structure ? corpus::strip_structure(influencee->raw_text) : influencee->raw_text;
    add_part(corpus::whole_part(*influencee, text), influencee->role);
  }

  std::map<std::string, const corpus::Document*> by_id{{influencee->id, &*influencee}};
  for (const auto& d : influencers) by_id.emplace(d.id, &d);
  json documents = json::array();
  for (const auto& e : entries) {
    const corpus::Document& doc = *by_id.at(e.id);
    documents.push_back({{"id", doc.id},
                         {"title", doc.title},
                         {"role", corpus::role_name(doc.role)},
                         {"dates", {doc.date_range.start_year, doc.date_range.end_year}},
                         {"sha256", sha256_hex(doc.raw_text)}});
  }
  std::vector<std::string> influencer_ids;
  for (const auto& d : influencers) influencer_ids.push_back(d.id);

  write_json(dir.parts_json(), {{"parts", parts}});
  write_json(dir.documents_json(), {{"documents", documents},
                                    {"influencee", influencee->id},
                                    {"influencers", influencer_ids},
                                    {"precedence", precedence},
                                    {"preprocessing", reports},
                                    {"caveats", caveats}});
}

// ---------------------------------------------------------------- embed

struct PartRecord {
  std::string part_id;
  std::string parent_doc;
  corpus::Role role;
  std::string text_hash;
  std::vector<corpus::Sentence> sentences;
};

std::vector<PartRecord> read_parts(const RunDir& dir) {
  const json j = read_upstream(dir.parts_json(), "preprocess");
  std::vector<PartRecord> out;
  for (const auto& p : j.at("parts")) {
    PartRecord r;
    r.part_id = p.at("part_id").get<std::string>();
    r.parent_doc = p.at("parent_doc").get<std::string>();
    r.role = corpus::parse_role(p.at("role").get<std::string>());
    r.text_hash = p.at("text_hash").get<std::string>();
    for (const auto& s : p.at("sentences")) {
      r.sentences.push_back({s.at("index").get<std::size_t>(), s.at("text").get<std::string>(),
                             {s.at("begin").get<std::size_t>(), s.at("end").get<std::size_t>()}});
    }
    out.push_back(std::move(r));
  }
  return out;
}

json spec_json(const embed::ModelSpec& m) {
  return {{"name", m.name},
          {"identifier", m.identifier},
          {"family", embed::family_name(m.family)},
          {"pooling", embed::pooling_name(m.pooling)},
          {"max_tokens", m.max_tokens},
          {"dims", m.dims}};
}

embed::ModelSpec spec_from_json(const json& j) {
  embed::ModelSpec m;
  m.name = j.at("name").get<std::string>();
  m.identifier = j.at("identifier").get<std::string>();
  m.family = embed::parse_family(j.at("family").get<std::string>()).value_or(embed::Family::Reference);
  m.pooling = embed::parse_pooling(j.at("pooling").get<std::string>());
  m.max_tokens = j.at("max_tokens").get<std::size_t>();
  m.dims = j.at("dims").get<std::size_t>();
  return m;
}

void stage_embed(const AnalysisConfig& config, const RunDir& dir) {
  const auto parts = read_parts(dir);
  for (const auto& name : config.models) {
    const embed::ModelSpec& spec = embed::find_model(name);
    std::unique_ptr<embed::EmbeddingBackend> backend;
    if (spec.family == embed::Family::Reference) {
      std::vector<std::string> texts;
      for (const auto& p : parts)
        for (const auto& s : p.sentences) texts.push_back(s.text);
      auto vocab = embed::Vocabulary::from_texts(texts);
      std::string listing;
      for (const auto& term : vocab.terms()) listing += term + "\n";
      write_text(dir.embed() / "reference.vocab", listing);
      backend = std::make_unique<embed::ReferenceBackend>(std::move(vocab));
    } else {
      const fs::path bundle = config.bundles_dir / spec.identifier;
      auto tb = embed::TransformerBackend::load(bundle, spec, config.pooling);
      // A bundle that cannot reproduce its own fixtures is not used. The
      // fixtures were recorded with the manifest pooling.
      const bool overridden = tb->model().pooling != tb->manifest().pooling;
      const auto parity = embed::verify_bundle(overridden ? *embed::TransformerBackend::load(bundle, spec) : *tb);
      for (const auto& e : parity.entries) {
        spdlog::debug("{}: parity max |delta| {:.3g}, cosine {:.8f}", spec.name, e.max_abs_delta, e.cosine);
      }
      backend = std::move(tb);
    }

    std::unique_ptr<embed::EmbeddingCache> cache;
    fs::path cache_file;
    if (config.cache_dir) {
      cache = std::make_unique<embed::EmbeddingCache>(backend->cache_identity());
      cache_file = cache->file_in(*config.cache_dir);
      cache->load(cache_file);
    }

    json part_list = json::array();
    for (const auto& p : parts) {
      const auto matrix = embed::embed_sentences(*backend, p.sentences, cache.get(),
                                                 {p.part_id, p.text_hash, config.threads});
      const std::string file = sanitize(spec.name) + "/" + sanitize(p.part_id) + ".emb";
      const std::string bytes = serialize_matrix(matrix);
      write_text(dir.embed() / file, bytes);
      part_list.push_back({{"part_id", p.part_id},
                           {"rows", matrix.rows.size()},
                           {"dims", matrix.dims()},
                           {"truncated", matrix.truncated},
                           {"file", file},
                           {"sha256", sha256_hex(bytes)}});
    }
    if (cache) cache->save(cache_file);
    spdlog::info("{}: {} backend invocations", spec.name, backend->invocations());
    write_json(dir.model_json(spec.name),
               {{"model", spec_json(backend->model())}, {"cache_identity", backend->cache_identity()}, {"parts", part_list}});
  }
}

// ---------------------------------------------------------------- score

struct ModelEmbeddings {
  embed::ModelSpec spec;
  std::map<std::string, embed::EmbeddingMatrix> parts;
  json sidecar;
};

ModelEmbeddings read_embeddings(const RunDir& dir, const std::string& name) {
  const embed::ModelSpec& registry_spec = embed::find_model(name);
  ModelEmbeddings out;
  out.sidecar = read_upstream(dir.model_json(registry_spec.name), "embed");
  out.spec = spec_from_json(out.sidecar.at("model"));
  for (const auto& p : out.sidecar.at("parts")) {
    const fs::path file = dir.embed() / p.at("file").get<std::string>();
    std::error_code ec;
    if (!fs::is_regular_file(file, ec)) {
      throw Error(Errc::MissingUpstreamArtifact, fmt::format("{} is missing; run the 'embed' stage first", file.string()));
    }
    embed::EmbeddingMatrix m;
    m.model = out.spec;
    m.source_part = p.at("part_id").get<std::string>();
    m.rows = parse_matrix(read_file(file), file);
    m.truncated = p.at("truncated").get<std::vector<std::size_t>>();
    out.parts.emplace(m.source_part, std::move(m));
  }
  return out;
}

void stage_score(const AnalysisConfig& config, const RunDir& dir) {
  const auto parts = read_parts(dir);
  std::vector<std::string> influencers;
  std::vector<std::string> targets;
  std::map<std::string, std::string> part_of;  // influencer doc -> part id
  for (const auto& p : parts) {
    if (p.role == corpus::Role::Influencer) {
      influencers.push_back(p.parent_doc);
      part_of[p.parent_doc] = p.part_id;
    } else {
      targets.push_back(p.part_id);
    }
  }
  std::vector<std::string> model_names;
  for (const auto& name : config.models) model_names.push_back(embed::find_model(name).name);

  ensemble::ScoreTable table(model_names, influencers, targets);
  std::optional<ensemble::ScoreTable> lateral;
  const bool with_lateral = config.lateral && influencers.size() >= 2;
  if (with_lateral) lateral = ensemble::lateral_table(model_names, influencers);

  // (model, part) -> zero-norm sentence indices
  std::vector<std::pair<std::string, std::string>> excluded_keys;
  std::map<std::pair<std::string, std::string>, std::set<std::size_t>> excluded;
  auto note = [&](const std::string& model, const std::string& part, const std::vector<std::size_t>& idx) {
    if (idx.empty()) return;
    const auto key = std::pair{model, part};
    if (!excluded.contains(key)) excluded_keys.push_back(key);
    excluded[key].insert(idx.begin(), idx.end());
  };

  auto score_pair = [&](const ModelEmbeddings& me, const std::string& a, const std::string& b) {
    const auto& ma = me.parts.at(a);
    const auto& mb = me.parts.at(b);
    const auto result = similarity::aggregate_document_score(ma, mb, config.strategy, config.threads);
    note(me.spec.name, a, result.excluded_rows);
    note(me.spec.name, b, result.excluded_cols);
    if (config.write_matrices && config.strategy.kind != similarity::Strategy::Centroid) {
      const auto m = similarity::sentence_sim_matrix(ma, mb, config.threads);
      write_text(dir.score() / "matrices" / sanitize(me.spec.name) / (sanitize(a) + "__" + sanitize(b) + ".csv"),
                 similarity::matrix_csv(m));
    }
    return result.score.percent;
  };

  for (const auto& name : model_names) {
    const ModelEmbeddings me = read_embeddings(dir, name);
    for (const auto& p : parts) {
      if (!me.parts.contains(p.part_id)) {
        throw Error(Errc::MissingUpstreamArtifact,
                    fmt::format("no '{}' embeddings for part '{}'; rerun the 'embed' stage", name, p.part_id));
      }
    }
    for (const auto& inf : influencers) {
      for (const auto& t : targets) table.set(name, inf, t, score_pair(me, part_of.at(inf), t));
    }
    if (with_lateral) {
      for (const auto& [a, b] : ensemble::influencer_pairs(influencers)) {
        lateral->set(name, ensemble::pair_id(a, b), ensemble::kLateralTarget, score_pair(me, part_of.at(a), part_of.at(b)));
      }
    }
  }

  std::vector<std::string> caveats;
  for (const auto& key : excluded_keys) {
    const auto& idx = excluded.at(key);
    std::string list;
    for (std::size_t i : idx) list += (list.empty() ? "" : ", ") + std::to_string(i);
    caveats.push_back(fmt::format("{}: {} zero-norm sentence(s) of '{}' excluded from scoring (indices {})", key.first,
                                  idx.size(), key.second, list));
  }
  write_json(dir.scores_json(), {{"strategy", config.strategy.name()},
                                 {"influence", ensemble::to_json(table)},
                                 {"lateral", lateral ? ensemble::to_json(*lateral) : json(nullptr)},
                                 {"caveats", caveats}});
}

// ---------------------------------------------------------------- ensemble

json ensemble_block(const ensemble::ScoreTable& table) {
  const auto stats = ensemble::compute_stats(table);
  // A single candidate cannot be voted on.
  const bool voting = table.influencers().size() >= 2;
  json votes = json::array();
  json rankings = json::object();
  for (const auto& t : table.targets()) {
    if (voting) votes.push_back(ensemble::to_json(ensemble::vote(table, t)));
    rankings[t] = ensemble::rank_influencers(stats, t);
  }
  return {{"stats", ensemble::to_json(stats)},
          {"votes", votes},
          {"rankings", rankings},
          {"pooled",
           {{"vote", voting ? ensemble::to_json(ensemble::pooled_vote(table)) : json(nullptr)},
            {"ranking", ensemble::pooled_ranking(stats)}}}};
}

void stage_ensemble(const AnalysisConfig&, const RunDir& dir) {
  const json scores = read_upstream(dir.scores_json(), "score");
  const auto table = ensemble::score_table_from_json(scores.at("influence"));
  json out = {{"influence", ensemble_block(table)}, {"lateral", nullptr}};
  if (!scores.at("lateral").is_null()) out["lateral"] = ensemble_block(ensemble::score_table_from_json(scores.at("lateral")));
  write_json(dir.ensemble_json(), out);
}

// ---------------------------------------------------------------- report

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
}

void stage_report(const AnalysisConfig& config, const RunDir& dir) {
  const std::string started = utc_now();
  const json documents = read_upstream(dir.documents_json(), "preprocess");
  const json scores = read_upstream(dir.scores_json(), "score");
  read_upstream(dir.ensemble_json(), "ensemble");

  report::AnalysisReport r;
  r.config_hash = config.hash();
  r.strategy = scores.at("strategy").get<std::string>();
  r.pooling = config.pooling ? std::string(embed::pooling_name(*config.pooling)) : "model-default";
  r.scores = ensemble::score_table_from_json(scores.at("influence"));
  if (!scores.at("lateral").is_null()) r.lateral = ensemble::score_table_from_json(scores.at("lateral"));

  for (const auto& c : documents.at("caveats")) r.caveats.push_back(c.get<std::string>());
  for (const auto& name : r.scores.models()) {
    const json sidecar = read_upstream(dir.model_json(name), "embed");
    const auto spec = spec_from_json(sidecar.at("model"));
    r.models.push_back({spec.name, spec.identifier});
    for (const auto& p : sidecar.at("parts")) {
      const auto truncated = p.at("truncated").get<std::vector<std::size_t>>();
      if (truncated.empty()) continue;
      r.caveats.push_back(fmt::format("{}: {} sentence(s) of '{}' exceeded {} tokens and were truncated", spec.name,
                                      truncated.size(), p.at("part_id").get<std::string>(), spec.max_tokens));
    }
  }
  for (const auto& c : scores.at("caveats")) r.caveats.push_back(c.get<std::string>());
  if (r.scores.influencers().size() < 3) {
    r.caveats.push_back("fewer than three influencers: radar charts were not drawn");
  }

  for (const auto& p : documents.at("precedence")) {
    report::PrecedenceEntry e;
    e.influencer = p.at("influencer").get<std::string>();
    e.influencee = p.at("influencee").get<std::string>();
    e.influencer_dates = {p.at("influencer_dates").at(0).get<int>(), p.at("influencer_dates").at(1).get<int>()};
    e.influencee_dates = {p.at("influencee_dates").at(0).get<int>(), p.at("influencee_dates").at(1).get<int>()};
    e.relation = {p.at("precedes").get<bool>(), p.at("overlaps").get<bool>(), p.at("valid_for_influence").get<bool>()};
    r.precedence.push_back(std::move(e));
  }
  for (const auto& p : documents.at("preprocessing")) r.preprocessing.push_back(preprocess::report_from_json(p));
  r.started_at = started;
  r.finished_at = utc_now();
  report::emit_report(r, dir.report());
}

}  // namespace

void run_stage(const AnalysisConfig& config, Stage stage) {
  const RunDir dir{config.output_dir};
  try {
    switch (stage) {
      case Stage::Preprocess: stage_preprocess(config, dir); break;
      case Stage::Embed: stage_embed(config, dir); break;
      case Stage::Score: stage_score(config, dir); break;
      case Stage::Ensemble: stage_ensemble(config, dir); break;
      case Stage::Report: stage_report(config, dir); break;
    }
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("[{}] {}", stage_name(stage), std::string_view(e.what()).substr(errc_name(e.code()).size() + 2)));
  } catch (const json::exception& e) {
    throw Error(Errc::MissingUpstreamArtifact, fmt::format("[{}] malformed run artifact: {}", stage_name(stage), e.what()));
  }
  mark_stage(dir, config, stage);
}

void run_all(const AnalysisConfig& config) {
  for (Stage s : {Stage::Preprocess, Stage::Embed, Stage::Score, Stage::Ensemble, Stage::Report}) run_stage(config, s);
}

}  // namespace influence::pipeline
