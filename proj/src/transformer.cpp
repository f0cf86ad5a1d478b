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

#include "influence/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "influence/errors.hpp"
#include "influence/hash.hpp"
#include "influence/onnx.hpp"
#include "influence/tokenizer.hpp"

namespace influence::embed {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bundle_fail(const std::string& msg) { throw Error(Errc::ModelLoadFailure, msg); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bundle_fail(fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<std::string> kKnownInputs = {"input_ids", "attention_mask", "token_type_ids"};

}  // namespace

BundleManifest parse_bundle_manifest(const json& j) {
  BundleManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != 1) bundle_fail(fmt::format("unsupported bundle format_version {}", m.format_version));
    m.identifier = j.at("identifier").get<std::string>();
    m.dims = j.at("dims").get<std::size_t>();
    m.max_tokens = j.at("max_tokens").get<std::size_t>();
    m.pooling = parse_pooling(j.value("pooling", std::string("mean")));
    m.normalized = j.value("normalized", false);
    m.graph_file = j.value("graph_file", m.graph_file);
    m.tokenizer_file = j.value("tokenizer_file", m.tokenizer_file);
    m.input_names = j.at("input_names").get<std::vector<std::string>>();
    m.output_name = j.at("output_name").get<std::string>();
    m.output_kind = j.value("output_kind", m.output_kind);
    for (const auto& p : j.value("parity", json::array())) {
      m.parity.push_back({p.at("text").get<std::string>(), p.at("vector").get<std::vector<double>>()});
    }
    m.revision = j.value("revision", std::string());
    m.tools = j.value("tools", json::object());
  } catch (const json::exception& e) {
    bundle_fail(fmt::format("malformed bundle manifest: {}", e.what()));
  } catch (const Error& e) {
    if (e.code() == Errc::ModelLoadFailure) throw;
    bundle_fail(fmt::format("malformed bundle manifest: {}", e.what()));
  }
  if (m.identifier.empty()) bundle_fail("bundle manifest has an empty identifier");
  if (m.dims == 0) bundle_fail("bundle manifest dims must be positive");
  if (m.max_tokens == 0) bundle_fail("bundle manifest max_tokens must be positive");
  if (m.output_kind != "token_embeddings" && m.output_kind != "sentence_embedding") {
    bundle_fail(fmt::format("unknown output_kind '{}'", m.output_kind));
  }
  if (std::find(m.input_names.begin(), m.input_names.end(), "input_ids") == m.input_names.end()) {
    bundle_fail("bundle inputs must include input_ids");
  }
  for (const auto& n : m.input_names) {
    if (std::find(kKnownInputs.begin(), kKnownInputs.end(), n) == kKnownInputs.end()) {
      bundle_fail(fmt::format("unknown graph input '{}'", n));
    }
  }
  for (const auto& p : m.parity) {
    if (p.vector.size() != m.dims) {
      bundle_fail(fmt::format("parity vector for '{}' has {} values, expected {}", p.text, p.vector.size(), m.dims));
    }
  }
  return m;
}

BundleManifest load_bundle_manifest(const fs::path& dir) {
  const fs::path path = dir / kBundleManifestName;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) bundle_fail(fmt::format("bundle manifest not found: {}", path.string()));
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    bundle_fail(fmt::format("{} is not valid JSON: {}", path.string(), e.what()));
  }
  return parse_bundle_manifest(j);
}

json to_json(const BundleManifest& m) {
  json parity = json::array();
  for (const auto& p : m.parity) parity.push_back({{"text", p.text}, {"vector", p.vector}});
  return {
      {"format_version", m.format_version},
      {"identifier", m.identifier},
      {"dims", m.dims},
      {"max_tokens", m.max_tokens},
      {"pooling", std::string(pooling_name(m.pooling))},
      {"normalized", m.normalized},
      {"graph_file", m.graph_file},
      {"tokenizer_file", m.tokenizer_file},
      {"input_names", m.input_names},
      {"output_name", m.output_name},
      {"output_kind", m.output_kind},
      {"parity", parity},
      {"revision", m.revision},
      {"tools", m.tools.is_null() ? json::object() : m.tools},
  };
}

TransformerBackend::~TransformerBackend() = default;

std::unique_ptr<TransformerBackend> TransformerBackend::load(const fs::path& bundle_dir, const ModelSpec& spec,
                                                             std::optional<Pooling> pooling) {
  std::unique_ptr<TransformerBackend> b(new TransformerBackend());
  b->manifest_ = load_bundle_manifest(bundle_dir);
  const BundleManifest& m = b->manifest_;
  if (m.identifier != spec.identifier) {
    bundle_fail(fmt::format("bundle at {} holds '{}', not '{}'", bundle_dir.string(), m.identifier, spec.identifier));
  }
  b->model_ = spec;
  b->model_.dims = m.dims;
  b->model_.max_tokens = m.max_tokens;
  b->model_.pooling = pooling.value_or(m.pooling);
  if (m.output_kind == "sentence_embedding" && b->model_.pooling != m.pooling) {
    bundle_fail(fmt::format("'{}' pools inside its graph; pooling cannot be changed to {}", m.identifier,
                            pooling_name(b->model_.pooling)));
  }

  const std::string graph_bytes = read_file(bundle_dir / m.graph_file);
  const std::string tok_bytes = read_file(bundle_dir / m.tokenizer_file);
  b->graph_ = onnx::Model::parse(graph_bytes, bundle_dir);
  b->tokenizer_ = tokenizer::Tokenizer::load(bundle_dir / m.tokenizer_file);
  b->graph_digest_ = sha256_hex(sha256_hex(graph_bytes) + sha256_hex(tok_bytes));

  const auto& inputs = b->graph_->inputs();
  for (const auto& n : m.input_names) {
    if (std::find(inputs.begin(), inputs.end(), n) == inputs.end()) {
      bundle_fail(fmt::format("graph of '{}' has no input '{}'", m.identifier, n));
    }
  }
  for (const auto& n : inputs) {
    if (std::find(m.input_names.begin(), m.input_names.end(), n) == m.input_names.end()) {
      bundle_fail(fmt::format("graph of '{}' needs input '{}' that the manifest does not list", m.identifier, n));
    }
  }
  const auto& outputs = b->graph_->outputs();
  if (std::find(outputs.begin(), outputs.end(), m.output_name) == outputs.end()) {
    bundle_fail(fmt::format("graph of '{}' has no output '{}'", m.identifier, m.output_name));
  }
  if (m.max_tokens <= b->tokenizer_->special_tokens_count()) {
    bundle_fail(fmt::format("max_tokens {} leaves no room beside {} special tokens", m.max_tokens,
                            b->tokenizer_->special_tokens_count()));
  }
  return b;
}

std::string TransformerBackend::cache_identity() const {
  return fmt::format("{}@{}#{}:{}:{}:{}", model_.identifier, manifest_.revision, graph_digest_.substr(0, 16),
                     pooling_name(model_.pooling), model_.max_tokens, manifest_.normalized ? "l2" : "raw");
}

std::vector<std::int64_t> TransformerBackend::token_ids(std::string_view sentence) const {
  return tokenizer_->encode(sentence, model_.max_tokens).ids;
}

bool TransformerBackend::truncates(std::string_view sentence) const {
  return tokenizer_->encode(sentence, model_.max_tokens).truncated;
}

BackendOutput TransformerBackend::embed(std::string_view sentence) const {
  count_invocation();
  const tokenizer::Encoding enc = tokenizer_->encode(sentence, model_.max_tokens);
  const auto tokens = static_cast<std::int64_t>(enc.ids.size());
  const std::vector<std::int64_t> mask(enc.ids.size(), 1);
  std::vector<std::pair<std::string, onnx::Tensor>> feeds;
  for (const auto& n : manifest_.input_names) {
    if (n == "input_ids") feeds.emplace_back(n, onnx::Tensor::ints({1, tokens}, enc.ids));
    else if (n == "attention_mask") feeds.emplace_back(n, onnx::Tensor::ints({1, tokens}, mask));
    else feeds.emplace_back(n, onnx::Tensor::ints({1, tokens}, enc.type_ids));
  }
  const auto out = graph_->run(feeds, {manifest_.output_name});
  const onnx::Tensor& y = out.front();
  if (y.dtype != onnx::DType::Float) throw Error(Errc::InferenceFailure, "graph output is not floating point");

  const std::size_t dims = model_.dims;
  std::vector<float> values;
  if (manifest_.output_kind == "sentence_embedding") {
    if (y.shape != onnx::Shape{1, static_cast<std::int64_t>(dims)}) {
      throw Error(Errc::InferenceFailure, fmt::format("sentence embedding has shape [{}], expected [1, {}]",
                                                      fmt::join(y.shape, ", "), dims));
    }
    values = y.f;
  } else {
    if (y.shape != onnx::Shape{1, tokens, static_cast<std::int64_t>(dims)}) {
      throw Error(Errc::InferenceFailure, fmt::format("token embeddings have shape [{}], expected [1, {}, {}]",
                                                      fmt::join(y.shape, ", "), tokens, dims));
    }
    const EmbeddingVector pooled = pool_tokens(y.f, dims, mask, model_.pooling);
    values.assign(pooled.values().begin(), pooled.values().end());
  }
  if (manifest_.normalized) {
    double norm = 0.0;
    for (float v : values) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (auto& v : values) v = static_cast<float>(v / norm);
    }
  }
  return {EmbeddingVector(std::move(values)), enc.truncated};
}

ParityReport verify_bundle(const TransformerBackend& backend, double max_delta, double min_cosine) {
  const BundleManifest& m = backend.manifest();
  if (m.parity.empty()) {
    throw Error(Errc::ParityFailure, fmt::format("bundle '{}' has no parity fixtures", m.identifier));
  }
  ParityReport report;
  report.passed = true;
  std::string failures;
  for (const auto& p : m.parity) {
    const EmbeddingVector got = backend.embed(p.text).vector;
    ParityEntry e{p.text, 0.0, 0.0};
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t k = 0; k < p.vector.size(); ++k) {
      const double a = got[k];
      const double b = p.vector[k];
      e.max_abs_delta = std::max(e.max_abs_delta, std::fabs(a - b));
      dot += a * b;
      na += a * a;
      nb += b * b;
    }
    e.cosine = na > 0.0 && nb > 0.0 ? dot / (std::sqrt(na) * std::sqrt(nb)) : 0.0;
    if (e.max_abs_delta > max_delta || e.cosine < min_cosine) {
      report.passed = false;
      failures += fmt::format("\n  '{}': max |delta| {:.3g}, cosine {:.6f}", p.text, e.max_abs_delta, e.cosine);
    }
    report.entries.push_back(std::move(e));
  }
  if (!report.passed) {
    throw Error(Errc::ParityFailure,
                fmt::format("'{}' misses parity (max |delta| <= {:g}, cosine >= {:g}):{}", m.identifier, max_delta,
                            min_cosine, failures));
  }
  return report;
}

}  // namespace influence::embed
