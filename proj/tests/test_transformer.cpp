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

#include <cmath>

#include <doctest.h>
#include <json.hpp>

#include "influence/embed.hpp"
#include "influence/errors.hpp"
#include "influence/transformer.hpp"
#include "support.hpp"

using namespace influence::embed;
using influence::Errc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path bundle_of(const ModelSpec& spec) { return testing::fixtures() / "bundles" / spec.identifier; }

std::vector<ModelSpec> encoders() {
  std::vector<ModelSpec> out;
  for (const auto& m : registry()) {
    if (m.family != Family::Reference) out.push_back(m);
  }
  return out;
}

// Copies a bundle so a test can damage it.
fs::path copy_bundle(const testing::TempDir& dir, const ModelSpec& spec) {
  const fs::path to = dir / spec.identifier;
  fs::copy(bundle_of(spec), to, fs::copy_options::recursive);
  return to;
}

json manifest_json(const fs::path& bundle) { return json::parse(testing::slurp(bundle / "manifest.json")); }

const std::string kLong =
    "Obligations bind all parties equally and cannot be waived lightly, whatever the consequences for welfare and "
    "happiness may be in each case, and the committee consults experts whenever questions are complex.";

}  // namespace

TEST_CASE("every fixture bundle passes parity") {
  const auto models = encoders();
  REQUIRE(models.size() == 5);
  for (const auto& spec : models) {
    CAPTURE(spec.name);
    const auto b = TransformerBackend::load(bundle_of(spec), spec);
    const auto report = verify_bundle(*b);
    CHECK(report.passed);
    REQUIRE(report.entries.size() == b->manifest().parity.size());
    CHECK(report.entries.size() >= 2);
    for (const auto& e : report.entries) {
      CHECK(e.max_abs_delta <= kParityMaxDelta);
      CHECK(e.cosine >= kParityMinCosine);
    }
    // the manifest wins over the registry for width and budget
    CHECK(b->model().dims == b->manifest().dims);
    CHECK(b->model().max_tokens == b->manifest().max_tokens);
    CHECK(b->model().name == spec.name);
  }
}

TEST_CASE("embeddings are deterministic and normalized when the bundle says so") {
  for (const auto& spec : encoders()) {
    CAPTURE(spec.name);
    const auto b = TransformerBackend::load(bundle_of(spec), spec);
    const auto a = b->embed("Duties follow from the rules.");
    const auto c = b->embed("Duties follow from the rules.");
    CHECK(a.vector == c.vector);
    CHECK(a.vector.dims() == b->model().dims);
    CHECK_FALSE(a.truncated);
    if (b->manifest().normalized) CHECK(a.vector.l2_norm() == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("truncation is deterministic and ignores text past the budget") {
  for (const auto& spec : encoders()) {
    CAPTURE(spec.name);
    const auto b = TransformerBackend::load(bundle_of(spec), spec);
    REQUIRE(b->truncates(kLong));
    CHECK(b->token_ids(kLong).size() == b->model().max_tokens);
    const auto x = b->embed(kLong);
    CHECK(x.truncated);
    CHECK(x.vector == b->embed(kLong + " Further words change nothing here.").vector);
    CHECK_FALSE(b->truncates("Short."));
  }
}

TEST_CASE("cache identity tracks the graph and pooling") {
  const auto& spec = find_model("SBERT");
  const auto mean = TransformerBackend::load(bundle_of(spec), spec);
  const auto cls = TransformerBackend::load(bundle_of(spec), spec, Pooling::Cls);
  CHECK(mean->cache_identity() != cls->cache_identity());
  CHECK(mean->cache_identity().find(spec.identifier) == 0);
  CHECK(cls->model().pooling == Pooling::Cls);
  CHECK_FALSE(mean->embed("Virtue grows.").vector == cls->embed("Virtue grows.").vector);
  // pooling override means the recorded parity vectors no longer apply
  CHECK_ERRC(verify_bundle(*cls), Errc::ParityFailure);

  testing::TempDir dir;
  const fs::path copy = copy_bundle(dir, spec);
  std::string graph = testing::slurp(copy / "model.onnx");
  graph[graph.size() / 2] ^= 0x01;
  testing::spill(copy / "model.onnx", graph);
  try {
    const auto other = TransformerBackend::load(copy, spec);
    CHECK(other->cache_identity() != mean->cache_identity());
  } catch (const influence::Error& e) {
    CHECK(e.code() == Errc::ModelLoadFailure);
  }
}

TEST_CASE("graph-pooled bundles refuse a pooling override") {
  const auto& spec = find_model("DistilBERT");
  REQUIRE(load_bundle_manifest(bundle_of(spec)).output_kind == "sentence_embedding");
  CHECK_ERRC(TransformerBackend::load(bundle_of(spec), spec, Pooling::Cls), Errc::ModelLoadFailure);
  CHECK_NOTHROW(TransformerBackend::load(bundle_of(spec), spec, Pooling::Mean));
}

TEST_CASE("parity failures name the fixture") {
  const auto& spec = find_model("RoBERTa");
  testing::TempDir dir;
  const fs::path copy = copy_bundle(dir, spec);
  json m = manifest_json(copy);
  m["parity"][1]["vector"][0] = m["parity"][1]["vector"][0].get<double>() + 0.01;
  testing::spill(copy / "manifest.json", m.dump());
  const auto b = TransformerBackend::load(copy, spec);
  try {
    verify_bundle(*b);
    FAIL("expected a parity failure");
  } catch (const influence::Error& e) {
    CHECK(e.code() == Errc::ParityFailure);
    CHECK(std::string(e.what()).find(m["parity"][1]["text"].get<std::string>()) != std::string::npos);
  }
  // a looser delta still fails on nothing but that fixture
  CHECK(verify_bundle(*b, 0.02, 0.99).passed);

  m["parity"] = json::array();
  testing::spill(copy / "manifest.json", m.dump());
  CHECK_ERRC(verify_bundle(*TransformerBackend::load(copy, spec)), Errc::ParityFailure);
}

TEST_CASE("damaged weights fail parity") {
  const auto& spec = find_model("TinyBERT");
  testing::TempDir dir;
  const fs::path copy = copy_bundle(dir, spec);
  std::string graph = testing::slurp(copy / "model.onnx");
  // flip bytes in the tail, where the weight data sits
  for (std::size_t k = graph.size() - 4000; k < graph.size() - 3000; k += 7) graph[k] = static_cast<char>(graph[k] ^ 0x40);
  testing::spill(copy / "model.onnx", graph);
  const auto code = testing::error_of([&] { verify_bundle(*TransformerBackend::load(copy, spec)); });
  REQUIRE(code.has_value());
  CHECK((*code == Errc::ParityFailure || *code == Errc::ModelLoadFailure || *code == Errc::InferenceFailure));

  testing::spill(copy / "model.onnx", graph.substr(0, graph.size() / 3));
  CHECK_ERRC(TransformerBackend::load(copy, spec), Errc::ModelLoadFailure);
  fs::remove(copy / "model.onnx");
  CHECK_ERRC(TransformerBackend::load(copy, spec), Errc::ModelLoadFailure);
}

TEST_CASE("bundle manifest validation") {
  const auto& spec = find_model("ALBERT");
  const json good = manifest_json(bundle_of(spec));
  const BundleManifest parsed = parse_bundle_manifest(good);
  CHECK(parsed.identifier == spec.identifier);
  CHECK(to_json(parsed) == good);

  const auto broken = [&](auto&& edit) {
    json j = good;
    edit(j);
    return testing::error_of([&] { parse_bundle_manifest(j); });
  };
  const auto bad = std::optional(Errc::ModelLoadFailure);
  CHECK(broken([](json& j) { j["format_version"] = 2; }) == bad);
  CHECK(broken([](json& j) { j.erase("identifier"); }) == bad);
  CHECK(broken([](json& j) { j["identifier"] = ""; }) == bad);
  CHECK(broken([](json& j) { j["dims"] = 0; }) == bad);
  CHECK(broken([](json& j) { j["dims"] = "wide"; }) == bad);
  CHECK(broken([](json& j) { j["max_tokens"] = 0; }) == bad);
  CHECK(broken([](json& j) { j["pooling"] = "max"; }) == bad);
  CHECK(broken([](json& j) { j["output_kind"] = "logits"; }) == bad);
  CHECK(broken([](json& j) { j["input_names"] = {"attention_mask"}; }) == bad);
  CHECK(broken([](json& j) { j["input_names"].push_back("position_ids"); }) == bad);
  CHECK(broken([](json& j) { j["parity"][0]["vector"].erase(0); }) == bad);
  CHECK(broken([](json&) {}) == std::nullopt);

  testing::TempDir dir;
  CHECK_ERRC(load_bundle_manifest(dir.path()), Errc::ModelLoadFailure);
  testing::spill(dir / "manifest.json", "{");
  CHECK_ERRC(load_bundle_manifest(dir.path()), Errc::ModelLoadFailure);
}

TEST_CASE("bundle and graph must agree") {
  const auto& spec = find_model("SBERT");
  testing::TempDir dir;
  const fs::path copy = copy_bundle(dir, spec);
  const json good = manifest_json(copy);
  const auto with = [&](auto&& edit) {
    json j = good;
    edit(j);
    testing::spill(copy / "manifest.json", j.dump());
    return testing::error_of([&] { TransformerBackend::load(copy, spec); });
  };
  const auto bad = std::optional(Errc::ModelLoadFailure);
  CHECK(with([](json&) {}) == std::nullopt);
  CHECK(with([](json& j) { j["identifier"] = "someone-else"; }) == bad);
  CHECK(with([](json& j) { j["output_name"] = "pooled"; }) == bad);
  CHECK(with([](json& j) { j["input_names"] = {"input_ids"}; }) == bad);
  CHECK(with([](json& j) { j["input_names"].push_back("token_type_ids"); }) == bad);
  CHECK(with([](json& j) { j["max_tokens"] = 2; }) == bad);
  CHECK(with([](json& j) { j["tokenizer_file"] = "missing.json"; }) == bad);
  // a wrong width passes loading but not inference
  with([](json& j) {
    j["dims"] = 31;
    j["parity"] = json::array();
  });
  CHECK_ERRC(TransformerBackend::load(copy, spec)->embed("words"), Errc::InferenceFailure);
}
