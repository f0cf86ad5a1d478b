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

#include <cstdlib>
#include <map>
#include <set>

#include <fmt/format.h>

#include <doctest.h>
#include <json.hpp>

#include "influence/ensemble.hpp"
#include "influence/errors.hpp"
#include "influence/pipeline.hpp"
#include "support.hpp"

using namespace influence::pipeline;
using influence::Errc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kRun = testing::fixtures() / "run";

// Every file under `root`, by relative path.
std::map<std::string, std::string> tree(const fs::path& root, const std::set<std::string>& skip = {}) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), root).generic_string();
    if (!skip.count(e.path().filename().string())) out[rel] = testing::slurp(e.path());
  }
  return out;
}

AnalysisConfig fixture_config(const std::string& file, const fs::path& out, std::size_t threads = 1) {
  AnalysisConfig c = load_config(kRun / file);
  c.output_dir = out;
  c.cache_dir.reset();
  c.threads = threads;
  validate(c);
  return c;
}

// A two-influencer-or-fewer project in a temp directory.
struct MiniProject {
  testing::TempDir dir;

  void text(const std::string& name, const std::string& body) { testing::spill(dir / name, body); }

  void corpus(const std::vector<std::tuple<std::string, std::string, int, std::string>>& docs) {
    std::string s;
    for (const auto& [id, role, start, path] : docs) {
      s += fmt::format("[[document]]\nid = \"{}\"\ntitle = \"{}\"\nrole = \"{}\"\nstart_year = {}\nend_year = {}\npath = \"{}\"\n\n",
                       id, id, role, start, start + 1, path);
    }
    testing::spill(dir / "corpus.toml", s);
  }

  AnalysisConfig config(const std::string& strategy, const std::string& extra = "") {
    const std::string toml = fmt::format(
        "schema_version = 1\n[corpus]\nmanifest = \"corpus.toml\"\nsplit = false\n[models]\nnames = [\"reference\"]\n"
        "[scoring]\nstrategy = \"{}\"\n[run]\noutput_dir = \"out\"\n{}",
        strategy, extra);
    AnalysisConfig c = parse_config(toml, dir.path());
    validate(c);
    return c;
  }
};

influence::ensemble::ScoreTable influence_scores(const AnalysisConfig& c) {
  const json j = json::parse(testing::slurp(c.output_dir / "score" / "scores.json"));
  return influence::ensemble::score_table_from_json(j.at("influence"));
}

}  // namespace

TEST_CASE("config parsing") {
  const fs::path base = kRun;
  const std::string head = "schema_version = 1\n[corpus]\nmanifest = \"corpus.toml\"\nsplit = false\n";
  const AnalysisConfig c = parse_config(head + "[models]\nnames = [\"reference\"]\n", base);
  CHECK(c.manifest == base / "corpus.toml");
  CHECK(c.strategy.name() == "pair-mean");
  CHECK(c.threads == 1);
  CHECK(c.lateral);
  CHECK(c.strict_precedence);

  const auto invalid = std::optional(Errc::ConfigInvalid);
  const auto err = [&](const std::string& toml) { return testing::error_of([&] { parse_config(toml, base); }); };
  CHECK(err("schema_version = 2\n[corpus]\nmanifest = \"c\"\n") == invalid);
  CHECK(err("[corpus]\nmanifest = \"c\"\n") == invalid);
  CHECK(err(head + "[models]\nnames = [\"reference\"]\ncolour = 1\n") == invalid);
  CHECK(err(head + "[extras]\nx = 1\n") == invalid);
  CHECK(err(head + "[scoring]\nstrategy = \"median\"\n") == invalid);
  CHECK(err(head + "[scoring]\nlateral = \"yes\"\n") == invalid);
  CHECK(err(head + "[run]\nthreads = 0\n") == invalid);
  CHECK(err(head + "[models]\nnames = [1, 2]\n") == invalid);
  CHECK(err("schema_version = 1\n[corpus]\nsplit = true\n") == invalid);
  CHECK(err("schema_version = 1\n[corpus\n") == invalid);

  CHECK_ERRC(load_config(base / "no-such.toml"), Errc::MissingFile);
}

TEST_CASE("config validation") {
  AnalysisConfig c = load_config(kRun / "config.toml");
  CHECK_NOTHROW(validate(c));
  AnalysisConfig missing = c;
  missing.annotations.push_back(kRun / "nope.tsv");
  CHECK_ERRC(validate(missing), Errc::MissingFile);
  AnalysisConfig unknown = c;
  unknown.models = {"GPT"};
  CHECK_ERRC(validate(unknown), Errc::UnknownModel);
  AnalysisConfig twice = c;
  twice.models = {"reference", "Reference"};
  CHECK_ERRC(validate(twice), Errc::ConfigInvalid);
  AnalysisConfig no_bundle = c;
  no_bundle.models = {"SBERT"};
  no_bundle.bundles_dir = kRun / "absent";
  CHECK_ERRC(validate(no_bundle), Errc::MissingFile);
}

TEST_CASE("config hash ignores paths threads and cache") {
  const AnalysisConfig a = load_config(kRun / "config.toml");
  AnalysisConfig b = a;
  b.threads = 8;
  b.output_dir = "/elsewhere";
  b.cache_dir = "/cache";
  CHECK(a.hash() == b.hash());
  b.strategy = influence::similarity::AggregationStrategy::parse("best-match");
  CHECK(a.hash() != b.hash());
  AnalysisConfig d = a;
  d.lateral = false;
  CHECK(a.hash() != d.hash());
}

TEST_CASE("cache directory falls back to the environment") {
  const std::string toml = "schema_version = 1\n[corpus]\nmanifest = \"c.toml\"\nsplit = false\n";
  ::unsetenv("INFLUENCE_CACHE_DIR");
  CHECK_FALSE(parse_config(toml, kRun).cache_dir.has_value());
  ::setenv("INFLUENCE_CACHE_DIR", "/tmp/influence-cache", 1);
  CHECK(parse_config(toml, kRun).cache_dir == fs::path("/tmp/influence-cache"));
  CHECK(parse_config(toml + "[run]\ncache_dir = \"here\"\n", kRun).cache_dir == kRun / "here");
  ::unsetenv("INFLUENCE_CACHE_DIR");
}

TEST_CASE("stage names") {
  for (Stage s : {Stage::Preprocess, Stage::Embed, Stage::Score, Stage::Ensemble, Stage::Report}) {
    CHECK(parse_stage(stage_name(s)) == s);
  }
  CHECK_ERRC(parse_stage("train"), Errc::ConfigInvalid);
}

TEST_CASE("a full run equals the stages run one by one") {
  testing::TempDir a, b;
  const auto ca = fixture_config("config.toml", a.path());
  const auto cb = fixture_config("config.toml", b.path());
  run_all(ca);
  for (Stage s : {Stage::Preprocess, Stage::Embed, Stage::Score, Stage::Ensemble, Stage::Report}) run_stage(cb, s);
  const auto ta = tree(a.path(), {"run_meta.json"});
  const auto tb = tree(b.path(), {"run_meta.json"});
  CHECK(ta.size() > 15);
  REQUIRE(ta.size() == tb.size());
  for (const auto& [rel, body] : ta) CHECK_MESSAGE(tb.at(rel) == body, rel);
  const json run = json::parse(ta.at("run.json"));
  CHECK(run.at("stages").size() == 5);
  CHECK(ta.count("report/summary.md") == 1);
  CHECK(ta.count("report/scores_act_preamble.csv") == 1);
  CHECK(ta.count("report/scores_act_provisions.csv") == 1);
}

TEST_CASE("stages refuse to run without their inputs") {
  testing::TempDir d;
  const auto c = fixture_config("config.toml", d.path());
  for (Stage s : {Stage::Embed, Stage::Score, Stage::Ensemble, Stage::Report}) {
    try {
      run_stage(c, s);
      FAIL("stage ran without inputs");
    } catch (const influence::Error& e) {
      CHECK(e.code() == Errc::MissingUpstreamArtifact);
      CHECK(std::string(e.what()).find("[" + std::string(stage_name(s)) + "]") != std::string::npos);
    }
  }
  run_stage(c, Stage::Preprocess);
  CHECK_ERRC(run_stage(c, Stage::Score), Errc::MissingUpstreamArtifact);
  run_stage(c, Stage::Embed);
  fs::remove_all(d / "embed" / "reference");
  CHECK_ERRC(run_stage(c, Stage::Score), Errc::MissingUpstreamArtifact);
  run_stage(c, Stage::Embed);
  testing::spill(d / "score" / "scores.json", "{\"half\":");
  CHECK_ERRC(run_stage(c, Stage::Ensemble), Errc::MissingUpstreamArtifact);
}

TEST_CASE("results do not depend on the thread count") {
  std::vector<std::map<std::string, std::string>> runs;
  for (std::size_t threads : {1u, 2u, 8u}) {
    testing::TempDir d;
    run_all(fixture_config("config_bundles.toml", d.path(), threads));
    runs.push_back(tree(d / "report", {"run_meta.json"}));
  }
  REQUIRE(runs[0].size() >= 8);
  for (std::size_t r = 1; r < runs.size(); ++r) {
    REQUIRE(runs[r].size() == runs[0].size());
    for (const auto& [rel, body] : runs[0]) CHECK_MESSAGE(runs[r].at(rel) == body, rel);
  }
}

TEST_CASE("a warm cache gives identical embeddings") {
  testing::TempDir a, b, cache;
  auto ca = fixture_config("config_bundles.toml", a.path(), 2);
  ca.cache_dir = cache.path();
  auto cb = ca;
  cb.output_dir = b.path();
  run_all(ca);
  CHECK_FALSE(fs::is_empty(cache.path()));
  run_all(cb);
  const auto ta = tree(a.path(), {"run_meta.json"});
  const auto tb = tree(b.path(), {"run_meta.json"});
  for (const auto& [rel, body] : ta) CHECK_MESSAGE(tb.at(rel) == body, rel);
}

TEST_CASE("precedence") {
  MiniProject p;
  p.text("a.txt", "Ideas about duty and law.");
  p.text("b.txt", "Ideas about duty and rules.");
  p.corpus({{"a", "influencer", 2030, "a.txt"}, {"b", "influencee", 2000, "b.txt"}});
  const auto strict = p.config("pair-mean");
  CHECK_ERRC(run_stage(strict, Stage::Preprocess), Errc::PrecedenceViolation);
  const auto lenient = p.config("pair-mean", "strict_precedence = false\n");
  run_all(lenient);
  CHECK(testing::slurp(lenient.output_dir / "report" / "summary.md").find("Precondition warning") != std::string::npos);
}

TEST_CASE("two counted sentences give the exact cosine 8/9") {
  // term counts (2, 2, 1) against (1, 2, 2): dot 8, both norms 3
  MiniProject p;
  p.text("a.txt", "alpha alpha beta beta gamma.");
  p.text("b.txt", "alpha beta beta gamma gamma.");
  p.corpus({{"a", "influencer", 1900, "a.txt"}, {"b", "influencee", 2000, "b.txt"}});
  const auto c = p.config("pair-mean");
  run_all(c);
  const auto table = influence_scores(c);
  REQUIRE(table.targets().size() == 1);
  CHECK(table.get("reference", "a", table.targets()[0]) == 8.0 / 9.0 * 100.0);
  // one influencer: no vote, but a report all the same
  const std::string summary = testing::slurp(c.output_dir / "report" / "summary.md");
  CHECK(summary.find("no vote was held") != std::string::npos);
  const json ens = json::parse(testing::slurp(c.output_dir / "ensemble" / "ensemble.json"));
  CHECK(ens.at("influence").at("votes").empty());
  CHECK(ens.at("influence").at("pooled").at("vote").is_null());
  CHECK(ens.at("lateral").is_null());
}

TEST_CASE("centroids over several sentences keep the exact cosine") {
  MiniProject p;
  p.text("a.txt", "Alpha alpha beta. Beta gamma.");
  p.text("b.txt", "Alpha beta. Beta gamma gamma.");
  p.corpus({{"a", "influencer", 1900, "a.txt"}, {"b", "influencee", 2000, "b.txt"}});
  for (const char* strategy : {"centroid", "centroid-normalized"}) {
    CAPTURE(strategy);
    const auto c = p.config(strategy);
    run_all(c);
    const auto table = influence_scores(c);
    const double got = *table.get("reference", "a", table.targets()[0]);
    if (std::string(strategy) == "centroid") CHECK(got == 8.0 / 9.0 * 100.0);
    else CHECK(got > 0.0);
    fs::remove_all(c.output_dir);
  }
}

TEST_CASE("similarity matrices are written on request") {
  MiniProject p;
  p.text("a.txt", "Alpha beta. Gamma delta.");
  p.text("c.txt", "Beta gamma. Delta alpha. Epsilon.");
  p.text("b.txt", "Alpha gamma. Beta.");
  p.corpus({{"a", "influencer", 1900, "a.txt"}, {"c", "influencer", 1950, "c.txt"}, {"b", "influencee", 2000, "b.txt"}});
  AnalysisConfig m = parse_config(
      "schema_version = 1\n[corpus]\nmanifest = \"corpus.toml\"\nsplit = false\n[models]\nnames = [\"reference\"]\n"
      "[scoring]\nstrategy = \"best-match\"\nwrite_matrices = true\n[run]\noutput_dir = \"out\"\n",
      p.dir.path());
  run_all(m);
  std::size_t csvs = 0;
  for (const auto& e : fs::recursive_directory_iterator(m.output_dir / "score" / "matrices")) csvs += e.path().extension() == ".csv";
  CHECK(csvs == 3);  // a~b, c~b and the lateral pair
}
