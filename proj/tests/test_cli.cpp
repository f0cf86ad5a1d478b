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

#include <sys/wait.h>

#include <cstdlib>
#include <map>

#include <doctest.h>
#include <fmt/format.h>
#include <json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kRun = testing::fixtures() / "run";

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result cli(const std::string& args) {
  static testing::TempDir io;
  const fs::path out = io / "stdout";
  const fs::path err = io / "stderr";
  const std::string cmd = fmt::format("\"{}\" {} >\"{}\" 2>\"{}\"", INFLUENCE_CLI, args, out.string(), err.string());
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::slurp(out);
  r.err = testing::slurp(err);
  return r;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

// A copy of the run fixture that tests may edit.
struct Project {
  testing::TempDir dir;
  Project() {
    fs::copy(kRun, dir.path(), fs::copy_options::recursive);
    fs::remove_all(dir / "out");
  }
  fs::path config() const { return dir / "config.toml"; }
  void edit_config(const std::string& from, const std::string& to) {
    std::string s = testing::slurp(config());
    const auto at = s.find(from);
    REQUIRE(at != std::string::npos);
    s.replace(at, from.size(), to);
    testing::spill(config(), s);
  }
};

}  // namespace

TEST_CASE("a full run succeeds and writes the report") {
  Project p;
  const auto r = cli("--log-level off run -c " + quoted(p.config()));
  CHECK(r.code == 0);
  CHECK(r.err.empty());
  CHECK(fs::exists(p.dir / "out" / "report" / "summary.md"));
  CHECK(fs::exists(p.dir / "out" / "report" / "report.json"));
}

TEST_CASE("the output flag overrides the config") {
  Project p;
  testing::TempDir elsewhere;
  CHECK(cli("--log-level off run -c " + quoted(p.config()) + " -o " + quoted(elsewhere / "o") + " -j 2").code == 0);
  CHECK(fs::exists(elsewhere / "o" / "report" / "summary.md"));
  CHECK_FALSE(fs::exists(p.dir / "out"));
}

TEST_CASE("a missing annotation file is a user error naming the path") {
  Project p;
  p.edit_config("annotations.tsv", "gone.tsv");
  const auto r = cli("run -c " + quoted(p.config()));
  CHECK(r.code == 1);
  CHECK(r.err.find("gone.tsv") != std::string::npos);
  CHECK_FALSE(fs::exists(p.dir / "out"));
}

TEST_CASE("a precedence violation is a user error") {
  Project p;
  std::string corpus = testing::slurp(p.dir / "corpus.toml");
  const std::string from = "start_year = 1785\nend_year = 2021";
  const auto at = corpus.find(from);
  REQUIRE(at != std::string::npos);
  corpus.replace(at, from.size(), "start_year = 2025\nend_year = 2026");
  testing::spill(p.dir / "corpus.toml", corpus);
  const auto r = cli("run -c " + quoted(p.config()));
  CHECK(r.code == 1);
  CHECK(r.err.find("[preprocess]") != std::string::npos);

  p.edit_config("threads = 1", "threads = 1\nstrict_precedence = false");
  CHECK(cli("--log-level off run -c " + quoted(p.config())).code == 0);
}

TEST_CASE("stages run separately and fail without upstream artifacts") {
  Project p;
  const std::string c = " -c " + quoted(p.config());
  CHECK(cli("--log-level off preprocess" + c).code == 0);
  const auto early = cli("score" + c);
  CHECK(early.code == 1);
  CHECK(early.err.find("embed") != std::string::npos);
  for (const char* stage : {"embed", "score", "ensemble", "report"}) {
    CAPTURE(stage);
    CHECK(cli(fmt::format("--log-level off {}{}", stage, c)).code == 0);
  }
  const fs::path report = p.dir / "out" / "report";
  std::map<std::string, std::string> before;
  for (const auto& e : fs::directory_iterator(report)) before[e.path().filename().string()] = testing::slurp(e.path());
  CHECK(cli("--log-level off report" + c).code == 0);
  for (const auto& [name, body] : before) {
    if (name != "run_meta.json") CHECK_MESSAGE(testing::slurp(report / name) == body, name);
  }
}

TEST_CASE("model registry listing") {
  const auto table = cli("models list");
  CHECK(table.code == 0);
  std::size_t lines = 0;
  for (char ch : table.out) lines += ch == '\n';
  CHECK(lines == 7);  // header and six models
  CHECK(table.out.find("paraphrase-TinyBERT-L6-v2") != std::string::npos);

  const auto js = cli("models list --json");
  CHECK(js.code == 0);
  const auto j = nlohmann::json::parse(js.out);
  REQUIRE(j.size() == 6);
  CHECK(j[0].at("name") == "SBERT");
  CHECK(j[0].at("max_tokens") == 384);

  const auto sbert = cli("models list --json --family SBERT");
  CHECK(nlohmann::json::parse(sbert.out).size() == 1);
  CHECK(cli("models list --family GPT").code == 1);
}

TEST_CASE("usage errors") {
  CHECK(cli("").code == 1);
  CHECK(cli("train").code == 1);
  CHECK(cli("run").code == 1);  // --config is required
  CHECK(cli("run -c " + quoted(kRun / "nope.toml")).code == 1);
  CHECK(cli("run -c " + quoted(kRun / "config.toml") + " -j 0").code == 1);
  CHECK(cli("--help").code == 0);
}
