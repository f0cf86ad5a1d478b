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

// Command-line entry point: full runs, single stages and the model registry.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "influence/embed.hpp"
#include "influence/errors.hpp"
#include "influence/pipeline.hpp"

namespace {

using influence::Errc;
using influence::Error;
namespace pipeline = influence::pipeline;
namespace embed = influence::embed;

constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kRuntimeError = 2;

struct RunFlags {
  std::string config;
  std::string out;
  std::string cache;
  std::size_t threads = 0;  // 0 keeps the config value
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("-c,--config", f.config, "Run configuration (TOML)")->required();
  cmd->add_option("-o,--out", f.out, "Run directory; overrides [run].output_dir");
  cmd->add_option("--cache", f.cache, "Embedding cache directory; overrides [run].cache_dir and $INFLUENCE_CACHE_DIR");
  cmd->add_option("-j,--threads", f.threads, "Worker threads; 1 runs fully serially")->check(CLI::PositiveNumber);
}

pipeline::AnalysisConfig configure(const RunFlags& f) {
  pipeline::AnalysisConfig c = pipeline::load_config(f.config);
  if (!f.out.empty()) c.output_dir = f.out;
  if (!f.cache.empty()) c.cache_dir = std::filesystem::path(f.cache);
  if (f.threads > 0) c.threads = f.threads;
  pipeline::validate(c);
  return c;
}

int list_models(bool as_json, const std::string& family) {
  std::optional<embed::Family> filter;
  if (!family.empty()) {
    filter = embed::parse_family(family);
    if (!filter) throw Error(Errc::UnknownModel, fmt::format("unknown model family '{}'", family));
  }
  const auto rows = embed::filter_registry(filter);
  if (as_json) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& m : rows) {
      out.push_back({{"name", m.name},
                     {"identifier", m.identifier},
                     {"family", std::string(embed::family_name(m.family))},
                     {"pooling", std::string(embed::pooling_name(m.pooling))},
                     {"max_tokens", m.max_tokens},
                     {"dims", m.dims}});
    }
    std::cout << out.dump(2) << "\n";
    return kOk;
  }
  std::cout << fmt::format("{:<11} {:<38} {:<11} {:<8} {:>10} {:>5}\n", "NAME", "IDENTIFIER", "FAMILY", "POOLING",
                           "MAX_TOKENS", "DIMS");
  for (const auto& m : rows) {
    std::cout << fmt::format("{:<11} {:<38} {:<11} {:<8} {:>10} {:>5}\n", m.name, m.identifier,
                             embed::family_name(m.family), embed::pooling_name(m.pooling), m.max_tokens, m.dims);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure how strongly influencer documents shape an influencee document, using an ensemble of "
               "sentence encoders."};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  RunFlags flags;
  CLI::App* run = app.add_subcommand("run", "Run every stage in order");
  add_run_flags(run, flags);

  const std::pair<const char*, const char*> stages[] = {
      {"preprocess", "Load the corpus, split the influencee and clean influencer texts"},
      {"embed", "Embed every sentence with each selected model"},
      {"score", "Aggregate sentence similarities into document scores"},
      {"ensemble", "Compute statistics, votes and rankings"},
      {"report", "Write tables, charts, summary and report.json"},
  };
  std::vector<std::pair<CLI::App*, pipeline::Stage>> stage_cmds;
  for (const auto& [name, help] : stages) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_run_flags(cmd, flags);
    stage_cmds.emplace_back(cmd, pipeline::parse_stage(name));
  }

  CLI::App* models = app.add_subcommand("models", "Inspect the model registry");
  models->require_subcommand(1);
  bool as_json = false;
  std::string family;
  CLI::App* list = models->add_subcommand("list", "Print the registry");
  list->add_flag("--json", as_json, "Machine-readable output");
  list->add_option("--family", family, "Only models of this family (SBERT, ALBERT, DistilBERT, RoBERTa, TinyBERT, Reference)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUserError;
  }

  auto logger = spdlog::stderr_color_st("influence");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*list) return list_models(as_json, family);
    const pipeline::AnalysisConfig config = configure(flags);
    if (*run) {
      pipeline::run_all(config);
      spdlog::info("report written to {}", (config.output_dir / "report").string());
      return kOk;
    }
    for (const auto& [cmd, stage] : stage_cmds) {
      if (*cmd) {
        pipeline::run_stage(config, stage);
        return kOk;
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return influence::is_user_error(e.code()) ? kUserError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kRuntimeError;
}
