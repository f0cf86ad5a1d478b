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

#include "influence/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "influence/errors.hpp"
#include "influence/hash.hpp"

namespace influence::report {

namespace fs = std::filesystem;
using ensemble::ScoreTable;
using ensemble::StatsTable;

std::string format_2dp(double value) {
  if (!std::isfinite(value)) return fmt::format("{}", value);
  // 80 fractional digits is the exact expansion for every double that can
  // land near a rounding boundary.
  char buf[512];
  const auto res = std::to_chars(buf, buf + sizeof buf, std::fabs(value), std::chars_format::fixed, 80);
  const std::string_view exact(buf, static_cast<std::size_t>(res.ptr - buf));
  const std::size_t dot = exact.find('.');
  std::string digits = std::string(exact.substr(0, dot)) + std::string(exact.substr(dot + 1, 2));
  if (exact[dot + 3] >= '5') {
    std::size_t i = digits.size();
    while (i > 0) {
      --i;
      if (digits[i] == '9') {
        digits[i] = '0';
        continue;
      }
      ++digits[i];
      break;
    }
    if (digits.front() == '0' && std::all_of(digits.begin(), digits.end(), [](char c) { return c == '0'; })) {
      digits.insert(digits.begin(), '1');
    }
  }
  const bool zero = std::all_of(digits.begin(), digits.end(), [](char c) { return c == '0'; });
  std::string out = (value < 0 && !zero) ? "-" : "";
  out += digits.substr(0, digits.size() - 2);
  out += '.';
  out += digits.substr(digits.size() - 2);
  return out;
}

double round_2dp(double value) {
  const std::string s = format_2dp(value);
  double out = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), out);
  return out;
}

namespace {

std::string identifier_of(const AnalysisReport& report, std::string_view model) {
  for (const auto& m : report.models) {
    if (m.name == model) return m.identifier;
  }
  return "";
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string sanitize(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    out += ok ? c : '_';
  }
  return out;
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, fmt::format("cannot write {}", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(Errc::IoFailure, fmt::format("short write to {}", path.string()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

std::string csv_name(std::string_view target) { return fmt::format("scores_{}.csv", sanitize(target)); }
std::string svg_name(std::string_view target) { return fmt::format("radar_{}.svg", sanitize(target)); }

std::string target_csv(const AnalysisReport& report, const ScoreTable& table, std::string_view target) {
  const StatsTable stats = ensemble::compute_stats(table);
  std::string out = "model,identifier";
  for (const auto& inf : table.influencers()) out += "," + csv_field(inf);
  out += '\n';
  for (const auto& model : table.models()) {
    out += csv_field(model) + "," + csv_field(identifier_of(report, model));
    for (const auto& inf : table.influencers()) out += "," + format_2dp(table.at(model, inf, target));
    out += '\n';
  }
  const std::pair<const char*, double ensemble::AggregateStats::*> rows[] = {
      {"Average", &ensemble::AggregateStats::average},
      {"Maximum", &ensemble::AggregateStats::maximum},
      {"Minimum", &ensemble::AggregateStats::minimum},
      {"Range", &ensemble::AggregateStats::range},
  };
  for (const auto& [label, field] : rows) {
    out += label;
    out += ',';
    for (const auto& inf : table.influencers()) out += "," + format_2dp(stats.at(inf, target).*field);
    out += '\n';
  }
  return out;
}

namespace {

nlohmann::json table_block(const ScoreTable& table) {
  const StatsTable stats = ensemble::compute_stats(table);
  nlohmann::json votes = nlohmann::json::array();
  nlohmann::json rankings = nlohmann::json::object();
  const bool voting = table.influencers().size() >= 2;
  for (const auto& t : table.targets()) {
    if (voting) votes.push_back(ensemble::to_json(ensemble::vote(table, t)));
    rankings[t] = ensemble::rank_influencers(stats, t);
  }
  nlohmann::json j = {{"scores", ensemble::to_json(table)},
                      {"stats", ensemble::to_json(stats)},
                      {"votes", std::move(votes)},
                      {"rankings", std::move(rankings)}};
  if (table.targets().size() > 1) {
    j["pooled"] = {{"vote", voting ? ensemble::to_json(ensemble::pooled_vote(table)) : nlohmann::json(nullptr)},
                   {"ranking", ensemble::pooled_ranking(stats)}};
  }
  return j;
}

}  // namespace

nlohmann::json to_json(const AnalysisReport& report, const std::vector<std::pair<std::string, std::string>>& artifacts) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : report.models) models.push_back({{"name", m.name}, {"identifier", m.identifier}});
  nlohmann::json precedence = nlohmann::json::array();
  for (const auto& p : report.precedence) {
    precedence.push_back({{"influencer", p.influencer},
                          {"influencee", p.influencee},
                          {"influencer_dates", {p.influencer_dates.start_year, p.influencer_dates.end_year}},
                          {"influencee_dates", {p.influencee_dates.start_year, p.influencee_dates.end_year}},
                          {"precedes", p.relation.precedes},
                          {"overlaps", p.relation.overlaps},
                          {"valid_for_influence", p.relation.valid_for_influence}});
  }
  nlohmann::json prep = nlohmann::json::array();
  for (const auto& r : report.preprocessing) prep.push_back(preprocess::to_json(r));
  nlohmann::json files = nlohmann::json::array();
  for (const auto& [name, digest] : artifacts) files.push_back({{"file", name}, {"sha256", digest}});

  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"run", {{"config_hash", report.config_hash},
                               {"models", std::move(models)},
                               {"strategy", report.strategy},
                               {"pooling", report.pooling}}},
                      {"influence", table_block(report.scores)},
                      {"precedence", std::move(precedence)},
                      {"preprocessing", std::move(prep)},
                      {"caveats", report.caveats},
                      {"artifacts", std::move(files)}};
  j["lateral"] = report.lateral ? table_block(*report.lateral) : nlohmann::json(nullptr);
  return j;
}

AnalysisReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw Error(Errc::ConfigInvalid, fmt::format("unsupported report schema {}", j.at("schema_version").dump()));
    }
    AnalysisReport r;
    const auto& run = j.at("run");
    r.config_hash = run.at("config_hash").get<std::string>();
    for (const auto& m : run.at("models")) r.models.push_back({m.at("name").get<std::string>(), m.at("identifier").get<std::string>()});
    r.strategy = run.at("strategy").get<std::string>();
    r.pooling = run.at("pooling").get<std::string>();
    r.scores = ensemble::score_table_from_json(j.at("influence").at("scores"));
    if (!j.at("lateral").is_null()) r.lateral = ensemble::score_table_from_json(j.at("lateral").at("scores"));
    for (const auto& p : j.at("precedence")) {
      PrecedenceEntry e;
      e.influencer = p.at("influencer").get<std::string>();
      e.influencee = p.at("influencee").get<std::string>();
      e.influencer_dates = {p.at("influencer_dates").at(0).get<int>(), p.at("influencer_dates").at(1).get<int>()};
      e.influencee_dates = {p.at("influencee_dates").at(0).get<int>(), p.at("influencee_dates").at(1).get<int>()};
      e.relation = {p.at("precedes").get<bool>(), p.at("overlaps").get<bool>(), p.at("valid_for_influence").get<bool>()};
      r.precedence.push_back(std::move(e));
    }
    for (const auto& p : j.at("preprocessing")) r.preprocessing.push_back(preprocess::report_from_json(p));
    r.caveats = j.at("caveats").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, fmt::format("malformed report: {}", e.what()));
  }
}

RadarChartSpec radar_for(const ScoreTable& table, std::string_view target, std::string title) {
  RadarChartSpec spec;
  spec.title = std::move(title);
  spec.axes = table.influencers();
  for (const auto& model : table.models()) {
    RadarSeries s{model, {}};
    for (const auto& inf : table.influencers()) s.values.push_back(table.at(model, inf, target));
    spec.series.push_back(std::move(s));
  }
  return spec;
}

double radial_max(const RadarChartSpec& spec) {
  double top = 0.0;
  for (const auto& s : spec.series)
    for (double v : s.values) top = std::max(top, v);
  if (top <= 0.0) return 10.0;
  return std::ceil(top / 10.0) * 10.0;
}

namespace {

struct SeriesStyle {
  const char* color;
  const char* dash;
};

constexpr SeriesStyle kStyles[] = {
    {"#1f77b4", ""},    {"#ff7f0e", "2,3"}, {"#2ca02c", ""},    {"#d62728", "6,4"},
    {"#9467bd", "6,4"}, {"#8c564b", "2,3"}, {"#e377c2", ""},    {"#7f7f7f", "6,4"},
};

std::string num(double v) {
  double r = std::round(v * 100.0) / 100.0;
  if (r == 0.0) r = 0.0;
  return fmt::format("{:.2f}", r);
}

}  // namespace

std::string render_radar_svg(const RadarChartSpec& spec) {
  const std::size_t n = spec.axes.size();
  if (n < 3) throw Error(Errc::TooFewAxes, fmt::format("radar chart needs at least 3 axes, got {}", n));
  for (const auto& s : spec.series) {
    if (s.values.size() != n) {
      throw Error(Errc::DimensionMismatch, fmt::format("series '{}' has {} values for {} axes", s.name, s.values.size(), n));
    }
  }
  constexpr double width = 760.0;
  constexpr double height = 600.0;
  constexpr double cx = 320.0;
  constexpr double cy = 320.0;
  constexpr double radius = 220.0;
  const double top = radial_max(spec);

  auto point = [&](std::size_t axis, double r) {
    const double theta = -std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * static_cast<double>(axis) / static_cast<double>(n);
    return std::pair{cx + r * std::cos(theta), cy + r * std::sin(theta)};
  };

  std::string out;
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      num(width), num(height), num(width), num(height));
  out += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n", num(width), num(height));
  out += fmt::format("<text x=\"{}\" y=\"30.00\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n", num(cx),
                     xml_escape(spec.title));

  out += "<g class=\"grid\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\">\n";
  const int rings = static_cast<int>(top / 10.0);
  for (int k = 1; k <= rings; ++k) {
    const double r = radius * (10.0 * k) / top;
    std::string pts;
    for (std::size_t a = 0; a <= n; ++a) {
      const auto [x, y] = point(a % n, r);
      pts += fmt::format("{}{},{}", a ? " " : "", num(x), num(y));
    }
    out += fmt::format("<polygon points=\"{}\"/>\n", pts);
  }
  for (std::size_t a = 0; a < n; ++a) {
    const auto [x, y] = point(a, radius);
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>\n", num(cx), num(cy), num(x), num(y));
  }
  out += "</g>\n";

  out += "<g class=\"scale\" fill=\"#666666\" font-size=\"10\">\n";
  for (int k = 1; k <= rings; ++k) {
    const double r = radius * (10.0 * k) / top;
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}%</text>\n", num(cx + 4.0), num(cy - r - 2.0), 10 * k);
  }
  out += "</g>\n";

  out += "<g class=\"axes\">\n";
  for (std::size_t a = 0; a < n; ++a) {
    const auto [x, y] = point(a, radius + 18.0);
    const char* anchor = std::fabs(x - cx) < 1.0 ? "middle" : (x > cx ? "start" : "end");
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"{}\">{}</text>\n", num(x), num(y + 4.0), anchor,
                       xml_escape(spec.axes[a]));
  }
  out += "</g>\n";

  out += "<g class=\"series\" fill=\"none\" stroke-width=\"2\">\n";
  for (std::size_t s = 0; s < spec.series.size(); ++s) {
    const auto& style = kStyles[s % std::size(kStyles)];
    std::string pts;
    for (std::size_t a = 0; a <= n; ++a) {
      const double v = std::clamp(spec.series[s].values[a % n], 0.0, top);
      const auto [x, y] = point(a % n, radius * v / top);
      pts += fmt::format("{}{},{}", a ? " " : "", num(x), num(y));
    }
    out += fmt::format("<polyline points=\"{}\" stroke=\"{}\"{}><title>{}</title></polyline>\n", pts, style.color,
                       *style.dash ? fmt::format(" stroke-dasharray=\"{}\"", style.dash) : "",
                       xml_escape(spec.series[s].name));
  }
  out += "</g>\n";

  out += "<g class=\"legend\">\n";
  for (std::size_t s = 0; s < spec.series.size(); ++s) {
    const auto& style = kStyles[s % std::size(kStyles)];
    const double y = 80.0 + 22.0 * static_cast<double>(s);
    out += fmt::format("<line x1=\"600.00\" y1=\"{}\" x2=\"630.00\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"{}/>\n",
                       num(y), num(y), style.color,
                       *style.dash ? fmt::format(" stroke-dasharray=\"{}\"", style.dash) : "");
    out += fmt::format("<text x=\"638.00\" y=\"{}\">{}</text>\n", num(y + 4.0), xml_escape(spec.series[s].name));
  }
  out += "</g>\n</svg>\n";
  return out;
}

namespace {

std::string dates(const corpus::DateRange& d) { return fmt::format("{} to {}", d.start_year, d.end_year); }

double mean_of_averages(const StatsTable& stats) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < stats.targets().size(); ++t)
    for (std::size_t i = 0; i < stats.influencers().size(); ++i, ++n) sum += stats.at(i, t).average;
  return n ? sum / static_cast<double>(n) : 0.0;
}

std::string tally_text(const ensemble::VoteResult& v) {
  std::vector<std::string> parts;
  for (const auto& [name, n] : v.tally) parts.push_back(fmt::format("{} {}", name, n));
  return join(parts, ", ");
}

}  // namespace

std::string render_summary(const AnalysisReport& report) {
  const ScoreTable& table = report.scores;
  const StatsTable stats = ensemble::compute_stats(table);
  std::string out = "# Influence analysis summary\n\n";

  for (const auto& p : report.precedence) {
    if (p.relation.valid_for_influence) continue;
    out += fmt::format(
        "> **Precondition warning:** `{}` ({}) starts after `{}` ({}) and the two periods do not overlap. "
        "Temporal precedence does not hold, so its scores cannot be read as influence.\n\n",
        p.influencer, dates(p.influencer_dates), p.influencee, dates(p.influencee_dates));
  }

  std::vector<std::string> model_names;
  for (const auto& m : report.models) model_names.push_back(m.identifier.empty() ? m.name : fmt::format("{} ({})", m.name, m.identifier));
  out += fmt::format("- Aggregation strategy: {}\n", report.strategy);
  out += fmt::format("- Pooling: {}\n", report.pooling);
  out += fmt::format("- Models: {}\n", join(model_names, ", "));
  out += fmt::format("- Config hash: `{}`\n\n", report.config_hash);

  out += "## Winners per target\n\n";
  out += "| Target | Winner by vote | Tally | Dissenting models | Tie break | Ranking by average |\n";
  out += "|---|---|---|---|---|---|\n";
  const bool voting = table.influencers().size() >= 2;
  for (const auto& t : table.targets()) {
    if (!voting) {
      out += fmt::format("| {} | n/a | n/a | n/a | n/a | {} |\n", t, join(ensemble::rank_influencers(stats, t), " > "));
      continue;
    }
    const auto v = ensemble::vote(table, t);
    const auto dissent = v.dissenters();
    out += fmt::format("| {} | {} | {} | {} | {} | {} |\n", t, v.winner, tally_text(v),
                       dissent.empty() ? "none" : join(dissent, ", "), ensemble::tie_break_name(v.tie_broken_by),
                       join(ensemble::rank_influencers(stats, t), " > "));
  }
  out += '\n';
  if (!voting) out += "Only one influencer was scored, so no vote was held.\n\n";

  out += "## Average scores (%)\n\n| Influencer |";
  for (const auto& t : table.targets()) out += fmt::format(" {} |", t);
  out += "\n|---|";
  for (std::size_t k = 0; k < table.targets().size(); ++k) out += "---|";
  out += '\n';
  for (const auto& inf : table.influencers()) {
    out += fmt::format("| {} |", inf);
    for (const auto& t : table.targets()) out += fmt::format(" {} |", format_2dp(stats.at(inf, t).average));
    out += '\n';
  }
  out += '\n';

  out += "## Overall\n\n";
  const auto ranking = ensemble::pooled_ranking(stats);
  if (!voting) {
    out += fmt::format("Pooled ranking by average: {}.\n\n", join(ranking, " > "));
  } else {
    const auto pooled = ensemble::pooled_vote(table);
    out += fmt::format("Pooled vote over every model and target: {} ({}).\n", pooled.winner, tally_text(pooled));
    out += fmt::format("Pooled ranking by average: {}.\n", join(ranking, " > "));
    if (pooled.winner == ranking.front()) {
      out += fmt::format("Overall winner by vote and by average: **{}**.\n\n", pooled.winner);
    } else {
      out += fmt::format("The vote favours **{}** while the averages favour **{}**.\n\n", pooled.winner, ranking.front());
    }
  }

  if (report.lateral) {
    const StatsTable lat = ensemble::compute_stats(*report.lateral);
    out += "## Lateral similarity between influencers\n\n| Pair | Average | Maximum | Minimum | Range |\n|---|---|---|---|---|\n";
    for (const auto& pair : lat.influencers()) {
      const auto& s = lat.at(pair, ensemble::kLateralTarget);
      out += fmt::format("| {} | {} | {} | {} | {} |\n", pair, format_2dp(s.average), format_2dp(s.maximum),
                         format_2dp(s.minimum), format_2dp(s.range));
    }
    const double lateral_mean = mean_of_averages(lat);
    const double influence_mean = mean_of_averages(stats);
    out += fmt::format("\nMean lateral average {} vs mean influence average {}: lateral scores {} influence scores. "
                       "Lateral scores are reported separately and never folded into influence scores.\n\n",
                       format_2dp(lateral_mean), format_2dp(influence_mean),
                       lateral_mean > influence_mean ? "exceed" : "do not exceed");
  }

  if (!report.precedence.empty()) {
    out += "## Precedence\n\n| Influencer | Dates | Influencee | Dates | Valid |\n|---|---|---|---|---|\n";
    for (const auto& p : report.precedence) {
      out += fmt::format("| {} | {} | {} | {} | {} |\n", p.influencer, dates(p.influencer_dates), p.influencee,
                         dates(p.influencee_dates), p.relation.valid_for_influence ? "yes" : "**no**");
    }
    out += '\n';
  }

  std::vector<std::string> caveats = report.caveats;
  for (std::size_t m = 0; m < table.models().size(); ++m)
    for (std::size_t i = 0; i < table.influencers().size(); ++i)
      for (std::size_t t = 0; t < table.targets().size(); ++t) {
        if (table.at(m, i, t) < 0.0) {
          caveats.push_back(fmt::format("negative score {} for {} / {} / {}", format_2dp(table.at(m, i, t)),
                                        table.models()[m], table.influencers()[i], table.targets()[t]));
        }
      }
  out += "## Caveats\n\n";
  if (caveats.empty()) out += "None.\n";
  for (const auto& c : caveats) out += fmt::format("- {}\n", c);
  return out;
}

fs::path emit_radar_svg(const RadarChartSpec& spec, const fs::path& file) {
  const std::string svg = render_radar_svg(spec);
  if (file.has_parent_path()) ensure_dir(file.parent_path());
  write_file(file, svg);
  return file;
}

fs::path emit_summary(const AnalysisReport& report, const fs::path& dir) {
  const std::string md = render_summary(report);
  ensure_dir(dir);
  const fs::path path = dir / kSummaryName;
  write_file(path, md);
  return path;
}

std::vector<std::string> emit_tables(const AnalysisReport& report, const fs::path& dir,
                                     std::vector<std::pair<std::string, std::string>> artifacts) {
  report.scores.require_complete();
  if (report.lateral) report.lateral->require_complete();

  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& t : report.scores.targets()) files.emplace_back(csv_name(t), target_csv(report, report.scores, t));
  if (report.lateral) {
    files.emplace_back(std::string(kLateralCsvName), target_csv(report, *report.lateral, ensemble::kLateralTarget));
  }
  for (const auto& [name, content] : files) artifacts.emplace_back(name, sha256_hex(content));
  std::sort(artifacts.begin(), artifacts.end());
  const std::string json = to_json(report, artifacts).dump(2) + "\n";

  ensure_dir(dir);
  std::vector<std::string> written;
  for (const auto& [name, content] : files) {
    write_file(dir / name, content);
    written.push_back(name);
  }
  write_file(dir / kJsonName, json);
  written.emplace_back(kJsonName);
  return written;
}

std::vector<std::string> emit_report(const AnalysisReport& report, const fs::path& dir) {
  report.scores.require_complete();
  if (report.lateral) report.lateral->require_complete();

  std::vector<std::pair<std::string, std::string>> extra;
  std::vector<std::string> written;
  ensure_dir(dir);
  auto add = [&](const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    extra.emplace_back(name, sha256_hex(content));
    written.push_back(name);
  };
  if (report.scores.influencers().size() >= 3) {
    for (const auto& t : report.scores.targets()) {
      add(svg_name(t), render_radar_svg(radar_for(report.scores, t, fmt::format("Influence on {}", t))));
    }
  }
  if (report.lateral && report.lateral->influencers().size() >= 3) {
    add(std::string(kLateralSvgName),
        render_radar_svg(radar_for(*report.lateral, ensemble::kLateralTarget, "Similarity between influencers")));
  }
  add(std::string(kSummaryName), render_summary(report));
  for (auto& name : emit_tables(report, dir, extra)) written.push_back(std::move(name));

  const nlohmann::json meta = {{"started_at", report.started_at}, {"finished_at", report.finished_at}};
  write_file(dir / kRunMetaName, meta.dump(2) + "\n");
  written.emplace_back(kRunMetaName);
  return written;
}

}  // namespace influence::report
