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

#include "influence/ensemble.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "influence/errors.hpp"

namespace influence::ensemble {

namespace {

std::size_t index_in(const std::vector<std::string>& axis, std::string_view key, std::string_view what) {
  const auto it = std::find(axis.begin(), axis.end(), key);
  if (it == axis.end()) throw Error(Errc::IncompleteGrid, fmt::format("unknown {} '{}'", what, key));
  return static_cast<std::size_t>(it - axis.begin());
}

void check_unique(const std::vector<std::string>& axis, std::string_view what) {
  std::vector<std::string> sorted = axis;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(Errc::DuplicateId, fmt::format("repeated {} in score table", what));
  }
}

}  // namespace

ScoreTable::ScoreTable(std::vector<std::string> models, std::vector<std::string> influencers,
                       std::vector<std::string> targets)
    : models_(std::move(models)), influencers_(std::move(influencers)), targets_(std::move(targets)) {
  check_unique(models_, "model");
  check_unique(influencers_, "influencer");
  check_unique(targets_, "target");
  cells_.assign(models_.size() * influencers_.size() * targets_.size(), std::nullopt);
}

std::size_t ScoreTable::cell(std::size_t m, std::size_t i, std::size_t t) const {
  return (m * influencers_.size() + i) * targets_.size() + t;
}

std::size_t ScoreTable::model_index(std::string_view model) const { return index_in(models_, model, "model"); }
std::size_t ScoreTable::influencer_index(std::string_view influencer) const {
  return index_in(influencers_, influencer, "influencer");
}
std::size_t ScoreTable::target_index(std::string_view target) const { return index_in(targets_, target, "target"); }

void ScoreTable::set(std::string_view model, std::string_view influencer, std::string_view target, double percent) {
  cells_[cell(model_index(model), influencer_index(influencer), target_index(target))] = percent;
}

std::optional<double> ScoreTable::get(std::string_view model, std::string_view influencer,
                                      std::string_view target) const {
  return cells_[cell(model_index(model), influencer_index(influencer), target_index(target))];
}

double ScoreTable::at(std::size_t m, std::size_t i, std::size_t t) const {
  const auto& v = cells_[cell(m, i, t)];
  if (!v) {
    throw Error(Errc::IncompleteGrid,
                fmt::format("no score for model '{}', influencer '{}', target '{}'", models_[m], influencers_[i], targets_[t]));
  }
  return *v;
}

double ScoreTable::at(std::string_view model, std::string_view influencer, std::string_view target) const {
  return at(model_index(model), influencer_index(influencer), target_index(target));
}

bool ScoreTable::complete() const {
  return !cells_.empty() && std::all_of(cells_.begin(), cells_.end(), [](const auto& c) { return c.has_value(); });
}

void ScoreTable::require_complete() const {
  if (cells_.empty()) throw Error(Errc::IncompleteGrid, "score table has an empty axis");
  for (std::size_t m = 0; m < models_.size(); ++m)
    for (std::size_t i = 0; i < influencers_.size(); ++i)
      for (std::size_t t = 0; t < targets_.size(); ++t) at(m, i, t);
}

StatsTable::StatsTable(std::vector<std::string> influencers, std::vector<std::string> targets)
    : influencers_(std::move(influencers)), targets_(std::move(targets)), cells_(influencers_.size() * targets_.size()) {}

const AggregateStats& StatsTable::at(std::string_view influencer, std::string_view target) const {
  return cells_[index_in(targets_, target, "target") * influencers_.size() +
                index_in(influencers_, influencer, "influencer")];
}

AggregateStats& StatsTable::at(std::string_view influencer, std::string_view target) {
  return cells_[index_in(targets_, target, "target") * influencers_.size() +
                index_in(influencers_, influencer, "influencer")];
}

AggregateStats compute_stats(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::IncompleteGrid, "statistics over no models");
  AggregateStats s;
  double sum = 0.0;
  s.maximum = values.front();
  s.minimum = values.front();
  for (double v : values) {
    sum += v;
    s.maximum = std::max(s.maximum, v);
    s.minimum = std::min(s.minimum, v);
  }
  s.average = sum / static_cast<double>(values.size());
  s.range = s.maximum - s.minimum;
  return s;
}

StatsTable compute_stats(const ScoreTable& table) {
  table.require_complete();
  StatsTable stats(table.influencers(), table.targets());
  std::vector<double> column(table.models().size());
  for (std::size_t t = 0; t < table.targets().size(); ++t) {
    for (std::size_t i = 0; i < table.influencers().size(); ++i) {
      for (std::size_t m = 0; m < column.size(); ++m) column[m] = table.at(m, i, t);
      stats.at(table.influencers()[i], table.targets()[t]) = compute_stats(column);
    }
  }
  return stats;
}

std::string_view tie_break_name(TieBreak t) {
  switch (t) {
    case TieBreak::None: return "none";
    case TieBreak::Average: return "average";
    case TieBreak::InputOrder: return "input-order";
  }
  return "none";
}

std::size_t VoteResult::votes_for(std::string_view influencer) const {
  for (const auto& [name, n] : tally) {
    if (name == influencer) return n;
  }
  return 0;
}

std::vector<std::string> VoteResult::dissenters() const {
  std::vector<std::string> out;
  for (const auto& [voter, choice] : ballots) {
    if (choice != winner) out.push_back(voter);
  }
  return out;
}

namespace {

struct Ballot {
  std::string voter;
  std::size_t choice;
  bool tied;
};

Ballot cast(const ScoreTable& table, std::size_t m, std::size_t t, std::string voter) {
  std::size_t best = 0;
  double best_score = table.at(m, 0, t);
  bool tied = false;
  for (std::size_t i = 1; i < table.influencers().size(); ++i) {
    const double s = table.at(m, i, t);
    if (s > best_score) {
      best = i;
      best_score = s;
      tied = false;
    } else if (s == best_score) {
      tied = true;
    }
  }
  return {std::move(voter), best, tied};
}

VoteResult settle(const ScoreTable& table, std::string target, const std::vector<Ballot>& ballots,
                  const std::vector<double>& averages) {
  const auto& names = table.influencers();
  VoteResult r;
  r.target = std::move(target);
  std::vector<std::size_t> counts(names.size(), 0);
  for (const auto& b : ballots) {
    ++counts[b.choice];
    r.ballots.emplace_back(b.voter, names[b.choice]);
    if (b.tied) r.tie_broken_by = TieBreak::InputOrder;
  }
  for (std::size_t i = 0; i < names.size(); ++i) r.tally.emplace_back(names[i], counts[i]);

  const std::size_t top = *std::max_element(counts.begin(), counts.end());
  std::vector<std::size_t> leaders;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (counts[i] == top) leaders.push_back(i);
  }
  std::size_t winner = leaders.front();
  if (leaders.size() > 1) {
    double best_avg = averages[winner];
    bool still_tied = false;
    for (std::size_t k = 1; k < leaders.size(); ++k) {
      const double a = averages[leaders[k]];
      if (a > best_avg) {
        winner = leaders[k];
        best_avg = a;
        still_tied = false;
      } else if (a == best_avg) {
        still_tied = true;
      }
    }
    const TieBreak used = still_tied ? TieBreak::InputOrder : TieBreak::Average;
    r.tie_broken_by = std::max(r.tie_broken_by, used);
  }
  r.winner = names[winner];
  return r;
}

}  // namespace

namespace {

void require_candidates(const ScoreTable& table) {
  if (table.influencers().size() < 2) {
    throw Error(Errc::IncompleteGrid, fmt::format("a vote needs at least two influencers, got {}", table.influencers().size()));
  }
}

}  // namespace

VoteResult vote(const ScoreTable& table, std::string_view target) {
  require_candidates(table);
  const StatsTable stats = compute_stats(table);
  const std::size_t t = table.target_index(target);
  std::vector<Ballot> ballots;
  for (std::size_t m = 0; m < table.models().size(); ++m) ballots.push_back(cast(table, m, t, table.models()[m]));
  std::vector<double> averages;
  for (std::size_t i = 0; i < table.influencers().size(); ++i) averages.push_back(stats.at(i, t).average);
  return settle(table, std::string(target), ballots, averages);
}

VoteResult pooled_vote(const ScoreTable& table) {
  require_candidates(table);
  const StatsTable stats = compute_stats(table);
  std::vector<Ballot> ballots;
  for (std::size_t t = 0; t < table.targets().size(); ++t) {
    for (std::size_t m = 0; m < table.models().size(); ++m) {
      ballots.push_back(cast(table, m, t, fmt::format("{}@{}", table.models()[m], table.targets()[t])));
    }
  }
  std::vector<double> averages;
  for (std::size_t i = 0; i < table.influencers().size(); ++i) {
    double sum = 0.0;
    for (std::size_t t = 0; t < table.targets().size(); ++t) sum += stats.at(i, t).average;
    averages.push_back(sum / static_cast<double>(table.targets().size()));
  }
  return settle(table, "", ballots, averages);
}

namespace {

std::vector<std::string> rank_by(const std::vector<std::string>& names, const std::vector<double>& keys) {
  std::vector<std::size_t> order(names.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
  std::vector<std::string> out;
  for (std::size_t i : order) out.push_back(names[i]);
  return out;
}

}  // namespace

std::vector<std::string> rank_influencers(const StatsTable& stats, std::string_view target) {
  std::vector<double> keys;
  for (const auto& name : stats.influencers()) keys.push_back(stats.at(name, target).average);
  return rank_by(stats.influencers(), keys);
}

std::vector<std::string> pooled_ranking(const StatsTable& stats) {
  std::vector<double> keys;
  for (std::size_t i = 0; i < stats.influencers().size(); ++i) {
    double sum = 0.0;
    for (std::size_t t = 0; t < stats.targets().size(); ++t) sum += stats.at(i, t).average;
    keys.push_back(sum / static_cast<double>(stats.targets().size()));
  }
  return rank_by(stats.influencers(), keys);
}

std::string pair_id(std::string_view a, std::string_view b) { return fmt::format("{}~{}", a, b); }

std::vector<std::pair<std::string, std::string>> influencer_pairs(const std::vector<std::string>& influencers) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < influencers.size(); ++i)
    for (std::size_t j = i + 1; j < influencers.size(); ++j) out.emplace_back(influencers[i], influencers[j]);
  return out;
}

ScoreTable lateral_table(const std::vector<std::string>& models, const std::vector<std::string>& influencers) {
  if (influencers.size() < 2) throw Error(Errc::IncompleteGrid, "lateral scores need at least two influencers");
  std::vector<std::string> ids;
  for (const auto& [a, b] : influencer_pairs(influencers)) ids.push_back(pair_id(a, b));
  return ScoreTable(models, std::move(ids), {std::string(kLateralTarget)});
}

nlohmann::json to_json(const ScoreTable& table) {
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t m = 0; m < table.models().size(); ++m) {
    for (std::size_t i = 0; i < table.influencers().size(); ++i) {
      for (std::size_t t = 0; t < table.targets().size(); ++t) {
        const auto v = table.get(table.models()[m], table.influencers()[i], table.targets()[t]);
        if (!v) continue;
        cells.push_back({{"model", table.models()[m]},
                         {"influencer", table.influencers()[i]},
                         {"target", table.targets()[t]},
                         {"percent", *v}});
      }
    }
  }
  return {{"models", table.models()},
          {"influencers", table.influencers()},
          {"targets", table.targets()},
          {"cells", std::move(cells)}};
}

ScoreTable score_table_from_json(const nlohmann::json& j) {
  try {
    ScoreTable table(j.at("models").get<std::vector<std::string>>(), j.at("influencers").get<std::vector<std::string>>(),
                     j.at("targets").get<std::vector<std::string>>());
    for (const auto& c : j.at("cells")) {
      table.set(c.at("model").get<std::string>(), c.at("influencer").get<std::string>(),
                c.at("target").get<std::string>(), c.at("percent").get<double>());
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, fmt::format("malformed score table: {}", e.what()));
  }
}

nlohmann::json to_json(const StatsTable& stats) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t t = 0; t < stats.targets().size(); ++t) {
    for (std::size_t i = 0; i < stats.influencers().size(); ++i) {
      const auto& s = stats.at(i, t);
      out.push_back({{"influencer", stats.influencers()[i]},
                     {"target", stats.targets()[t]},
                     {"average", s.average},
                     {"maximum", s.maximum},
                     {"minimum", s.minimum},
                     {"range", s.range}});
    }
  }
  return out;
}

nlohmann::json to_json(const VoteResult& v) {
  nlohmann::json ballots = nlohmann::json::array();
  for (const auto& [voter, choice] : v.ballots) ballots.push_back({{"voter", voter}, {"choice", choice}});
  nlohmann::json tally = nlohmann::json::array();
  for (const auto& [name, n] : v.tally) tally.push_back({{"influencer", name}, {"votes", n}});
  return {{"target", v.target},
          {"ballots", std::move(ballots)},
          {"tally", std::move(tally)},
          {"winner", v.winner},
          {"tie_broken_by", tie_break_name(v.tie_broken_by)},
          {"dissenters", v.dissenters()}};
}

}  // namespace influence::ensemble
