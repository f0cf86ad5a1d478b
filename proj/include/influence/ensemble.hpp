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

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace influence::ensemble {

// Percent scores over (model, influencer, target). Axis order is the order
// given at construction and is kept in every derived view.
class ScoreTable {
 public:
  ScoreTable() = default;
  ScoreTable(std::vector<std::string> models, std::vector<std::string> influencers, std::vector<std::string> targets);

  const std::vector<std::string>& models() const { return models_; }
  const std::vector<std::string>& influencers() const { return influencers_; }
  const std::vector<std::string>& targets() const { return targets_; }

  void set(std::string_view model, std::string_view influencer, std::string_view target, double percent);
  std::optional<double> get(std::string_view model, std::string_view influencer, std::string_view target) const;
  // Throws IncompleteGrid when the cell is empty.
  double at(std::string_view model, std::string_view influencer, std::string_view target) const;
  double at(std::size_t m, std::size_t i, std::size_t t) const;

  bool complete() const;
  void require_complete() const;

  std::size_t model_index(std::string_view model) const;
  std::size_t influencer_index(std::string_view influencer) const;
  std::size_t target_index(std::string_view target) const;

  bool operator==(const ScoreTable&) const = default;

 private:
  std::size_t cell(std::size_t m, std::size_t i, std::size_t t) const;

  std::vector<std::string> models_;
  std::vector<std::string> influencers_;
  std::vector<std::string> targets_;
  std::vector<std::optional<double>> cells_;
};

struct AggregateStats {
  double average = 0.0;
  double maximum = 0.0;
  double minimum = 0.0;
  double range = 0.0;
  bool operator==(const AggregateStats&) const = default;
};

// Across-model statistics per (influencer, target).
class StatsTable {
 public:
  StatsTable() = default;
  StatsTable(std::vector<std::string> influencers, std::vector<std::string> targets);

  const std::vector<std::string>& influencers() const { return influencers_; }
  const std::vector<std::string>& targets() const { return targets_; }
  const AggregateStats& at(std::string_view influencer, std::string_view target) const;
  AggregateStats& at(std::string_view influencer, std::string_view target);
  const AggregateStats& at(std::size_t i, std::size_t t) const { return cells_[t * influencers_.size() + i]; }

 private:
  std::vector<std::string> influencers_;
  std::vector<std::string> targets_;
  std::vector<AggregateStats> cells_;
};

AggregateStats compute_stats(std::span<const double> values);
StatsTable compute_stats(const ScoreTable& table);

enum class TieBreak { None, Average, InputOrder };
std::string_view tie_break_name(TieBreak t);

struct VoteResult {
  std::string target;  // empty for the pooled vote
  // (model, influencer it scored highest), in model order.
  std::vector<std::pair<std::string, std::string>> ballots;
  // (influencer, votes), in influencer order.
  std::vector<std::pair<std::string, std::size_t>> tally;
  std::string winner;
  // Strongest rule needed to settle the ballots and the winner. An exact tie
  // inside one model's ballot counts as an input-order break.
  TieBreak tie_broken_by = TieBreak::None;

  std::size_t votes_for(std::string_view influencer) const;
  // Models whose ballot differs from the winner.
  std::vector<std::string> dissenters() const;
};

// Each model votes for the influencer it scores highest on `target`; the
// plurality wins, then the higher across-model average, then input order.
VoteResult vote(const ScoreTable& table, std::string_view target);

// One ballot per (model, target); averages are pooled over targets.
VoteResult pooled_vote(const ScoreTable& table);

// Influencers by descending across-model average; input order on ties.
std::vector<std::string> rank_influencers(const StatsTable& stats, std::string_view target);

// Ranking by the mean of the per-target averages.
std::vector<std::string> pooled_ranking(const StatsTable& stats);

inline constexpr std::string_view kLateralTarget = "lateral";

// "<a>~<b>" for influencers a before b in input order.
std::string pair_id(std::string_view a, std::string_view b);

// Unordered influencer pairs (a before b in input order).
std::vector<std::pair<std::string, std::string>> influencer_pairs(const std::vector<std::string>& influencers);
// Empty table for scores between the influencers themselves: the pair ids
// take the influencer axis, with the single target kLateralTarget. Needs at
// least two influencers.
ScoreTable lateral_table(const std::vector<std::string>& models, const std::vector<std::string>& influencers);

nlohmann::json to_json(const ScoreTable& table);
ScoreTable score_table_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StatsTable& stats);
nlohmann::json to_json(const VoteResult& vote);

}  // namespace influence::ensemble
