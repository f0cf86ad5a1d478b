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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <doctest.h>

#include "influence/ensemble.hpp"
#include "score_tables.hpp"
#include "support.hpp"

using namespace influence::ensemble;
using influence::Errc;

namespace {

void check_printed(const fixtures::Grid& g) {
  const auto stats = compute_stats(fixtures::table_of(g));
  for (std::size_t c = 0; c < g.columns.size(); ++c) {
    const auto& s = stats.at(g.columns[c], g.target);
    INFO(g.target << " / " << g.columns[c]);
    CHECK(std::fabs(s.average - g.printed[0][c]) <= 0.005);
    CHECK(std::fabs(s.maximum - g.printed[1][c]) <= 0.005);
    CHECK(std::fabs(s.minimum - g.printed[2][c]) <= 0.005);
    CHECK(std::fabs(s.range - g.printed[3][c]) <= 0.005);
  }
}

ScoreTable random_table(std::mt19937& rng, std::size_t models, std::size_t influencers) {
  std::vector<std::string> m, i;
  for (std::size_t k = 0; k < models; ++k) m.push_back("m" + std::to_string(k));
  for (std::size_t k = 0; k < influencers; ++k) i.push_back("i" + std::to_string(k));
  ScoreTable t(m, i, {"t"});
  std::uniform_int_distribution<int> cents(0, 10000);
  // cents make exact ties likely enough to exercise tie breaking
  for (const auto& a : m)
    for (const auto& b : i) t.set(a, b, "t", cents(rng) % 50 / 2.0);
  return t;
}

}  // namespace

TEST_CASE("compute_stats reproduces the printed rows") {
  check_printed(fixtures::kPreamble);
  check_printed(fixtures::kProvisions);
  check_printed(fixtures::kLateral);
}

TEST_CASE("compute_stats examples") {
  const std::vector<double> virtue = {18.80, 15.05, 36.13, 14.34, 17.32};
  const auto s = compute_stats(virtue);
  CHECK(s.maximum == 36.13);
  CHECK(s.minimum == 14.34);
  CHECK(s.range == 36.13 - 14.34);
  CHECK(std::fabs(s.average - 20.328) < 1e-12);
  const std::vector<double> flat = {10, 10, 10, 10, 10};
  const auto f = compute_stats(flat);
  CHECK(f.average == 10);
  CHECK(f.range == 0);
  CHECK_ERRC(compute_stats(std::vector<double>{}), Errc::IncompleteGrid);
}

TEST_CASE("incomplete grids are refused") {
  ScoreTable t({"a", "b"}, {"x", "y"}, {"t"});
  t.set("a", "x", "t", 1);
  CHECK_FALSE(t.complete());
  CHECK_ERRC(compute_stats(t), Errc::IncompleteGrid);
  CHECK_ERRC(vote(t, "t"), Errc::IncompleteGrid);
  CHECK_ERRC(t.at("b", "y", "t"), Errc::IncompleteGrid);
  CHECK_ERRC(t.set("zz", "x", "t", 1), Errc::IncompleteGrid);
  CHECK_ERRC(ScoreTable({"a", "a"}, {"x"}, {"t"}), Errc::DuplicateId);
}

TEST_CASE("votes on both parts") {
  const auto table = fixtures::influence_table();
  for (const char* target : {"preamble", "provisions"}) {
    const auto v = vote(table, target);
    CHECK(v.winner == "deontological");
    CHECK(v.votes_for("deontological") == 4);
    CHECK(v.votes_for("consequentialism") == 1);
    CHECK(v.votes_for("virtue") == 0);
    CHECK(v.dissenters() == std::vector<std::string>{"TinyBERT"});
    CHECK(v.ballots.back() == std::pair<std::string, std::string>{"TinyBERT", "consequentialism"});
    CHECK(v.tie_broken_by == TieBreak::None);
  }
  const auto pooled = pooled_vote(table);
  CHECK(pooled.winner == "deontological");
  CHECK(pooled.votes_for("deontological") == 8);
}

TEST_CASE("vote tie handling") {
  ScoreTable same({"a", "b"}, {"x", "y"}, {"t"});
  for (const char* m : {"a", "b"}) {
    same.set(m, "x", "t", 5);
    same.set(m, "y", "t", 5);
  }
  const auto v = vote(same, "t");
  CHECK(v.winner == "x");
  CHECK(v.tie_broken_by == TieBreak::InputOrder);

  // 1:1 tally settled by the higher average
  ScoreTable split({"a", "b"}, {"x", "y"}, {"t"});
  split.set("a", "x", "t", 10);
  split.set("a", "y", "t", 9);
  split.set("b", "x", "t", 1);
  split.set("b", "y", "t", 30);
  const auto s = vote(split, "t");
  CHECK(s.winner == "y");
  CHECK(s.tie_broken_by == TieBreak::Average);

  ScoreTable single({"a"}, {"x"}, {"t"});
  single.set("a", "x", "t", 1);
  CHECK_ERRC(vote(single, "t"), Errc::IncompleteGrid);
}

TEST_CASE("ranking") {
  const auto stats = compute_stats(fixtures::influence_table());
  const std::vector<std::string> expect = {"deontological", "consequentialism", "virtue"};
  CHECK(rank_influencers(stats, "preamble") == expect);
  CHECK(rank_influencers(stats, "provisions") == expect);
  CHECK(pooled_ranking(stats) == expect);

  ScoreTable flat({"a"}, {"p", "q", "r"}, {"t"});
  for (const char* i : {"p", "q", "r"}) flat.set("a", i, "t", 3);
  CHECK(rank_influencers(compute_stats(flat), "t") == std::vector<std::string>{"p", "q", "r"});
}

TEST_CASE("lateral table") {
  const auto lat = lateral_table(fixtures::kModels, fixtures::kTheories);
  CHECK(lat.influencers() == fixtures::kPairs);
  CHECK(lat.targets() == std::vector<std::string>{std::string(kLateralTarget)});
  CHECK_ERRC(lateral_table(fixtures::kModels, {"virtue"}), Errc::IncompleteGrid);
  const auto stats = compute_stats(fixtures::table_of(fixtures::kLateral));
  // the deontological~consequentialism pair is the most similar on average
  const auto order = rank_influencers(stats, "lateral");
  CHECK(order.front() == "deontological~consequentialism");
  CHECK(pair_id("a", "b") == "a~b");
}

TEST_CASE("json round trip") {
  const auto t = fixtures::influence_table();
  CHECK(score_table_from_json(to_json(t)) == t);
  const auto j = to_json(vote(t, "preamble"));
  CHECK(j.at("winner") == "deontological");
  CHECK(j.at("tie_broken_by") == "none");
}

TEST_CASE("stats are invariant under model permutation") {
  std::mt19937 rng(53);
  for (int iter = 0; iter < 500; ++iter) {
    const auto t = random_table(rng, 2 + rng() % 6, 2 + rng() % 4);
    std::vector<std::string> models = t.models();
    std::shuffle(models.begin(), models.end(), rng);
    ScoreTable p(models, t.influencers(), t.targets());
    for (const auto& m : models)
      for (const auto& i : t.influencers()) p.set(m, i, "t", t.at(m, i, "t"));
    const auto a = compute_stats(t);
    const auto b = compute_stats(p);
    for (const auto& i : t.influencers()) {
      CHECK(a.at(i, "t").maximum == b.at(i, "t").maximum);
      CHECK(a.at(i, "t").minimum == b.at(i, "t").minimum);
      CHECK(a.at(i, "t").range == b.at(i, "t").range);
      CHECK(a.at(i, "t").average == doctest::Approx(b.at(i, "t").average).epsilon(1e-12));
      CHECK(a.at(i, "t").range >= 0);
      CHECK((a.at(i, "t").range == 0) == (a.at(i, "t").maximum == a.at(i, "t").minimum));
      CHECK(a.at(i, "t").minimum <= a.at(i, "t").average);
      CHECK(a.at(i, "t").average <= a.at(i, "t").maximum);
    }
  }
}

TEST_CASE("vote monotonicity and argmax scale invariance") {
  std::mt19937 rng(59);
  for (int iter = 0; iter < 500; ++iter) {
    auto t = random_table(rng, 1 + rng() % 6, 2 + rng() % 4);
    const auto before = vote(t, "t");
    std::size_t total = 0;
    for (const auto& [_, n] : before.tally) total += n;
    CHECK(total == t.models().size());

    const auto& m = t.models()[rng() % t.models().size()];
    const auto& i = t.influencers()[rng() % t.influencers().size()];
    ScoreTable raised = t;
    raised.set(m, i, "t", t.at(m, i, "t") + 0.5 + (rng() % 10));
    CHECK(vote(raised, "t").votes_for(i) >= before.votes_for(i));

    ScoreTable scaled = t;
    const double k = 0.25 * (1 + rng() % 40);
    for (const auto& inf : t.influencers()) scaled.set(m, inf, "t", t.at(m, inf, "t") * k);
    const auto after = vote(scaled, "t");
    const auto mi = t.model_index(m);
    CHECK(after.ballots[mi] == before.ballots[mi]);
  }
}
