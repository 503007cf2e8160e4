// Copyright 2026 The dbq Authors.
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
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dbq/active_learning.hpp"
#include "dbq/features.hpp"
#include "dbq/synthetic.hpp"

namespace dbq {
namespace {

// -(2/3 ln 2/3 + 1/3 ln 1/3), evaluated independently of vote_entropy.
const double kTwoOneSplit = -(2.0 / 3.0 * std::log(2.0 / 3.0) + 1.0 / 3.0 * std::log(1.0 / 3.0));

TEST(VoteEntropy, TwoToOneSplit) {
  EXPECT_NEAR(vote_entropy(std::vector<int>{1, 1, 0}, 3), 0.636514, 1e-6);
  EXPECT_DOUBLE_EQ(vote_entropy(std::vector<int>{1, 1, 0}, 3), kTwoOneSplit);
}

TEST(VoteEntropy, UnanimousIsExactlyZero) {
  EXPECT_EQ(vote_entropy(std::vector<int>{1, 1, 1}, 3), 0.0);
  EXPECT_EQ(vote_entropy(std::vector<int>{0, 0, 0}, 3), 0.0);
}

TEST(VoteEntropy, EvenSplitOfTwoIsLn2) {
  EXPECT_DOUBLE_EQ(vote_entropy(std::vector<int>{0, 1}, 2), std::numbers::ln2);
}

TEST(VoteEntropy, WrongVoteCountOrValue) {
  EXPECT_THROW(vote_entropy(std::vector<int>{1, 0}, 3), Error);
  EXPECT_THROW(vote_entropy(std::vector<int>{1, 2, 0}, 3), Error);
  EXPECT_THROW(vote_entropy({}, 0), Error);
}

TEST(VoteEntropy, BoundsAndZeroIffUnanimous) {
  for (std::size_t c = 1; c <= 7; ++c) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << c); ++mask) {
      std::vector<int> v(c);
      std::size_t pos = 0;
      for (std::size_t i = 0; i < c; ++i) pos += (v[i] = static_cast<int>((mask >> i) & 1));
      const double h = vote_entropy(v, c);
      EXPECT_GE(h, 0.0);
      EXPECT_LE(h, std::numbers::ln2 + 1e-15);
      EXPECT_EQ(h == 0.0, pos == 0 || pos == c);
    }
  }
}

TEST(VoteEntropy, RankingIgnoresLogBase) {
  std::vector<std::vector<int>> sets;
  for (std::size_t mask = 0; mask < 32; ++mask) {
    std::vector<int> v(5);
    for (std::size_t i = 0; i < 5; ++i) v[i] = static_cast<int>((mask >> i) & 1);
    sets.push_back(v);
  }
  auto base2 = [](const std::vector<int>& v) {
    double q = 0.0;
    for (int x : v) q += x;
    q /= static_cast<double>(v.size());
    double h = 0.0;
    for (double p : {q, 1.0 - q}) {
      if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
  };
  for (const auto& a : sets) {
    for (const auto& b : sets) {
      const double na = vote_entropy(a, 5), nb = vote_entropy(b, 5);
      const double ta = base2(a), tb = base2(b);
      if (std::abs(na - nb) > 1e-12) EXPECT_EQ(na < nb, ta < tb);
    }
  }
}

// Three one-feature threshold classifiers: member k votes positive when x > t_k.
Committee threshold_committee(double t0, double t1, double t2) {
  std::vector<TrainedModel> members;
  for (double t : {t0, t1, t2}) {
    LogisticRegression lr;
    lr.mean = {0.0};
    lr.scale = {1.0};
    lr.weights = {100.0};
    lr.bias = -100.0 * t;
    members.emplace_back(lr, 0, 1);
  }
  return Committee(std::move(members));
}

Pool pool_of(const std::vector<double>& xs) {
  Pool p;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    PoolItem item;
    item.item.id = "p" + std::to_string(i);
    item.item.question = "q";
    item.features = {xs[i]};
    p.items.push_back(item);
  }
  return p;
}

TEST(Query, SplitItemRanksFirst) {
  const Committee c = threshold_committee(0.0, 1.0, 2.0);
  const QueryResult r = query_most_informative(c, pool_of({-5, -4, 0.5, 9}), 1);
  ASSERT_EQ(r.items.size(), 1u);
  EXPECT_EQ(r.items[0].id, "p2");
  EXPECT_NEAR(r.items[0].entropy, kTwoOneSplit, 1e-12);
  EXPECT_EQ(r.items[0].votes, (std::vector<int>{1, 0, 0}));
}

TEST(Query, AllUnanimousKeepsPoolOrder) {
  const Committee c = threshold_committee(0.0, 1.0, 2.0);
  const QueryResult r = query_most_informative(c, pool_of({-5, 9, -3, 7}), 4);
  std::vector<std::string> ids;
  for (const auto& s : r.items) ids.push_back(s.id);
  EXPECT_EQ(ids, (std::vector<std::string>{"p0", "p1", "p2", "p3"}));
  EXPECT_FALSE(r.truncated);
}

TEST(Query, PositiveEntropyItemsFirstThenPoolOrder) {
  const Committee c = threshold_committee(0.0, 1.0, 2.0);
  const QueryResult r = query_most_informative(c, pool_of({-5, 1.5, 9, 0.5}), 3);
  std::vector<std::string> ids;
  for (const auto& s : r.items) ids.push_back(s.id);
  EXPECT_EQ(ids, (std::vector<std::string>{"p1", "p3", "p0"}));
}

TEST(Query, OversizedBatchReturnsWholePoolFlagged) {
  const Committee c = threshold_committee(0.0, 1.0, 2.0);
  const QueryResult r = query_most_informative(c, pool_of({1, 2}), 5);
  EXPECT_EQ(r.items.size(), 2u);
  EXPECT_TRUE(r.truncated);
}

TEST(Query, ExclusionAndUniqueness) {
  const Committee c = threshold_committee(-1.0, 0.0, 1.0);
  Rng rng(3);
  std::vector<double> xs(50);
  for (double& x : xs) x = rng.normal() * 2.0;
  const Pool pool = pool_of(xs);
  std::vector<bool> exclude(50, false);
  for (std::size_t i = 0; i < 50; i += 3) exclude[i] = true;
  const QueryResult a = query_most_informative(c, pool, 20, &exclude);
  const QueryResult b = query_most_informative(c, pool, 20, &exclude);
  std::set<std::size_t> seen;
  for (std::size_t k = 0; k < a.items.size(); ++k) {
    EXPECT_FALSE(exclude[a.items[k].pool_index]);
    EXPECT_TRUE(seen.insert(a.items[k].pool_index).second);
    EXPECT_EQ(a.items[k].pool_index, b.items[k].pool_index);
    if (k > 0) EXPECT_GE(a.items[k - 1].entropy, a.items[k].entropy);
  }
}

TEST(Committee, NeedsExactlyThreeMembers) {
  LogisticRegression lr{{0.0}, {1.0}, {1.0}, 0.0};
  EXPECT_THROW(Committee({TrainedModel(lr, 0, 1)}), Error);
}

// --- pool construction ------------------------------------------------------

std::vector<QAItem> stratified_corpus(std::size_t with, std::size_t without) {
  std::vector<QAItem> c;
  for (std::size_t i = 0; i < with; ++i) {
    c.push_back({"w" + std::to_string(i), "Is the food and service good?", {"yes", "no"},
                 Label::kDbq});
  }
  for (std::size_t i = 0; i < without; ++i) {
    c.push_back({"n" + std::to_string(i), "Is the food good?", {"yes", "no"}, Label::kNonDbq});
  }
  return c;
}

auto hc = [](const QAItem& item) { return handcrafted_features(item); };

TEST(TwoSourcePool, FivePerSource) {
  const auto lex = ConjunctionLexicon::standard();
  const Pool p = build_two_source_pool(stratified_corpus(10, 10), lex, 5, 1, hc);
  ASSERT_EQ(p.size(), 10u);
  EXPECT_FALSE(p.shortfall);
  std::map<PoolSource, int> tags;
  for (const PoolItem& item : p.items) {
    ++tags[item.source];
    EXPECT_FALSE(item.item.label.has_value());
    EXPECT_EQ(item.source, source_of(item.item, lex));
    EXPECT_EQ(item.features.size(), kHandcraftedFeatureCount);
  }
  EXPECT_EQ(tags[PoolSource::kWithConjunction], 5);
  EXPECT_EQ(tags[PoolSource::kWithoutConjunction], 5);
}

TEST(TwoSourcePool, MissingStratumFlagsShortfall) {
  const Pool p =
      build_two_source_pool(stratified_corpus(0, 10), ConjunctionLexicon::standard(), 5, 1, hc);
  EXPECT_EQ(p.size(), 5u);
  EXPECT_TRUE(p.shortfall);
  for (const PoolItem& item : p.items) EXPECT_EQ(item.source, PoolSource::kWithoutConjunction);
}

TEST(TwoSourcePool, SameSeedSamePool) {
  const auto corpus = stratified_corpus(30, 30);
  const auto lex = ConjunctionLexicon::standard();
  auto ids = [&](std::uint64_t seed) {
    std::vector<std::string> out;
    for (const auto& p : build_two_source_pool(corpus, lex, 7, seed, hc).items) {
      out.push_back(p.item.id);
    }
    return out;
  };
  EXPECT_EQ(ids(4), ids(4));
  EXPECT_NE(ids(4), ids(5));
}

// --- the loop ---------------------------------------------------------------

struct LoopFixture {
  Dataset seed;
  Pool pool;
  std::map<std::string, Label> truth;
};

// Handcrafted features keep this fast; the acceptance binary runs the
// embedding pipeline.
LoopFixture imbalanced_fixture(std::uint64_t seed) {
  LoopFixture f;
  SyntheticConfig cfg;
  cfg.n_items = 800;
  cfg.dbq_ratio = 0.05;
  cfg.seed = seed;
  std::vector<QAItem> corpus = generate_corpus(cfg);
  for (const QAItem& item : corpus) f.truth[item.id] = *item.label;
  std::size_t pos = 0, neg = 0;
  std::vector<QAItem> rest;
  for (const QAItem& item : corpus) {
    const bool is_pos = *item.label == Label::kDbq;
    if (is_pos && pos < 4) {
      f.seed.add(handcrafted_features(item), 1, item.id);
      ++pos;
    } else if (!is_pos && neg < 16) {
      f.seed.add(handcrafted_features(item), 0, item.id);
      ++neg;
    } else {
      rest.push_back(item);
    }
  }
  for (const QAItem& item : rest) {
    PoolItem p;
    p.item = item;
    p.item.label.reset();
    p.features = handcrafted_features(item);
    f.pool.items.push_back(std::move(p));
  }
  return f;
}

Oracle truth_oracle(const std::map<std::string, Label>& truth) {
  return [&truth](const QAItem& item) -> std::optional<Label> { return truth.at(item.id); };
}

AlLoopConfig small_loop(QueryStrategy s, std::uint64_t seed) {
  AlLoopConfig cfg;
  cfg.rounds = 5;
  cfg.batch_per_round = 20;
  cfg.strategy = s;
  cfg.seed = seed;
  cfg.committee.forest.n_trees = 15;
  cfg.committee.gbt.n_stages = 15;
  cfg.committee.logreg.epochs = 100;
  return cfg;
}

TEST(AlLoop, ZeroRoundsReturnsSeedUnchanged) {
  LoopFixture f = imbalanced_fixture(1);
  AlLoopConfig cfg = small_loop(QueryStrategy::kQbc, 1);
  cfg.rounds = 0;
  const AlLoopResult r = run_al_loop(f.seed, f.pool, truth_oracle(f.truth), cfg);
  EXPECT_EQ(r.labeled.features, f.seed.features);
  EXPECT_EQ(r.labeled.labels, f.seed.labels);
  EXPECT_TRUE(r.rounds.empty());
}

TEST(AlLoop, QbcEnrichesPositives) {
  LoopFixture f = imbalanced_fixture(2);
  const AlLoopResult r =
      run_al_loop(f.seed, f.pool, truth_oracle(f.truth), small_loop(QueryStrategy::kQbc, 2));
  ASSERT_EQ(r.rounds.size(), 5u);
  ASSERT_TRUE(r.queried_positive_ratio().has_value());
  EXPECT_GT(*r.queried_positive_ratio(), 0.05);
}

TEST(AlLoop, LabelsOnlyComeFromTheOracleAndSizesAddUp) {
  LoopFixture f = imbalanced_fixture(3);
  std::size_t calls = 0;
  Oracle oracle = [&](const QAItem& item) -> std::optional<Label> {
    ++calls;
    if (calls % 4 == 0) return std::nullopt;  // abstain on every fourth request
    return f.truth.at(item.id);
  };
  const AlLoopResult r = run_al_loop(f.seed, f.pool, oracle, small_loop(QueryStrategy::kQbc, 3));
  std::size_t received = 0;
  for (const QueryRound& round : r.rounds) {
    received += round.labels_received;
    for (const QueriedItem& q : round.queried) {
      if (q.label) EXPECT_EQ(*q.label, f.truth.at(q.id));
      ASSERT_TRUE(q.entropy.has_value());
      EXPECT_GE(*q.entropy, 0.0);
      EXPECT_LE(*q.entropy, std::numbers::ln2);
    }
  }
  EXPECT_EQ(r.labeled.size(), f.seed.size() + received);
  EXPECT_EQ(r.abstained.size(), calls - received);
  EXPECT_EQ(r.abstained.size(), 25u);
  for (std::size_t i = f.seed.size(); i < r.labeled.size(); ++i) {
    EXPECT_EQ(r.labeled.labels[i], to_int(f.truth.at(r.labeled.ids[i])));
  }
  for (const std::string& id : r.abstained) {
    for (std::size_t i = 0; i < r.labeled.size(); ++i) EXPECT_NE(r.labeled.ids[i], id);
  }
}

TEST(AlLoop, DeterministicForFixedSeeds) {
  LoopFixture f = imbalanced_fixture(4);
  const auto cfg = small_loop(QueryStrategy::kQbc, 4);
  const AlLoopResult a = run_al_loop(f.seed, f.pool, truth_oracle(f.truth), cfg);
  const AlLoopResult b = run_al_loop(f.seed, f.pool, truth_oracle(f.truth), cfg);
  std::ostringstream la, lb;
  write_round_log(la, a.rounds);
  write_round_log(lb, b.rounds);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(a.labeled.ids, b.labeled.ids);
}

TEST(AlLoop, PoolExhaustionEndsEarly) {
  LoopFixture f = imbalanced_fixture(5);
  f.pool.items.resize(30);
  const AlLoopResult r =
      run_al_loop(f.seed, f.pool, truth_oracle(f.truth), small_loop(QueryStrategy::kRandom, 5));
  EXPECT_TRUE(r.exhausted);
  EXPECT_EQ(r.rounds.size(), 2u);
  EXPECT_EQ(r.labeled.size(), f.seed.size() + 30);
}

TEST(AlLoop, RoundLogIsJsonLines) {
  LoopFixture f = imbalanced_fixture(6);
  AlLoopConfig cfg = small_loop(QueryStrategy::kQbc, 6);
  cfg.rounds = 2;
  const AlLoopResult r = run_al_loop(f.seed, f.pool, truth_oracle(f.truth), cfg);
  std::ostringstream out;
  write_round_log(out, r.rounds);
  std::istringstream in(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("round"), n);
    EXPECT_EQ(j.at("strategy"), "qbc");
    EXPECT_EQ(j.at("queried").size(), 20u);
    ++n;
  }
  EXPECT_EQ(n, 2u);
}

TEST(AlLoop, SingleClassSeedRejected) {
  LoopFixture f = imbalanced_fixture(7);
  Dataset only_neg;
  for (std::size_t i = 0; i < f.seed.size(); ++i) {
    if (f.seed.labels[i] == 0) only_neg.add(f.seed.features.row(i), 0);
  }
  EXPECT_THROW(run_al_loop(only_neg, f.pool, truth_oracle(f.truth),
                           small_loop(QueryStrategy::kQbc, 7)),
               Error);
}

TEST(AlLoop, StrategyNames) {
  EXPECT_EQ(parse_query_strategy("qbc"), QueryStrategy::kQbc);
  EXPECT_EQ(parse_query_strategy("random"), QueryStrategy::kRandom);
  EXPECT_THROW(parse_query_strategy("uncertainty"), Error);
}

// --- labeling guidance --------------------------------------------------------

TEST(LabelingPrecondition, ConjunctionNeedsHumanJudgment) {
  const auto lex = ConjunctionLexicon::standard();
  const auto p = labeling_precondition(
      {"1", "food is yummy, and service is great", {}, std::nullopt}, lex);
  EXPECT_TRUE(p.machine_checkable);
  EXPECT_TRUE(p.needs_human_judgment);
  EXPECT_EQ(p.instruction, kLabelingInstruction);
}

TEST(LabelingPrecondition, NoConjunction) {
  const auto p = labeling_precondition({"1", "do you like pizza", {}, std::nullopt},
                                       ConjunctionLexicon::standard());
  EXPECT_FALSE(p.machine_checkable);
  EXPECT_FALSE(p.needs_human_judgment);
}

TEST(LabelingPrecondition, PregnantOrBreastfeeding) {
  const auto p = labeling_precondition(
      {"1", "Are you pregnant or breastfeeding?", {"yes", "no"}, std::nullopt},
      ConjunctionLexicon::standard());
  EXPECT_TRUE(p.machine_checkable);
  EXPECT_TRUE(p.needs_human_judgment);
}

}  // namespace
}  // namespace dbq
