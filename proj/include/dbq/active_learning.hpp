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

// Query-by-committee active learning.
//
// A committee of one random forest, one logistic regression and one boosted
// tree model votes on every pool item. Disagreement is the vote entropy
//
//   H(x) = -sum_k q_k ln q_k,   q_k = (votes for class k) / C
//
// and the items with the largest H are sent to the oracle. Entropies are in
// nats; any other log base rescales all of them by the same factor and leaves
// the ranking unchanged.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dbq/classify.hpp"
#include "dbq/corpus.hpp"
#include "dbq/error.hpp"
#include "dbq/random.hpp"
#include "dbq/text.hpp"

namespace dbq {

inline constexpr std::size_t kCommitteeSize = 3;

inline double vote_entropy(std::span<const int> votes, std::size_t committee_size) {
  if (committee_size == 0) fail(ErrorCode::kInvalidArgument, "committee size must be positive");
  if (votes.size() != committee_size) {
    fail(ErrorCode::kInvalidArgument, "expected " + std::to_string(committee_size) +
                                          " votes, got " + std::to_string(votes.size()));
  }
  std::size_t positive = 0;
  for (int v : votes) {
    if (v != 0 && v != 1) fail(ErrorCode::kInvalidArgument, "votes must be 0 or 1");
    positive += static_cast<std::size_t>(v);
  }
  const double c = static_cast<double>(committee_size);
  double h = 0.0;
  for (const std::size_t n : {positive, committee_size - positive}) {
    if (n == 0) continue;
    const double q = static_cast<double>(n) / c;
    h -= q * std::log(q);
  }
  return h;
}

// --- committee ------------------------------------------------------------

struct CommitteeParams {
  ForestParams forest{.n_trees = 30};
  LogRegParams logreg{};
  GbtParams gbt{.n_stages = 30};
};

class Committee {
 public:
  explicit Committee(std::vector<TrainedModel> members) : members_(std::move(members)) {
    if (members_.size() != kCommitteeSize) {
      fail(ErrorCode::kInvalidArgument, "a committee has exactly three members");
    }
    for (const TrainedModel& m : members_) {
      if (m.dim() != members_.front().dim()) {
        fail(ErrorCode::kInvalidArgument, "committee members disagree on feature dimension");
      }
    }
  }

  const std::vector<TrainedModel>& members() const { return members_; }
  std::size_t dim() const { return members_.front().dim(); }

  std::vector<int> votes(std::span<const double> x) const {
    std::vector<int> out;
    for (const TrainedModel& m : members_) out.push_back(m.predict_label(x));
    return out;
  }
  double entropy(std::span<const double> x) const {
    return vote_entropy(votes(x), kCommitteeSize);
  }

 private:
  std::vector<TrainedModel> members_;
};

inline Committee train_committee(const Dataset& data, const CommitteeParams& params,
                                 std::uint64_t seed) {
  require_both_classes(data, "committee");
  ForestParams rf = params.forest;
  rf.seed = derive_seed(seed, 0);
  LogRegParams lr = params.logreg;
  lr.seed = derive_seed(seed, 1);
  GbtParams gbt = params.gbt;
  gbt.seed = derive_seed(seed, 2);
  std::vector<TrainedModel> members;
  members.push_back(train_random_forest(data, rf));
  members.push_back(train_logreg(data, lr));
  members.push_back(train_gbt(data, gbt));
  return Committee(std::move(members));
}

// --- pool -----------------------------------------------------------------

enum class PoolSource { kWithConjunction, kWithoutConjunction };

inline std::string_view pool_source_name(PoolSource s) {
  return s == PoolSource::kWithConjunction ? "with_conjunction" : "without_conjunction";
}

struct PoolItem {
  QAItem item;  // label always cleared
  std::vector<double> features;
  PoolSource source = PoolSource::kWithoutConjunction;
};

struct Pool {
  std::vector<PoolItem> items;
  bool shortfall = false;  // a stratum had fewer items than requested

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
};

inline PoolSource source_of(const QAItem& item, const ConjunctionLexicon& lexicon) {
  return has_conjunction(item.question, lexicon) ? PoolSource::kWithConjunction
                                                 : PoolSource::kWithoutConjunction;
}

// Draws n_per_source items (seeded) from each stratum; conjunction-bearing
// items come first in the pool.
template <class Featurizer>
Pool build_two_source_pool(const std::vector<QAItem>& corpus, const ConjunctionLexicon& lexicon,
                           std::size_t n_per_source, std::uint64_t seed,
                           Featurizer&& featurize_item) {
  std::vector<std::size_t> strata[2];
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    strata[source_of(corpus[i], lexicon) == PoolSource::kWithConjunction ? 0 : 1].push_back(i);
  }
  Pool pool;
  for (int s = 0; s < 2; ++s) {
    std::vector<std::size_t>& idx = strata[s];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
    rng.shuffle(idx);
    if (idx.size() < n_per_source) pool.shortfall = true;
    idx.resize(std::min(idx.size(), n_per_source));
    for (std::size_t i : idx) {
      PoolItem p;
      p.item = corpus[i];
      p.item.label.reset();
      p.features = featurize_item(p.item);
      p.source = s == 0 ? PoolSource::kWithConjunction : PoolSource::kWithoutConjunction;
      pool.items.push_back(std::move(p));
    }
  }
  return pool;
}

struct ScoredItem {
  std::size_t pool_index = 0;
  std::string id;
  double entropy = 0.0;
  std::vector<int> votes;
};

struct QueryResult {
  std::vector<ScoredItem> items;
  bool truncated = false;  // batch_size exceeded the candidates
};

// Descending entropy, ties by ascending pool index. `exclude` marks pool
// items that may not be returned (already labeled or skipped).
inline QueryResult query_most_informative(const Committee& committee, const Pool& pool,
                                          std::size_t batch_size,
                                          const std::vector<bool>* exclude = nullptr) {
  QueryResult out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (exclude != nullptr && (*exclude)[i]) continue;
    ScoredItem s;
    s.pool_index = i;
    s.id = pool.items[i].item.id;
    s.votes = committee.votes(pool.items[i].features);
    s.entropy = vote_entropy(s.votes, kCommitteeSize);
    out.items.push_back(std::move(s));
  }
  std::stable_sort(out.items.begin(), out.items.end(),
                   [](const ScoredItem& a, const ScoredItem& b) { return a.entropy > b.entropy; });
  if (batch_size >= out.items.size()) {
    out.truncated = batch_size > out.items.size();
  } else {
    out.items.resize(batch_size);
  }
  return out;
}

// Uniform sample without replacement, in pool order.
inline std::vector<std::size_t> random_sample(const Pool& pool, std::size_t batch_size,
                                              std::uint64_t seed,
                                              const std::vector<bool>* exclude = nullptr) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (exclude == nullptr || !(*exclude)[i]) candidates.push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(candidates);
  candidates.resize(std::min(candidates.size(), batch_size));
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

// --- labeling loop --------------------------------------------------------

enum class QueryStrategy { kQbc, kRandom };

inline std::string_view query_strategy_name(QueryStrategy s) {
  return s == QueryStrategy::kQbc ? "qbc" : "random";
}

inline QueryStrategy parse_query_strategy(std::string_view name) {
  if (name == "qbc") return QueryStrategy::kQbc;
  if (name == "random") return QueryStrategy::kRandom;
  fail(ErrorCode::kInvalidArgument,
       "unknown strategy \"" + std::string(name) + "\" (expected qbc or random)");
}

// Empty optional = the oracle abstains.
using Oracle = std::function<std::optional<Label>(const QAItem&)>;

struct QueriedItem {
  std::string id;
  std::optional<double> entropy;  // absent for random sampling
  std::vector<int> votes;
  std::optional<Label> label;
};

struct QueryRound {
  std::size_t round = 0;
  QueryStrategy strategy = QueryStrategy::kQbc;
  std::vector<QueriedItem> queried;
  std::size_t labels_received = 0;
  std::size_t positives_received = 0;
  std::size_t labeled_size = 0;      // after the round
  double labeled_positive_ratio = 0.0;
};

struct AlLoopConfig {
  std::size_t rounds = 5;
  std::size_t batch_per_round = 20;
  QueryStrategy strategy = QueryStrategy::kQbc;
  CommitteeParams committee{};
  std::uint64_t seed = 1;
};

struct AlLoopResult {
  Dataset labeled;
  std::vector<QueryRound> rounds;
  std::vector<std::string> abstained;
  bool exhausted = false;  // the pool ran out before all rounds were played

  // Positive fraction among the labels the oracle gave.
  std::optional<double> queried_positive_ratio() const {
    std::size_t got = 0, pos = 0;
    for (const QueryRound& r : rounds) {
      got += r.labels_received;
      pos += r.positives_received;
    }
    if (got == 0) return std::nullopt;
    return static_cast<double>(pos) / static_cast<double>(got);
  }
};

inline AlLoopResult run_al_loop(const Dataset& seed_labeled, const Pool& pool,
                                const Oracle& oracle, const AlLoopConfig& config) {
  AlLoopResult result;
  result.labeled = seed_labeled;
  if (config.rounds == 0) return result;
  require_both_classes(seed_labeled, "active learning seed set");
  if (config.batch_per_round == 0) fail(ErrorCode::kInvalidArgument, "batch size must be positive");
  for (const PoolItem& p : pool.items) {
    if (p.features.size() != seed_labeled.dim()) {
      fail(ErrorCode::kInvalidArgument, "pool item \"" + p.item.id +
                                            "\" has a different feature dimension than the seed set");
    }
  }

  std::vector<bool> consumed(pool.size(), false);
  std::size_t remaining = pool.size();
  for (std::size_t round = 0; round < config.rounds; ++round) {
    if (remaining == 0) {
      result.exhausted = true;
      break;
    }
    const std::uint64_t round_seed = derive_seed(config.seed, round);
    QueryRound log;
    log.round = round;
    log.strategy = config.strategy;
    std::vector<std::size_t> picked;
    if (config.strategy == QueryStrategy::kQbc) {
      const Committee committee = train_committee(result.labeled, config.committee, round_seed);
      const QueryResult q =
          query_most_informative(committee, pool, config.batch_per_round, &consumed);
      for (const ScoredItem& s : q.items) {
        picked.push_back(s.pool_index);
        log.queried.push_back({s.id, s.entropy, s.votes, std::nullopt});
      }
    } else {
      picked = random_sample(pool, config.batch_per_round, round_seed, &consumed);
      for (std::size_t i : picked) {
        log.queried.push_back({pool.items[i].item.id, std::nullopt, {}, std::nullopt});
      }
    }
    for (std::size_t k = 0; k < picked.size(); ++k) {
      const PoolItem& p = pool.items[picked[k]];
      consumed[picked[k]] = true;
      --remaining;
      const std::optional<Label> label = oracle(p.item);
      if (!label) {
        result.abstained.push_back(p.item.id);
        continue;
      }
      log.queried[k].label = label;
      result.labeled.add(p.features, to_int(*label), p.item.id);
      ++log.labels_received;
      if (*label == Label::kDbq) ++log.positives_received;
    }
    log.labeled_size = result.labeled.size();
    log.labeled_positive_ratio = static_cast<double>(result.labeled.positives()) /
                                 static_cast<double>(result.labeled.size());
    result.rounds.push_back(std::move(log));
    if (picked.size() < config.batch_per_round) {
      result.exhausted = true;
      break;
    }
  }
  return result;
}

inline nlohmann::json to_json(const QueryRound& r) {
  nlohmann::json queried = nlohmann::json::array();
  for (const QueriedItem& q : r.queried) {
    nlohmann::json j{{"id", q.id}};
    j["entropy"] = q.entropy ? nlohmann::json(*q.entropy) : nlohmann::json(nullptr);
    j["votes"] = q.votes;
    j["label"] = q.label ? nlohmann::json(to_int(*q.label)) : nlohmann::json(nullptr);
    queried.push_back(std::move(j));
  }
  return {{"round", r.round},
          {"strategy", std::string(query_strategy_name(r.strategy))},
          {"queried", queried},
          {"labels_received", r.labels_received},
          {"positives_received", r.positives_received},
          {"labeled_size", r.labeled_size},
          {"labeled_positive_ratio", r.labeled_positive_ratio}};
}

inline void write_round_log(std::ostream& out, const std::vector<QueryRound>& rounds) {
  for (const QueryRound& r : rounds) out << to_json(r).dump() << '\n';
}

// --- labeling guidance ----------------------------------------------------

inline constexpr std::string_view kLabelingInstruction =
    "Label the question double-barreled only if it asks about two or more distinct things "
    "joined by a conjunction that have no clear association, causation, or entailment "
    "relationship. Otherwise label it neutral, or skip it if you cannot decide.";

struct LabelingPrecondition {
  bool machine_checkable = false;   // a conjunction is present
  bool needs_human_judgment = false;
  std::string_view instruction;
};

inline LabelingPrecondition labeling_precondition(const QAItem& item,
                                                  const ConjunctionLexicon& lexicon) {
  LabelingPrecondition p;
  p.machine_checkable = has_conjunction(item.question, lexicon);
  p.needs_human_judgment = p.machine_checkable;
  if (p.needs_human_judgment) p.instruction = kLabelingInstruction;
  return p;
}

}  // namespace dbq
