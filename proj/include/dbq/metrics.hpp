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

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "dbq/classify.hpp"
#include "dbq/error.hpp"

namespace dbq {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Metrics that are undefined for the data at hand (no predicted positives,
// a single class) are empty rather than zero.
struct EvalReport {
  ConfusionCounts counts;
  std::optional<double> precision;
  std::optional<double> recall;
  double accuracy = 0.0;
  std::optional<double> auc_roc;
};

// Mann-Whitney statistic via average ranks; tied scores count 1/2.
inline std::optional<double> auc_roc(std::span<const double> scores,
                                     std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::kInvalidArgument, "scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1 ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

inline EvalReport report_from_counts(const ConfusionCounts& c) {
  EvalReport r;
  r.counts = c;
  if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.total() > 0) {
    r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  }
  return r;
}

inline ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> labels) {
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted[i] == 1) {
      (labels[i] == 1 ? c.tp : c.fp)++;
    } else {
      (labels[i] == 1 ? c.fn : c.tn)++;
    }
  }
  return c;
}

inline EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                                  double threshold = kDefaultThreshold) {
  if (scores.empty()) fail(ErrorCode::kInvalidArgument, "cannot evaluate an empty test set");
  std::vector<int> predicted(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) predicted[i] = scores[i] >= threshold ? 1 : 0;
  EvalReport r = report_from_counts(confusion(predicted, labels));
  r.auc_roc = auc_roc(scores, labels);
  return r;
}

inline std::vector<double> predict_all(const TrainedModel& model, const Matrix& x) {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = model.predict_proba(x.row(i));
  return out;
}

inline EvalReport evaluate(const TrainedModel& model, const Dataset& test,
                           double threshold = kDefaultThreshold) {
  if (test.empty()) fail(ErrorCode::kInvalidArgument, "cannot evaluate an empty test set");
  const std::vector<double> scores = predict_all(model, test.features);
  return evaluate_scores(scores, test.labels, threshold);
}

inline nlohmann::json to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json("undefined");
  };
  return {{"precision", opt(r.precision)},
          {"recall", opt(r.recall)},
          {"accuracy", r.accuracy},
          {"auc_roc", opt(r.auc_roc)},
          {"confusion", {{"tp", r.counts.tp}, {"fp", r.counts.fp},
                         {"tn", r.counts.tn}, {"fn", r.counts.fn}}}};
}

}  // namespace dbq
