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

// Token-level attribution from a feature-level Shapley vector.
//
// Dimension j of a pooled half was built from column j of the token (or
// option phrase) embedding matrix E. Its Shapley value shap_j is handed back
// to the rows of E:
//
//   max / min    all of shap_j to the lowest-index argmax / argmin row
//   mean / sum   row i gets shap_j * E(i,j) / sum_k E(k,j)
//                (an equal split when |sum_k E(k,j)| < 1e-9)
//
// Every rule conserves the column total. The answer half goes to option
// phrases (the mean over phrases), and optionally on to the tokens of each
// phrase by applying the proportional rule a second time. Shapley mass that
// has no token to land on (handcrafted features, the zero answer half of an
// item without options) is reported as a residual.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dbq/classify.hpp"
#include "dbq/corpus.hpp"
#include "dbq/embedding.hpp"
#include "dbq/error.hpp"
#include "dbq/featurize.hpp"
#include "dbq/matrix.hpp"
#include "dbq/shapley.hpp"

namespace dbq {

inline constexpr double kProportionalEpsilon = 1e-9;

struct ColumnShares {
  std::vector<double> shares;
  bool equal_split = false;  // proportional denominator was below epsilon
};

inline ColumnShares propagate_column(double shap_j, std::span<const double> column,
                                     Pooling pooling) {
  if (column.empty()) fail(ErrorCode::kInvalidArgument, "cannot propagate onto an empty column");
  ColumnShares out;
  out.shares.assign(column.size(), 0.0);
  switch (pooling) {
    case Pooling::kMax:
    case Pooling::kMin: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < column.size(); ++i) {
        const bool better = pooling == Pooling::kMax ? column[i] > column[best]
                                                     : column[i] < column[best];
        if (better) best = i;
      }
      out.shares[best] = shap_j;
      break;
    }
    case Pooling::kMean:
    case Pooling::kSum: {
      double denom = 0.0;
      for (double e : column) denom += e;
      if (std::abs(denom) < kProportionalEpsilon) {
        out.equal_split = true;
        const double each = shap_j / static_cast<double>(column.size());
        std::fill(out.shares.begin(), out.shares.end(), each);
      } else {
        for (std::size_t i = 0; i < column.size(); ++i) {
          out.shares[i] = shap_j * column[i] / denom;
        }
      }
      break;
    }
  }
  return out;
}

// Rows are tokens or option phrases, columns are embedding dimensions.
struct ProjectedShapMatrix {
  Matrix values;
  std::vector<std::string> row_labels;
  Pooling pooling = Pooling::kMax;
  std::size_t equal_split_columns = 0;
};

inline ProjectedShapMatrix project_half(std::span<const double> shap_half,
                                        const Matrix& embeddings, Pooling pooling,
                                        std::vector<std::string> labels) {
  if (embeddings.cols() != shap_half.size()) {
    fail(ErrorCode::kInvalidArgument, "embedding width does not match the Shapley half");
  }
  ProjectedShapMatrix out;
  out.values = Matrix(embeddings.rows(), embeddings.cols());
  out.row_labels = std::move(labels);
  out.pooling = pooling;
  if (embeddings.rows() == 0) return out;
  for (std::size_t j = 0; j < embeddings.cols(); ++j) {
    const std::vector<double> column = embeddings.column(j);
    const ColumnShares s = propagate_column(shap_half[j], column, pooling);
    if (s.equal_split) ++out.equal_split_columns;
    for (std::size_t i = 0; i < s.shares.size(); ++i) out.values(i, j) = s.shares[i];
  }
  return out;
}

struct ProjectedShap {
  ProjectedShapMatrix question;
  ProjectedShapMatrix answer;  // rows are option phrases; no rows without options
  double residual = 0.0;
};

inline ProjectedShap project_shap(const ShapVector& shap, const FeatureVector& fv,
                                  const ItemTrace& trace) {
  const std::size_t k = fv.embedding_dim;
  if (shap.values.size() != fv.size()) {
    fail(ErrorCode::kInvalidArgument, "Shapley vector has " +
                                          std::to_string(shap.values.size()) +
                                          " values for a feature vector of " +
                                          std::to_string(fv.size()));
  }
  if (trace.question_tokens.size() != fv.question_token_count ||
      trace.option_tokens.size() != fv.option_count ||
      trace.question_embeddings.cols() != k) {
    fail(ErrorCode::kConflict,
         "stale explanation: token or option counts differ from featurize time");
  }
  const std::span<const double> all(shap.values);
  ProjectedShap out;
  std::vector<std::string> qlabels;
  for (const Token& t : trace.question_tokens) qlabels.push_back(t.surface);
  out.question = project_half(all.subspan(0, k), trace.question_embeddings,
                              fv.question_pooling, std::move(qlabels));
  std::vector<std::string> olabels;
  for (const auto& tokens : trace.option_tokens) {
    std::string phrase;
    for (const Token& t : tokens) phrase += (phrase.empty() ? "" : " ") + t.surface;
    olabels.push_back(std::move(phrase));
  }
  out.answer = project_half(all.subspan(k, k), trace.option_embeddings, fv.answer_pooling,
                            std::move(olabels));
  if (trace.option_embeddings.rows() == 0) {
    for (std::size_t j = k; j < 2 * k; ++j) out.residual += all[j];
  }
  for (std::size_t j = 2 * k; j < all.size(); ++j) out.residual += all[j];
  return out;
}

// Second-level split of an option phrase row onto the phrase's tokens
// (the phrase vector is the mean of its token vectors).
inline std::vector<Matrix> split_option_phrases(const ProjectedShapMatrix& answer,
                                                const ItemTrace& trace) {
  if (answer.values.rows() != trace.option_token_embeddings.size()) {
    fail(ErrorCode::kConflict, "stale explanation: option count changed");
  }
  std::vector<Matrix> out;
  for (std::size_t o = 0; o < answer.values.rows(); ++o) {
    const auto phrase = answer.values.row(o);
    out.push_back(project_half(phrase, trace.option_token_embeddings[o], Pooling::kMean, {})
                      .values);
  }
  return out;
}

enum class RowAggregation { kSum, kMean, kMax };

inline std::string_view row_aggregation_name(RowAggregation mode) {
  switch (mode) {
    case RowAggregation::kSum: return "sum";
    case RowAggregation::kMean: return "mean";
    case RowAggregation::kMax: return "max";
  }
  return "sum";
}

inline RowAggregation parse_row_aggregation(std::string_view name) {
  if (name == "sum") return RowAggregation::kSum;
  if (name == "mean") return RowAggregation::kMean;
  if (name == "max") return RowAggregation::kMax;
  fail(ErrorCode::kInvalidArgument, "unknown aggregation mode \"" + std::string(name) +
                                        "\" (expected sum, mean or max)");
}

inline std::vector<double> aggregate_rows(const Matrix& m, RowAggregation mode) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    if (row.empty()) continue;
    switch (mode) {
      case RowAggregation::kSum:
      case RowAggregation::kMean: {
        double s = 0.0;
        for (double v : row) s += v;
        out[i] = mode == RowAggregation::kSum ? s : s / static_cast<double>(row.size());
        break;
      }
      case RowAggregation::kMax:
        out[i] = *std::max_element(row.begin(), row.end());
        break;
    }
  }
  return out;
}

struct TokenAttribution {
  std::vector<std::string> tokens;
  std::vector<ByteSpan> token_spans;  // into the question text
  std::vector<double> scores;
  std::vector<std::string> option_phrases;
  std::vector<double> option_scores;
  std::vector<std::vector<std::string>> option_tokens;
  std::vector<std::vector<double>> option_token_scores;
  double residual = 0.0;
  double base_value = 0.0;
  double output = 0.0;  // base_value plus the Shapley total
  RowAggregation mode = RowAggregation::kSum;

  // Everything assigned to question tokens, option phrases and the residual.
  double total() const {
    double s = residual;
    for (double v : scores) s += v;
    for (double v : option_scores) s += v;
    return s;
  }
};

inline TokenAttribution attribute_tokens(const ShapVector& shap, const ProjectedShap& projected,
                                         const ItemTrace& trace, RowAggregation mode) {
  TokenAttribution a;
  for (const Token& t : trace.question_tokens) {
    a.tokens.push_back(t.surface);
    a.token_spans.push_back(t.span);
  }
  a.scores = aggregate_rows(projected.question.values, mode);
  a.option_phrases = projected.answer.row_labels;
  a.option_scores = aggregate_rows(projected.answer.values, mode);
  const std::vector<Matrix> split = split_option_phrases(projected.answer, trace);
  for (std::size_t o = 0; o < split.size(); ++o) {
    std::vector<std::string> words;
    for (const Token& t : trace.option_tokens[o]) words.push_back(t.surface);
    a.option_tokens.push_back(std::move(words));
    a.option_token_scores.push_back(aggregate_rows(split[o], mode));
  }
  a.residual = projected.residual;
  a.base_value = shap.base_value;
  a.output = shap.base_value + shap.total();
  a.mode = mode;
  return a;
}

struct ExplainOptions {
  std::size_t n_samples = 2000;
  std::uint64_t seed = 1;
  RowAggregation mode = RowAggregation::kSum;
};

struct Explanation {
  FeatureVector features;
  ShapVector shap;
  ProjectedShap projected;
  TokenAttribution attribution;
  double probability = 0.0;
};

inline Explanation explain_item(const TrainedModel& model, const EmbeddingModel& embedding,
                                const QAItem& item, const FeaturizeOptions& featurize_options,
                                const Matrix& background, const ExplainOptions& options) {
  Explanation e;
  ItemTrace trace;
  e.features = featurize(embedding, item, featurize_options, &trace);
  e.probability = model.predict_proba(e.features.values);
  e.shap = estimate_shap(probability_of(model), e.features.values, background,
                         options.n_samples, options.seed);
  e.projected = project_shap(e.shap, e.features, trace);
  e.attribution = attribute_tokens(e.shap, e.projected, trace, options.mode);
  return e;
}

inline nlohmann::json to_json(const TokenAttribution& a) {
  nlohmann::json option_tokens = nlohmann::json::array();
  for (std::size_t o = 0; o < a.option_tokens.size(); ++o) {
    option_tokens.push_back({{"tokens", a.option_tokens[o]}, {"scores", a.option_token_scores[o]}});
  }
  return {{"tokens", a.tokens},
          {"scores", a.scores},
          {"option_phrases", a.option_phrases},
          {"option_scores", a.option_scores},
          {"option_tokens", option_tokens},
          {"residual", a.residual},
          {"base_value", a.base_value},
          {"output", a.output},
          {"mode", std::string(row_aggregation_name(a.mode))}};
}

}  // namespace dbq
