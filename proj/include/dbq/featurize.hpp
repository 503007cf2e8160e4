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

// Question/answer feature assembly.
//
//   question half: pool(token vectors of the question, question_pooling)
//   answer half:   mean over options of (mean over the option's tokens)
//   feature:       question half ++ answer half [++ handcrafted features]
//
// Only word tokens are embedded; punctuation is skipped unless a text has
// nothing else, in which case its punctuation tokens are used.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dbq/corpus.hpp"
#include "dbq/embedding.hpp"
#include "dbq/features.hpp"
#include "dbq/matrix.hpp"
#include "dbq/text.hpp"

namespace dbq {

struct FeaturizeOptions {
  Pooling question_pooling = Pooling::kMax;
  bool include_handcrafted = false;

  friend bool operator==(const FeaturizeOptions&, const FeaturizeOptions&) = default;
};

struct FeatureVector {
  std::vector<double> values;
  std::size_t embedding_dim = 0;  // K; the first 2K values are embeddings
  Pooling question_pooling = Pooling::kMax;
  Pooling answer_pooling = Pooling::kMean;
  std::size_t handcrafted_count = 0;
  bool no_options = false;
  std::size_t oov_tokens = 0;
  std::size_t question_token_count = 0;
  std::size_t option_count = 0;

  std::size_t size() const { return values.size(); }
  std::span<const double> question_half() const {
    return std::span<const double>(values).subspan(0, embedding_dim);
  }
  std::span<const double> answer_half() const {
    return std::span<const double>(values).subspan(embedding_dim, embedding_dim);
  }
};

inline std::size_t feature_dimension(std::size_t embedding_dim,
                                     bool include_handcrafted) {
  return 2 * embedding_dim + (include_handcrafted ? kHandcraftedFeatureCount : 0);
}

// Tokens that are fed to the embedding model.
inline std::vector<Token> embedding_tokens(std::string_view text) {
  std::vector<Token> all = tokenize(text);
  std::vector<Token> words = word_tokens(all);
  return words.empty() ? all : words;
}

// Everything featurize() computes on the way to a FeatureVector. Explanations
// replay the pooling against these matrices, so they must be built by the
// same code path.
struct ItemTrace {
  std::vector<Token> question_tokens;
  Matrix question_embeddings;  // one row per question token
  std::vector<std::vector<Token>> option_tokens;
  std::vector<Matrix> option_token_embeddings;
  Matrix option_embeddings;  // one row per option phrase
  std::size_t oov_tokens = 0;
};

inline Matrix embed_tokens(const EmbeddingModel& model,
                           std::span<const Token> tokens,
                           std::size_t* oov_count = nullptr) {
  Matrix m(tokens.size(), model.dim());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    TokenVector tv = compose_token_vector(model, tokens[i].normalized);
    if (tv.oov && oov_count != nullptr) ++*oov_count;
    std::copy(tv.values.begin(), tv.values.end(), m.row(i).begin());
  }
  return m;
}

inline std::vector<double> embed_question(const EmbeddingModel& model,
                                          std::span<const Token> tokens,
                                          Pooling strategy = Pooling::kMax) {
  return pool(embed_tokens(model, tokens), strategy);
}

struct AnswerEmbedding {
  std::vector<double> values;
  bool no_options = false;
};

inline AnswerEmbedding embed_answers(
    const EmbeddingModel& model,
    const std::vector<std::vector<Token>>& options) {
  AnswerEmbedding out;
  if (options.empty()) {
    out.values.assign(model.dim(), 0.0);
    out.no_options = true;
    return out;
  }
  Matrix phrases(options.size(), model.dim());
  for (std::size_t o = 0; o < options.size(); ++o) {
    if (options[o].empty()) {
      fail(ErrorCode::kInvalidArgument,
           "answer option " + std::to_string(o) + " has no tokens");
    }
    const auto phrase = pool(embed_tokens(model, options[o]), Pooling::kMean);
    std::copy(phrase.begin(), phrase.end(), phrases.row(o).begin());
  }
  out.values = pool(phrases, Pooling::kMean);
  return out;
}

inline ItemTrace trace_item(const EmbeddingModel& model, const QAItem& item) {
  ItemTrace trace;
  trace.question_tokens = embedding_tokens(item.question);
  if (trace.question_tokens.empty()) {
    fail(ErrorCode::kInvalidArgument, "question \"" + item.id + "\" has no tokens");
  }
  trace.question_embeddings =
      embed_tokens(model, trace.question_tokens, &trace.oov_tokens);
  trace.option_embeddings = Matrix(item.options.size(), model.dim());
  for (std::size_t o = 0; o < item.options.size(); ++o) {
    std::vector<Token> tokens = embedding_tokens(item.options[o]);
    if (tokens.empty()) {
      fail(ErrorCode::kInvalidArgument, "item \"" + item.id + "\": answer option " +
                                            std::to_string(o) + " has no tokens");
    }
    Matrix m = embed_tokens(model, tokens, &trace.oov_tokens);
    const auto phrase = pool(m, Pooling::kMean);
    std::copy(phrase.begin(), phrase.end(), trace.option_embeddings.row(o).begin());
    trace.option_tokens.push_back(std::move(tokens));
    trace.option_token_embeddings.push_back(std::move(m));
  }
  return trace;
}

inline FeatureVector featurize(const EmbeddingModel& model, const QAItem& item,
                               const FeaturizeOptions& options,
                               ItemTrace* trace_out = nullptr) {
  ItemTrace trace = trace_item(model, item);
  FeatureVector fv;
  fv.embedding_dim = model.dim();
  fv.question_pooling = options.question_pooling;
  fv.oov_tokens = trace.oov_tokens;
  fv.question_token_count = trace.question_tokens.size();
  fv.option_count = trace.option_tokens.size();
  fv.values = pool(trace.question_embeddings, options.question_pooling);
  if (trace.option_embeddings.rows() == 0) {
    fv.no_options = true;
    fv.values.resize(2 * model.dim(), 0.0);
  } else {
    const auto answer = pool(trace.option_embeddings, Pooling::kMean);
    fv.values.insert(fv.values.end(), answer.begin(), answer.end());
  }
  if (options.include_handcrafted) {
    const auto extra = handcrafted_features(item);
    fv.values.insert(fv.values.end(), extra.begin(), extra.end());
    fv.handcrafted_count = extra.size();
  }
  if (trace_out != nullptr) *trace_out = std::move(trace);
  return fv;
}

inline FeatureVector featurize(const EmbeddingModel& model, const QAItem& item) {
  return featurize(model, item, FeaturizeOptions{});
}

}  // namespace dbq
