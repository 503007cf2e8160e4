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

// Skip-gram with negative sampling, optionally with subword inputs.
//
// Each center token is represented by the average of its input rows (word row
// plus n-gram buckets, see EmbeddingModel::input_rows) and predicts every
// token within a randomly shrunk window. Negatives are drawn from the unigram
// distribution raised to 3/4. The learning rate decays linearly to 1e-4 of
// its initial value over all epochs. Training is single-threaded, so a fixed
// seed reproduces the model bit for bit.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dbq/embedding.hpp"
#include "dbq/error.hpp"
#include "dbq/matrix.hpp"
#include "dbq/random.hpp"
#include "dbq/text.hpp"

namespace dbq {

struct SgnsConfig {
  std::size_t dim = 128;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double learning_rate = 0.05;
  std::size_t min_count = 1;
  std::optional<SubwordConfig> subwords = SubwordConfig{};
  std::uint64_t seed = 1;
};

struct SgnsResult {
  EmbeddingModel model;
  Matrix context_vectors;  // output-side vectors, one row per vocabulary word
  std::vector<double> epoch_loss;  // mean loss per (center, target) update
};

namespace sgns_internal {

inline double sigmoid(double x) {
  if (x > 30.0) return 1.0;
  if (x < -30.0) return 0.0;
  return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace sgns_internal

inline SgnsResult train_sgns(const std::vector<std::vector<std::string>>& corpus,
                             const SgnsConfig& config) {
  using sgns_internal::sigmoid;
  if (config.dim == 0 || config.window < 1 || config.negatives < 0 ||
      config.epochs < 0 || !(config.learning_rate > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "invalid SGNS configuration");
  }
  if (corpus.empty()) fail(ErrorCode::kInvalidArgument, "training corpus is empty");

  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus) {
    for (const std::string& w : sentence) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> vocab;
  for (const auto& [word, n] : counts) {
    if (n >= config.min_count) vocab.emplace_back(word, n);
  }
  if (vocab.empty()) {
    fail(ErrorCode::kInvalidArgument,
         "empty vocabulary after min-count filtering (min_count=" +
             std::to_string(config.min_count) + ")");
  }
  std::stable_sort(vocab.begin(), vocab.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  const std::size_t dim = config.dim;
  Rng rng(derive_seed(config.seed, 0));
  EmbeddingModel model(dim);
  const double init_scale = 0.5 / static_cast<double>(dim);
  std::vector<double> row(dim);
  for (const auto& [word, n] : vocab) {
    for (double& v : row) v = rng.uniform(-init_scale, init_scale);
    model.add_word(word, row);
  }

  const std::size_t vocab_size = vocab.size();
  std::vector<std::vector<std::size_t>> inputs(vocab_size);
  if (config.subwords) {
    model.enable_subwords(*config.subwords);
    std::vector<std::size_t> used;
    for (std::size_t w = 0; w < vocab_size; ++w) {
      inputs[w] = model.input_rows(vocab[w].first);
      for (std::size_t r : inputs[w]) {
        if (r >= vocab_size) used.push_back(r - vocab_size);
      }
    }
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    for (std::size_t b : used) {
      for (double& v : row) v = rng.uniform(-init_scale, init_scale);
      model.set_bucket(b, row);
    }
  } else {
    for (std::size_t w = 0; w < vocab_size; ++w) inputs[w] = {w};
  }

  std::vector<double> cumulative(vocab_size);
  double total_weight = 0.0;
  for (std::size_t w = 0; w < vocab_size; ++w) {
    total_weight += std::pow(static_cast<double>(vocab[w].second), 0.75);
    cumulative[w] = total_weight;
  }
  auto draw_negative = [&](Rng& r) {
    const double u = r.uniform() * total_weight;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min<std::size_t>(it - cumulative.begin(), vocab_size - 1);
  };

  std::vector<std::vector<std::size_t>> sentences;
  std::size_t total_tokens = 0;
  for (const auto& sentence : corpus) {
    std::vector<std::size_t> ids;
    for (const std::string& w : sentence) {
      if (auto id = model.find(w)) ids.push_back(*id);
    }
    total_tokens += ids.size();
    if (ids.size() > 1) sentences.push_back(std::move(ids));
  }

  Matrix context(vocab_size, dim);
  std::vector<double> hidden(dim);
  std::vector<double> grad(dim);
  SgnsResult result{std::move(model), Matrix(), {}};
  EmbeddingModel& m = result.model;

  Rng train_rng(derive_seed(config.seed, 1));
  const double planned = static_cast<double>(config.epochs) *
                         static_cast<double>(std::max<std::size_t>(total_tokens, 1));
  std::size_t processed = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t updates = 0;
    for (const auto& ids : sentences) {
      for (std::size_t pos = 0; pos < ids.size(); ++pos, ++processed) {
        const double lr = config.learning_rate *
                          std::max(1e-4, 1.0 - static_cast<double>(processed) / planned);
        const std::size_t center = ids[pos];
        const auto& rows = inputs[center];
        const std::size_t span =
            1 + train_rng.index(static_cast<std::size_t>(config.window));
        const std::size_t lo = pos >= span ? pos - span : 0;
        const std::size_t hi = std::min(ids.size() - 1, pos + span);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          std::fill(hidden.begin(), hidden.end(), 0.0);
          for (std::size_t r : rows) {
            const auto src = m.row(r);
            for (std::size_t k = 0; k < dim; ++k) hidden[k] += src[k];
          }
          const double inv_rows = 1.0 / static_cast<double>(rows.size());
          for (double& h : hidden) h *= inv_rows;
          std::fill(grad.begin(), grad.end(), 0.0);

          auto update = [&](std::size_t target, double label) {
            auto out = context.row(target);
            double dot = 0.0;
            for (std::size_t k = 0; k < dim; ++k) dot += out[k] * hidden[k];
            const double score = sigmoid(dot);
            const double p = label > 0.5 ? score : 1.0 - score;
            loss_sum += -std::log(std::max(p, 1e-12));
            const double g = lr * (label - score);
            for (std::size_t k = 0; k < dim; ++k) {
              grad[k] += g * out[k];
              out[k] += g * hidden[k];
            }
          };

          const std::size_t target = ids[c];
          update(target, 1.0);
          for (int n = 0; n < config.negatives; ++n) {
            std::size_t neg = draw_negative(train_rng);
            if (neg == target) {
              if (vocab_size == 1) continue;
              do {
                neg = draw_negative(train_rng);
              } while (neg == target);
            }
            update(neg, 0.0);
          }
          ++updates;
          for (std::size_t r : rows) {
            auto dst = m.mutable_row(r);
            for (std::size_t k = 0; k < dim; ++k) {
              dst[k] += static_cast<float>(grad[k] * inv_rows);
            }
          }
        }
      }
    }
    const double mean_loss = updates > 0 ? loss_sum / static_cast<double>(updates) : 0.0;
    if (!std::isfinite(mean_loss)) {
      fail(ErrorCode::kNumeric, "SGNS loss became non-finite; lower the learning rate");
    }
    result.epoch_loss.push_back(mean_loss);
  }
  result.context_vectors = std::move(context);
  return result;
}

// Normalized token sequences for training, one per question and one per
// answer option.
template <class Items>
std::vector<std::vector<std::string>> training_sentences(const Items& items) {
  std::vector<std::vector<std::string>> out;
  auto add = [&](std::string_view text) {
    std::vector<std::string> words;
    for (const Token& t : tokenize(text)) {
      if (t.is_word()) words.push_back(t.normalized);
    }
    if (!words.empty()) out.push_back(std::move(words));
  };
  for (const auto& item : items) {
    add(item.question);
    for (const auto& o : item.options) add(o);
  }
  return out;
}

}  // namespace dbq
