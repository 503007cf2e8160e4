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

// End-to-end training: corpus -> embedding -> features -> classifier.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbq/artifact.hpp"
#include "dbq/classify.hpp"
#include "dbq/corpus.hpp"
#include "dbq/featurize.hpp"
#include "dbq/sgns.hpp"

namespace dbq {

struct ClassifierParams {
  ModelKind kind = ModelKind::kRandomForest;
  ForestParams forest{};
  LogRegParams logreg{};
  GbtParams gbt{};
};

// The seed argument overrides the per-model seed.
inline TrainedModel train_classifier(const Dataset& data, const ClassifierParams& params,
                                     std::uint64_t seed) {
  switch (params.kind) {
    case ModelKind::kRandomForest: {
      ForestParams p = params.forest;
      p.seed = seed;
      return train_random_forest(data, p);
    }
    case ModelKind::kLogisticRegression: {
      LogRegParams p = params.logreg;
      p.seed = seed;
      return train_logreg(data, p);
    }
    case ModelKind::kGradientBoostedTrees: {
      GbtParams p = params.gbt;
      p.seed = seed;
      return train_gbt(data, p);
    }
  }
  fail(ErrorCode::kInternal, "unhandled model kind");
}

// Every item must carry a label.
inline Dataset featurize_corpus(const EmbeddingModel& embedding, const std::vector<QAItem>& items,
                                const FeaturizeOptions& options) {
  Dataset out;
  for (const QAItem& item : items) {
    if (!item.label) fail(ErrorCode::kInvalidArgument, "item \"" + item.id + "\" has no label");
    out.add(featurize(embedding, item, options).values, to_int(*item.label), item.id);
  }
  return out;
}

inline EmbeddingModel train_embedding(const std::vector<QAItem>& items, const SgnsConfig& config) {
  return train_sgns(training_sentences(items), config).model;
}

struct PipelineTrainConfig {
  SgnsConfig sgns{};
  FeaturizeOptions featurize{};
  ClassifierParams classifier{};
  double threshold = kDefaultThreshold;
  std::size_t background_rows = kDefaultBackgroundRows;
  std::uint64_t seed = 1;
};

// Sub-seeds: 0 embedding, 1 classifier, 2 background sample.
inline Pipeline train_pipeline_with(EmbeddingModel embedding, const std::vector<QAItem>& train,
                                    const PipelineTrainConfig& config) {
  const Dataset data = featurize_corpus(embedding, train, config.featurize);
  require_both_classes(data, "training set");
  TrainedModel model = train_classifier(data, config.classifier, derive_seed(config.seed, 1));
  Matrix background =
      sample_background(data.features, config.background_rows, derive_seed(config.seed, 2));
  return Pipeline{std::move(embedding), std::move(model),
                  PipelineConfig{config.featurize, config.threshold}, std::move(background), ""};
}

inline Pipeline train_pipeline(const std::vector<QAItem>& train, const PipelineTrainConfig& config) {
  SgnsConfig sgns = config.sgns;
  sgns.seed = derive_seed(config.seed, 0);
  return train_pipeline_with(train_embedding(train, sgns), train, config);
}

inline nlohmann::json to_json(const SgnsConfig& c) {
  nlohmann::json j{{"dim", c.dim},           {"window", c.window},
                   {"negatives", c.negatives}, {"epochs", c.epochs},
                   {"learning_rate", c.learning_rate}, {"min_count", c.min_count},
                   {"seed", c.seed},         {"subwords", nullptr}};
  if (c.subwords) {
    j["subwords"] = {{"min_n", c.subwords->min_n},
                     {"max_n", c.subwords->max_n},
                     {"buckets", c.subwords->buckets}};
  }
  return j;
}

inline nlohmann::json to_json(const ClassifierParams& c) {
  return {{"kind", std::string(model_kind_name(c.kind))},
          {"forest",
           {{"n_trees", c.forest.n_trees},
            {"max_depth", c.forest.max_depth},
            {"min_leaf", c.forest.min_leaf},
            {"mtry", c.forest.mtry},
            {"bootstrap", c.forest.bootstrap}}},
          {"logreg",
           {{"l2", c.logreg.l2},
            {"learning_rate", c.logreg.learning_rate},
            {"epochs", c.logreg.epochs}}},
          {"gbt",
           {{"n_stages", c.gbt.n_stages},
            {"learning_rate", c.gbt.learning_rate},
            {"max_depth", c.gbt.max_depth},
            {"min_leaf", c.gbt.min_leaf},
            {"subsample", c.gbt.subsample}}}};
}

}  // namespace dbq
