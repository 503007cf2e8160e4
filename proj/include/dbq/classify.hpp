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

// Binary classifiers: random forest, L2 logistic regression and gradient
// boosted regression trees, behind one TrainedModel type.
//
// Classifier files are JSON:
//   {"format": "dbq-classifier", "version": 1, "kind": "...", "seed": u64,
//    "dim": D, "params": {...}}
// Doubles are written in shortest round-trip form, so a reloaded model
// predicts bit-identically.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dbq/error.hpp"
#include "dbq/matrix.hpp"
#include "dbq/random.hpp"
#include "dbq/tree.hpp"

namespace dbq {

struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> ids;  // optional, parallel to rows when present

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  bool empty() const { return labels.empty(); }

  void add(std::span<const double> x, int label, std::string id = {}) {
    if (label != 0 && label != 1) {
      fail(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    }
    if (!empty() && x.size() != dim()) {
      fail(ErrorCode::kInvalidArgument, "row dimension " + std::to_string(x.size()) +
                                            " does not match dataset dimension " +
                                            std::to_string(dim()));
    }
    features.append_row(x);
    labels.push_back(label);
    ids.push_back(std::move(id));
  }

  std::size_t positives() const {
    std::size_t n = 0;
    for (int y : labels) n += static_cast<std::size_t>(y);
    return n;
  }
};

inline void require_both_classes(const Dataset& data, std::string_view who) {
  if (data.empty()) fail(ErrorCode::kInvalidArgument, std::string(who) + ": empty dataset");
  const std::size_t pos = data.positives();
  if (pos == 0 || pos == data.size()) {
    fail(ErrorCode::kInvalidArgument,
         std::string(who) + ": training data must contain both classes");
  }
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// --- random forest --------------------------------------------------------

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;  // unlimited
  std::size_t min_leaf = 1;
  std::size_t mtry = 0;       // 0 = ceil(sqrt(D))
  bool bootstrap = true;
  std::uint64_t seed = 1;
};

struct RandomForest {
  std::vector<DecisionTree> trees;

  // Mean leaf positive fraction. Fully grown trees have pure leaves, so this
  // is the fraction of trees voting positive.
  double predict_proba(std::span<const double> x) const {
    double s = 0.0;
    for (const DecisionTree& t : trees) s += t.predict(x);
    return trees.empty() ? 0.0 : s / static_cast<double>(trees.size());
  }
  friend bool operator==(const RandomForest&, const RandomForest&) = default;
};

inline RandomForest fit_random_forest(const Dataset& data, const ForestParams& params) {
  require_both_classes(data, "random forest");
  if (params.n_trees == 0) fail(ErrorCode::kInvalidArgument, "n_trees must be positive");
  CartParams cart;
  cart.max_depth = params.max_depth;
  cart.min_leaf = params.min_leaf;
  cart.mtry = params.mtry != 0
                  ? params.mtry
                  : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(data.dim()))));
  RandomForest forest;
  const std::size_t n = data.size();
  // Each tree owns a derived stream, so trees are independent of training
  // order.
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(params.seed, t));
    std::vector<std::size_t> samples(n);
    for (std::size_t i = 0; i < n; ++i) samples[i] = params.bootstrap ? rng.index(n) : i;
    forest.trees.push_back(
        build_classification_tree(data.features, data.labels, std::move(samples), cart, rng));
  }
  return forest;
}

// --- logistic regression --------------------------------------------------

struct LogRegParams {
  double l2 = 1e-3;
  double learning_rate = 0.5;
  std::size_t epochs = 300;
  std::uint64_t seed = 1;
};

struct LogisticRegression {
  std::vector<double> mean;   // per-feature standardization
  std::vector<double> scale;
  std::vector<double> weights;
  double bias = 0.0;

  double decision(std::span<const double> x) const {
    double z = bias;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      z += weights[k] * (x[k] - mean[k]) / scale[k];
    }
    return z;
  }
  double predict_proba(std::span<const double> x) const { return sigmoid(decision(x)); }
  friend bool operator==(const LogisticRegression&, const LogisticRegression&) = default;
};

struct LogisticObjective {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

// Mean log-loss plus (l2 / 2) * |w|^2 on already standardized rows; the bias
// is not penalized.
inline LogisticObjective logistic_objective(std::span<const double> weights, double bias,
                                            const Matrix& x, std::span<const int> y,
                                            double l2) {
  LogisticObjective out;
  out.grad_weights.assign(weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    double z = bias;
    for (std::size_t k = 0; k < weights.size(); ++k) z += weights[k] * row[k];
    out.loss += (y[i] == 1 ? softplus(-z) : softplus(z)) * inv_n;
    const double r = (sigmoid(z) - y[i]) * inv_n;
    for (std::size_t k = 0; k < weights.size(); ++k) out.grad_weights[k] += r * row[k];
    out.grad_bias += r;
  }
  double sq = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    sq += weights[k] * weights[k];
    out.grad_weights[k] += l2 * weights[k];
  }
  out.loss += 0.5 * l2 * sq;
  return out;
}

inline Matrix standardize(const Matrix& x, std::vector<double>& mean,
                          std::vector<double>& scale) {
  const std::size_t n = x.rows(), d = x.cols();
  mean.assign(d, 0.0);
  scale.assign(d, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += x(i, k);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double c = x(i, k) - mean[k];
      var[k] += c * c;
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    const double sd = std::sqrt(var[k] / static_cast<double>(n));
    scale[k] = sd > 1e-12 ? sd : 1.0;
  }
  Matrix z(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) z(i, k) = (x(i, k) - mean[k]) / scale[k];
  }
  return z;
}

// Full-batch proximal gradient descent: a gradient step on the log-loss
// followed by the closed-form shrinkage for the L2 term, which stays stable
// for arbitrarily large l2.
inline LogisticRegression fit_logistic_regression(const Dataset& data,
                                                  const LogRegParams& params) {
  require_both_classes(data, "logistic regression");
  if (!(params.learning_rate > 0.0) || params.l2 < 0.0) {
    fail(ErrorCode::kInvalidArgument, "logistic regression needs lr > 0 and l2 >= 0");
  }
  LogisticRegression model;
  const Matrix z = standardize(data.features, model.mean, model.scale);
  model.weights.assign(data.dim(), 0.0);
  const double shrink = 1.0 / (1.0 + params.learning_rate * params.l2);
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    const LogisticObjective obj = logistic_objective(model.weights, model.bias, z,
                                                     data.labels, 0.0);
    if (!std::isfinite(obj.loss)) {
      fail(ErrorCode::kNumeric, "logistic regression diverged (non-finite loss); "
                                "try a smaller learning rate");
    }
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
      model.weights[k] = (model.weights[k] - params.learning_rate * obj.grad_weights[k]) * shrink;
    }
    model.bias -= params.learning_rate * obj.grad_bias;
    for (double w : model.weights) {
      if (!std::isfinite(w)) {
        fail(ErrorCode::kNumeric, "logistic regression diverged (non-finite weights); "
                                  "try a smaller learning rate");
      }
    }
  }
  return model;
}

// --- gradient boosted trees -----------------------------------------------

struct GbtParams {
  std::size_t n_stages = 100;
  double learning_rate = 0.1;
  std::size_t max_depth = 3;
  std::size_t min_leaf = 1;
  double subsample = 1.0;
  std::uint64_t seed = 1;
};

struct GradientBoostedTrees {
  double base_score = 0.0;  // log-odds of the training prior
  std::vector<DecisionTree> stages;  // leaf values already include shrinkage
  std::vector<double> train_loss;    // after base score, then after each stage

  double decision(std::span<const double> x) const {
    double f = base_score;
    for (const DecisionTree& t : stages) f += t.predict(x);
    return f;
  }
  double predict_proba(std::span<const double> x) const { return sigmoid(decision(x)); }
  friend bool operator==(const GradientBoostedTrees&, const GradientBoostedTrees&) = default;
};

// Stagewise fit of regression trees to the negative log-loss gradient with
// Newton leaf values. A stage that would raise the training loss is shrunk
// by halving until it does not, so the recorded loss never increases.
inline GradientBoostedTrees fit_gradient_boosted_trees(const Dataset& data,
                                                       const GbtParams& params) {
  require_both_classes(data, "gradient boosted trees");
  const std::size_t n = data.size();
  const double prior = static_cast<double>(data.positives()) / static_cast<double>(n);
  GradientBoostedTrees model;
  model.base_score = std::log(prior / (1.0 - prior));

  std::vector<double> score(n, model.base_score);
  auto mean_loss = [&](const std::vector<double>& s) {
    double l = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      l += data.labels[i] == 1 ? softplus(-s[i]) : softplus(s[i]);
    }
    return l / static_cast<double>(n);
  };
  double loss = mean_loss(score);
  model.train_loss.push_back(loss);

  Rng rng(derive_seed(params.seed, 0));
  std::vector<double> residual(n), hessian(n), trial(n), delta(n);
  RegressionTreeParams tree_params{params.max_depth, params.min_leaf};
  for (std::size_t stage = 0; stage < params.n_stages; ++stage) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(score[i]);
      residual[i] = data.labels[i] - p;
      hessian[i] = p * (1.0 - p);
    }
    std::vector<std::size_t> samples;
    for (std::size_t i = 0; i < n; ++i) {
      if (params.subsample >= 1.0 || rng.bernoulli(params.subsample)) samples.push_back(i);
    }
    if (samples.empty()) samples.push_back(rng.index(n));
    DecisionTree tree =
        build_regression_tree(data.features, residual, hessian, std::move(samples), tree_params);
    for (std::size_t i = 0; i < n; ++i) delta[i] = tree.predict(data.features.row(i));

    double shrink = params.learning_rate;
    double trial_loss = loss;
    bool accepted = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = score[i] + shrink * delta[i];
      trial_loss = mean_loss(trial);
      if (trial_loss <= loss) {
        accepted = true;
        break;
      }
      shrink *= 0.5;
    }
    if (!accepted) shrink = 0.0;
    for (TreeNode& node : tree.mutable_nodes()) node.value *= shrink;
    if (accepted) {
      score.swap(trial);
      loss = trial_loss;
    }
    model.stages.push_back(std::move(tree));
    model.train_loss.push_back(loss);
  }
  return model;
}

// --- the common model type ------------------------------------------------

enum class ModelKind { kRandomForest, kLogisticRegression, kGradientBoostedTrees };

inline std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kRandomForest: return "random_forest";
    case ModelKind::kLogisticRegression: return "logistic_regression";
    case ModelKind::kGradientBoostedTrees: return "gradient_boosted_trees";
  }
  return "random_forest";
}

inline ModelKind parse_model_kind(std::string_view name) {
  if (name == "random_forest" || name == "rf") return ModelKind::kRandomForest;
  if (name == "logistic_regression" || name == "logreg") return ModelKind::kLogisticRegression;
  if (name == "gradient_boosted_trees" || name == "gbt") return ModelKind::kGradientBoostedTrees;
  fail(ErrorCode::kInvalidArgument, "unknown model kind \"" + std::string(name) + "\"");
}

inline constexpr double kDefaultThreshold = 0.5;

class TrainedModel {
 public:
  using Params = std::variant<RandomForest, LogisticRegression, GradientBoostedTrees>;

  TrainedModel(Params params, std::uint64_t seed, std::size_t dim)
      : params_(std::move(params)), seed_(seed), dim_(dim) {}

  ModelKind kind() const { return static_cast<ModelKind>(params_.index()); }
  std::uint64_t seed() const { return seed_; }
  std::size_t dim() const { return dim_; }
  const Params& params() const { return params_; }

  double predict_proba(std::span<const double> x) const {
    if (x.size() != dim_) {
      fail(ErrorCode::kInvalidArgument, "feature dimension " + std::to_string(x.size()) +
                                            " does not match model dimension " +
                                            std::to_string(dim_));
    }
    const double p = std::visit([&](const auto& m) { return m.predict_proba(x); }, params_);
    return std::clamp(p, 0.0, 1.0);
  }

  int predict_label(std::span<const double> x, double threshold = kDefaultThreshold) const {
    return predict_proba(x) >= threshold ? 1 : 0;
  }

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;

 private:
  Params params_;
  std::uint64_t seed_;
  std::size_t dim_;
};

inline TrainedModel train_random_forest(const Dataset& data, const ForestParams& params) {
  return TrainedModel(fit_random_forest(data, params), params.seed, data.dim());
}

inline TrainedModel train_logreg(const Dataset& data, const LogRegParams& params) {
  return TrainedModel(fit_logistic_regression(data, params), params.seed, data.dim());
}

inline TrainedModel train_gbt(const Dataset& data, const GbtParams& params) {
  return TrainedModel(fit_gradient_boosted_trees(data, params), params.seed, data.dim());
}

inline nlohmann::json to_json(const TrainedModel& model) {
  nlohmann::json params;
  switch (model.kind()) {
    case ModelKind::kRandomForest: {
      const auto& f = std::get<RandomForest>(model.params());
      params["trees"] = f.trees;
      break;
    }
    case ModelKind::kLogisticRegression: {
      const auto& m = std::get<LogisticRegression>(model.params());
      params = {{"mean", m.mean}, {"scale", m.scale}, {"weights", m.weights},
                {"bias", m.bias}};
      break;
    }
    case ModelKind::kGradientBoostedTrees: {
      const auto& g = std::get<GradientBoostedTrees>(model.params());
      params = {{"base_score", g.base_score}, {"stages", g.stages},
                {"train_loss", g.train_loss}};
      break;
    }
  }
  return {{"format", "dbq-classifier"}, {"version", 1},
          {"kind", model_kind_name(model.kind())}, {"seed", model.seed()},
          {"dim", model.dim()}, {"params", params}};
}

inline TrainedModel trained_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "dbq-classifier") fail(ErrorCode::kParse, "not a dbq classifier");
    if (j.at("version") != 1) fail(ErrorCode::kParse, "unsupported classifier version");
    const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto seed = j.at("seed").get<std::uint64_t>();
    const auto dim = j.at("dim").get<std::size_t>();
    const auto& p = j.at("params");
    const auto check_len = [&](std::size_t n, const char* what) {
      if (n != dim) fail(ErrorCode::kParse, std::string("classifier field ") + what +
                                                " has wrong length");
    };
    switch (kind) {
      case ModelKind::kRandomForest: {
        RandomForest f;
        f.trees = p.at("trees").get<std::vector<DecisionTree>>();
        return TrainedModel(std::move(f), seed, dim);
      }
      case ModelKind::kLogisticRegression: {
        LogisticRegression m;
        m.mean = p.at("mean").get<std::vector<double>>();
        m.scale = p.at("scale").get<std::vector<double>>();
        m.weights = p.at("weights").get<std::vector<double>>();
        m.bias = p.at("bias").get<double>();
        check_len(m.mean.size(), "mean");
        check_len(m.scale.size(), "scale");
        check_len(m.weights.size(), "weights");
        return TrainedModel(std::move(m), seed, dim);
      }
      case ModelKind::kGradientBoostedTrees: {
        GradientBoostedTrees g;
        g.base_score = p.at("base_score").get<double>();
        g.stages = p.at("stages").get<std::vector<DecisionTree>>();
        g.train_loss = p.at("train_loss").get<std::vector<double>>();
        return TrainedModel(std::move(g), seed, dim);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed classifier: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParse) throw;
    fail(ErrorCode::kParse, std::string("malformed classifier: ") + e.what());
  }
  fail(ErrorCode::kParse, "malformed classifier");
}

}  // namespace dbq
