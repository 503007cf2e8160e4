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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <json.hpp>

#include "dbq/error.hpp"
#include "dbq/matrix.hpp"
#include "dbq/random.hpp"

namespace dbq {

// Binary decision tree over dense features. Samples with
// x[feature] <= threshold go left.
struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;     // leaf output
  double impurity = 0.0;  // node impurity (Gini or mean squared error)
  double weight = 0.0;    // number of training samples reaching the node

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const TreeNode& n = nodes_[i];
      i = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
    }
    return nodes_[i].value;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::vector<TreeNode>& mutable_nodes() { return nodes_; }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes_[i].is_leaf()) {
        stack.emplace_back(nodes_[i].left, d + 1);
        stack.emplace_back(nodes_[i].right, d + 1);
      }
    }
    return best;
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
};

inline void to_json(nlohmann::json& j, const DecisionTree& tree) {
  // Columnar layout keeps bundles compact.
  nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                 left = nlohmann::json::array(), right = nlohmann::json::array(),
                 value = nlohmann::json::array();
  for (const TreeNode& n : tree.nodes()) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  j = {{"feature", feature}, {"threshold", threshold}, {"left", left},
       {"right", right}, {"value", value}};
}

inline void from_json(const nlohmann::json& j, DecisionTree& tree) {
  const auto& feature = j.at("feature");
  const std::size_t n = feature.size();
  std::vector<TreeNode> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i].feature = feature.at(i).get<std::int32_t>();
    nodes[i].threshold = j.at("threshold").at(i).get<double>();
    nodes[i].left = j.at("left").at(i).get<std::int32_t>();
    nodes[i].right = j.at("right").at(i).get<std::int32_t>();
    nodes[i].value = j.at("value").at(i).get<double>();
  }
  if (n == 0) fail(ErrorCode::kParse, "empty decision tree");
  for (std::size_t i = 0; i < n; ++i) {
    const TreeNode& t = nodes[i];
    if (t.is_leaf()) continue;
    const auto bad = [&](std::int32_t c) {
      return c <= static_cast<std::int32_t>(i) || c >= static_cast<std::int32_t>(n);
    };
    if (bad(t.left) || bad(t.right)) fail(ErrorCode::kParse, "malformed decision tree");
  }
  tree = DecisionTree(std::move(nodes));
}

namespace tree_internal {

// Midpoint that is guaranteed to separate a < b.
inline double split_point(double a, double b) {
  const double t = a + (b - a) / 2.0;
  return t < b ? t : a;
}

inline double gini(double pos, double n) {
  if (n <= 0.0) return 0.0;
  const double p = pos / n;
  return 2.0 * p * (1.0 - p);
}

}  // namespace tree_internal

struct CartParams {
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_leaf = 1;
  std::size_t mtry = 0;       // 0 = all features
};

// Gini-impurity classification tree. `samples` may contain repeats (bootstrap).
// A node is split only if some candidate strictly lowers the weighted Gini;
// leaves store the positive fraction of their samples. Constant features are
// not counted against mtry.
inline DecisionTree build_classification_tree(const Matrix& x,
                                              std::span<const int> y,
                                              std::vector<std::size_t> samples,
                                              const CartParams& params, Rng& rng) {
  using tree_internal::gini;
  const std::size_t dim = x.cols();
  const std::size_t mtry = params.mtry == 0 ? dim : std::min(params.mtry, dim);
  const std::size_t min_leaf = std::max<std::size_t>(params.min_leaf, 1);

  std::vector<TreeNode> nodes;
  struct Work {
    std::size_t node, begin, end, depth;
  };
  std::vector<Work> stack;
  nodes.emplace_back();
  stack.push_back({0, 0, samples.size(), 0});
  std::vector<std::size_t> features(dim);
  std::vector<std::size_t> order;

  while (!stack.empty()) {
    const Work w = stack.back();
    stack.pop_back();
    const std::size_t n = w.end - w.begin;
    double pos = 0.0;
    for (std::size_t i = w.begin; i < w.end; ++i) pos += y[samples[i]];
    const double parent = gini(pos, static_cast<double>(n));
    nodes[w.node].value = n > 0 ? pos / static_cast<double>(n) : 0.0;
    nodes[w.node].impurity = parent;
    nodes[w.node].weight = static_cast<double>(n);

    const bool depth_ok = params.max_depth == 0 || w.depth < params.max_depth;
    if (parent <= 0.0 || n < 2 * min_leaf || !depth_ok) continue;

    std::iota(features.begin(), features.end(), std::size_t{0});
    double best_score = parent * static_cast<double>(n);  // n * weighted gini
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;
    std::size_t evaluated = 0;
    for (std::size_t f_i = 0; f_i < dim && evaluated < mtry; ++f_i) {
      std::swap(features[f_i], features[f_i + rng.index(dim - f_i)]);
      const std::size_t f = features[f_i];
      order.assign(samples.begin() + w.begin, samples.begin() + w.end);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x(a, f) < x(b, f);
      });
      if (x(order.front(), f) == x(order.back(), f)) continue;
      ++evaluated;
      double left_pos = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        left_pos += y[order[k]];
        const double a = x(order[k], f), b = x(order[k + 1], f);
        const std::size_t nl = k + 1, nr = n - nl;
        if (a == b || nl < min_leaf || nr < min_leaf) continue;
        const double score = static_cast<double>(nl) * gini(left_pos, nl) +
                             static_cast<double>(nr) * gini(pos - left_pos, nr);
        if (score < best_score) {
          best_score = score;
          best_feature = static_cast<std::int32_t>(f);
          best_threshold = tree_internal::split_point(a, b);
        }
      }
    }
    // Require a strict decrease beyond rounding noise.
    if (best_feature < 0 ||
        !(best_score < parent * static_cast<double>(n) * (1.0 - 1e-12))) {
      continue;
    }

    auto mid = std::partition(samples.begin() + w.begin, samples.begin() + w.end,
                              [&](std::size_t s) { return x(s, best_feature) <= best_threshold; });
    const std::size_t split = static_cast<std::size_t>(mid - samples.begin());
    const auto left = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    nodes.emplace_back();
    nodes[w.node].feature = best_feature;
    nodes[w.node].threshold = best_threshold;
    nodes[w.node].left = left;
    nodes[w.node].right = left + 1;
    stack.push_back({static_cast<std::size_t>(left + 1), split, w.end, w.depth + 1});
    stack.push_back({static_cast<std::size_t>(left), w.begin, split, w.depth + 1});
  }
  return DecisionTree(std::move(nodes));
}

struct RegressionTreeParams {
  std::size_t max_depth = 3;
  std::size_t min_leaf = 1;
};

// Least-squares regression tree on `targets`, with Newton leaf values
// sum(targets) / sum(hessians). Used for the boosting stages.
inline DecisionTree build_regression_tree(const Matrix& x,
                                          std::span<const double> targets,
                                          std::span<const double> hessians,
                                          std::vector<std::size_t> samples,
                                          const RegressionTreeParams& params) {
  const std::size_t dim = x.cols();
  const std::size_t min_leaf = std::max<std::size_t>(params.min_leaf, 1);
  std::vector<TreeNode> nodes;
  struct Work {
    std::size_t node, begin, end, depth;
  };
  std::vector<Work> stack;
  nodes.emplace_back();
  stack.push_back({0, 0, samples.size(), 0});
  std::vector<std::size_t> order;

  while (!stack.empty()) {
    const Work w = stack.back();
    stack.pop_back();
    const std::size_t n = w.end - w.begin;
    double sum = 0.0, sum_sq = 0.0, hess = 0.0;
    for (std::size_t i = w.begin; i < w.end; ++i) {
      const double t = targets[samples[i]];
      sum += t;
      sum_sq += t * t;
      hess += hessians[samples[i]];
    }
    const double nn = static_cast<double>(n);
    nodes[w.node].value = sum / std::max(hess, 1e-12);
    nodes[w.node].impurity = n > 0 ? std::max(0.0, sum_sq / nn - (sum / nn) * (sum / nn)) : 0.0;
    nodes[w.node].weight = nn;
    if (n < 2 * min_leaf || w.depth >= params.max_depth) continue;
    if (nodes[w.node].impurity <= 1e-15 * (1.0 + sum_sq / nn)) continue;

    // Maximize sumL^2/nL + sumR^2/nR, equivalent to minimizing child SSE.
    // Zero-gain splits are allowed in impure nodes: on XOR-like data the
    // root split only pays off one level down.
    const double base = sum * sum / nn;
    double best_gain = -std::numeric_limits<double>::infinity();
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;
    for (std::size_t f = 0; f < dim; ++f) {
      order.assign(samples.begin() + w.begin, samples.begin() + w.end);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x(a, f) < x(b, f);
      });
      double left = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        left += targets[order[k]];
        const double a = x(order[k], f), b = x(order[k + 1], f);
        const std::size_t nl = k + 1, nr = n - nl;
        if (a == b || nl < min_leaf || nr < min_leaf) continue;
        const double right = sum - left;
        const double gain = left * left / static_cast<double>(nl) +
                            right * right / static_cast<double>(nr) - base;
        if (best_feature < 0 || gain > best_gain + 1e-12 * std::abs(best_gain) + 1e-15) {
          best_gain = gain;
          best_feature = static_cast<std::int32_t>(f);
          best_threshold = tree_internal::split_point(a, b);
        }
      }
    }
    if (best_feature < 0 || best_gain < -1e-12 * sum_sq) continue;
    auto mid = std::partition(samples.begin() + w.begin, samples.begin() + w.end,
                              [&](std::size_t s) { return x(s, best_feature) <= best_threshold; });
    const std::size_t split = static_cast<std::size_t>(mid - samples.begin());
    const auto left_node = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    nodes.emplace_back();
    nodes[w.node].feature = best_feature;
    nodes[w.node].threshold = best_threshold;
    nodes[w.node].left = left_node;
    nodes[w.node].right = left_node + 1;
    stack.push_back({static_cast<std::size_t>(left_node + 1), split, w.end, w.depth + 1});
    stack.push_back({static_cast<std::size_t>(left_node), w.begin, split, w.depth + 1});
  }
  return DecisionTree(std::move(nodes));
}

}  // namespace dbq
