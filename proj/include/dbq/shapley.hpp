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

// Shapley values of a scalar model with respect to a background set.
//
// The game is v(S) = mean_b f(x_S, b_rest): features in S take their value
// from the explained point, the others from a background row. Two solvers:
//
//  - estimate_shap: permutation sampling in blocks of 2D (rotations of one
//    random order and their reverses), block k played against background row
//    k mod |background|. Every block draws its permutation from its own
//    derived seed, so results do not depend on evaluation order. The base
//    value is the mean over all rows; the estimate is exactly efficient when
//    n_samples is a multiple of 2D |background|.
//  - exact_shap_small: weighted enumeration of all 2^D coalitions, used as the
//    reference for small D.

#pragma once

#include <algorithm>
#include <bit>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dbq/classify.hpp"
#include "dbq/error.hpp"
#include "dbq/matrix.hpp"
#include "dbq/random.hpp"

namespace dbq {

template <class F>
concept ScalarModel = requires(const F& f, std::span<const double> x) {
  { f(x) } -> std::convertible_to<double>;
};

struct ShapVector {
  std::vector<double> values;
  double base_value = 0.0;  // mean model output over the background
  std::string estimator;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  double total() const { return std::accumulate(values.begin(), values.end(), 0.0); }
};

inline constexpr std::size_t kMaxExactShapFeatures = 12;

namespace shap_internal {

inline void check_inputs(std::span<const double> x, const Matrix& background) {
  if (background.rows() == 0) fail(ErrorCode::kInvalidArgument, "background set is empty");
  if (background.cols() != x.size()) {
    fail(ErrorCode::kInvalidArgument, "background dimension " +
                                          std::to_string(background.cols()) +
                                          " does not match input dimension " +
                                          std::to_string(x.size()));
  }
}

template <ScalarModel F>
double mean_background_output(const F& f, const Matrix& background) {
  double s = 0.0;
  for (std::size_t b = 0; b < background.rows(); ++b) s += f(background.row(b));
  return s / static_cast<double>(background.rows());
}

}  // namespace shap_internal

template <ScalarModel F>
ShapVector estimate_shap(const F& f, std::span<const double> x, const Matrix& background,
                         std::size_t n_samples, std::uint64_t seed) {
  shap_internal::check_inputs(x, background);
  if (n_samples == 0) fail(ErrorCode::kInvalidArgument, "n_samples must be at least 1");
  const std::size_t dim = x.size();
  ShapVector out;
  out.values.assign(dim, 0.0);
  out.base_value = shap_internal::mean_background_output(f, background);
  out.estimator = "permutation";
  out.samples = n_samples;
  out.seed = seed;

  std::vector<std::size_t> base(dim), order(dim);
  std::vector<double> z(dim);
  auto play = [&](std::span<const double> b) {
    std::copy(b.begin(), b.end(), z.begin());
    double prev = f(std::span<const double>(z));
    for (const std::size_t i : order) {
      if (z[i] == x[i]) continue;  // marginal contribution is exactly zero
      z[i] = x[i];
      const double cur = f(std::span<const double>(z));
      out.values[i] += cur - prev;
      prev = cur;
    }
  };

  // Samples come in blocks of 2D: the D cyclic rotations of one random
  // permutation, each followed by its reverse. Every member is still a
  // uniform permutation, but each feature visits every position equally
  // often within a block. Block k imputes from background row k mod rows.
  const std::size_t block = 2 * dim;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const std::size_t k = s / block, r = s % block;
    if (r == 0) {
      Rng rng(derive_seed(seed, k));
      std::iota(base.begin(), base.end(), std::size_t{0});
      rng.shuffle(base);
    }
    const std::size_t shift = r / 2;
    for (std::size_t p = 0; p < dim; ++p) order[p] = base[(p + shift) % dim];
    if (r % 2 == 1) std::reverse(order.begin(), order.end());
    play(background.row(k % background.rows()));
  }
  for (double& v : out.values) v /= static_cast<double>(n_samples);
  return out;
}

template <ScalarModel F>
ShapVector exact_shap_small(const F& f, std::span<const double> x, const Matrix& background) {
  shap_internal::check_inputs(x, background);
  const std::size_t dim = x.size();
  if (dim > kMaxExactShapFeatures) {
    fail(ErrorCode::kInvalidArgument, "exact Shapley enumeration refused for D=" +
                                          std::to_string(dim) + " (limit " +
                                          std::to_string(kMaxExactShapFeatures) + ")");
  }
  const std::size_t subsets = std::size_t{1} << dim;
  std::vector<double> value(subsets, 0.0);
  std::vector<double> z(dim);
  for (std::size_t b = 0; b < background.rows(); ++b) {
    const auto row = background.row(b);
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      for (std::size_t i = 0; i < dim; ++i) z[i] = (mask >> i) & 1U ? x[i] : row[i];
      value[mask] += f(std::span<const double>(z));
    }
  }
  for (double& v : value) v /= static_cast<double>(background.rows());

  // weight[s] = s! (D - s - 1)! / D!
  std::vector<double> weight(dim, 0.0);
  for (std::size_t s = 0; s < dim; ++s) {
    double w = 1.0 / static_cast<double>(dim);
    // 1 / (D * C(D-1, s))
    for (std::size_t k = 1; k <= s; ++k) {
      w *= static_cast<double>(k) / static_cast<double>(dim - 1 - s + k);
    }
    weight[s] = w;
  }

  ShapVector out;
  out.values.assign(dim, 0.0);
  out.base_value = value[0];
  out.estimator = "exact";
  out.samples = subsets;
  for (std::size_t i = 0; i < dim; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      out.values[i] += weight[s] * (value[mask | bit] - value[mask]);
    }
  }
  return out;
}

// Positive-class probability as a ScalarModel.
inline auto probability_of(const TrainedModel& model) {
  return [&model](std::span<const double> x) { return model.predict_proba(x); };
}

}  // namespace dbq
