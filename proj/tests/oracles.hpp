/*
 * Copyright 2026 The scoutval Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Slow reference implementations shared by the unit and acceptance tests.
// Nothing here calls into the attribution code it checks.

#pragma once

#include <cmath>
#include <vector>

#include "scoutval/common.hpp"
#include "scoutval/gbt.hpp"
#include "scoutval/matrix.hpp"

namespace scoutval::oracle {

// Exhaustive-subset interventional Shapley values of the model margin.
// v(S) = mean over background rows z of f(x_S, z_rest).
inline std::vector<double> brute_force_shapley(const GbtModel& model, std::span<const double> x,
                                               const Matrix& background) {
  const std::size_t d = x.size();
  const std::size_t subsets = std::size_t{1} << d;
  std::vector<double> value(subsets, 0.0);
  std::vector<double> hybrid(d);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    double sum = 0.0;
    for (std::size_t r = 0; r < background.rows(); ++r) {
      for (std::size_t j = 0; j < d; ++j) hybrid[j] = (mask >> j) & 1 ? x[j] : background(r, j);
      sum += model.predict_margin(hybrid);
    }
    value[mask] = sum / static_cast<double>(background.rows());
  }
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t k = 1; k <= d; ++k) fact[k] = fact[k - 1] * static_cast<double>(k);
  std::vector<double> phi(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if ((mask >> i) & 1) continue;
      const auto s = static_cast<std::size_t>(__builtin_popcountll(mask));
      const double w = fact[s] * fact[d - s - 1] / fact[d];
      phi[i] += w * (value[mask | (std::size_t{1} << i)] - value[mask]);
    }
  }
  return phi;
}

// A random tree of at most `depth` levels over `d` features, leaves in
// [-1, 1], thresholds in [-1.5, 1.5].
inline void grow_random(Tree& t, int id, int depth, std::size_t d, Rng& rng) {
  if (depth == 0 || rng.uniform() < 0.2) {
    t.nodes[static_cast<std::size_t>(id)].value = rng.uniform(-1.0, 1.0);
    t.nodes[static_cast<std::size_t>(id)].cover = 1.0;
    return;
  }
  const int l = static_cast<int>(t.nodes.size());
  t.nodes.push_back(TreeNode{});
  t.nodes.push_back(TreeNode{});
  TreeNode& n = t.nodes[static_cast<std::size_t>(id)];
  n.feature = static_cast<int>(rng.below(d));
  n.threshold = rng.uniform(-1.5, 1.5);
  n.left = l;
  n.right = l + 1;
  n.missing_goes = rng.uniform() < 0.5 ? MissingGoes::kLeft : MissingGoes::kRight;
  grow_random(t, l, depth - 1, d, rng);
  grow_random(t, l + 1, depth - 1, d, rng);
}

inline GbtModel random_ensemble(std::size_t d, int max_depth, int n_trees, Rng& rng) {
  GbtModel m;
  m.base_score = rng.normal();
  for (std::size_t j = 0; j < d; ++j) m.feature_names.push_back("f" + std::to_string(j));
  for (int k = 0; k < n_trees; ++k) {
    Tree t;
    t.nodes.push_back(TreeNode{});
    grow_random(t, 0, max_depth, d, rng);
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace scoutval::oracle
