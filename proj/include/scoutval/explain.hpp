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

// Exact interventional Shapley values for tree ensembles.
//
// For one explained row x and one background row z, the value of a feature
// coalition S is f evaluated on the hybrid row taking S from x and the rest
// from z. Within a tree, a leaf is reachable by the hybrid iff the coalition
// contains every feature A on the path where only x's branch leads to the
// leaf, and none of the features B where only z's branch does. That leaf's
// game has a closed form Shapley value:
//
//   phi_f = +v (|A|-1)! |B|! / (|A|+|B|)!   for f in A
//   phi_f = -v |A|! (|B|-1)! / (|A|+|B|)!   for f in B
//
// so one joint descent of x and z through the tree, branching only where
// they disagree on an undecided feature, yields exact values. Results are
// averaged over the background set and summed over trees (Shapley values
// are linear in the model).

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scoutval/csv.hpp"
#include "scoutval/features.hpp"
#include "scoutval/gbt.hpp"
#include "scoutval/matrix.hpp"

namespace scoutval {

struct Attribution {
  std::string player_id;
  double base_value = 0.0;
  std::vector<std::string> feature_names;
  std::vector<double> feature_values;
  std::vector<double> contributions;
  double prediction = 0.0;  // model margin on the explained row
};

namespace detail {

class InterventionalShap {
 public:
  InterventionalShap(const GbtModel& model) : model_(model) {
    std::size_t max_depth = 0;
    for (const auto& t : model.trees) max_depth = std::max<std::size_t>(max_depth, t.depth());
    const std::size_t n = max_depth + 2;
    weight_.assign(n, std::vector<double>(n, 0.0));
    // weight_[a][b] = a! b! / (a + b + 1)!
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b + a < n; ++b) {
        weight_[a][b] = std::exp(std::lgamma(static_cast<double>(a + 1)) +
                                 std::lgamma(static_cast<double>(b + 1)) -
                                 std::lgamma(static_cast<double>(a + b + 2)));
      }
    }
    side_.assign(model.feature_names.size(), kUndecided);
  }

  // Adds phi(x | z) for every tree into `phi`.
  void accumulate(std::span<const double> x, std::span<const double> z, std::vector<double>& phi) {
    for (const auto& tree : model_.trees) {
      descend(tree, 0, x, z, phi);
    }
  }

 private:
  static constexpr char kUndecided = 0;
  static constexpr char kForeground = 1;
  static constexpr char kBackground = 2;

  static int child(const TreeNode& node, double v) {
    if (std::isnan(v)) return node.missing_goes == MissingGoes::kLeft ? node.left : node.right;
    return v < node.threshold ? node.left : node.right;
  }

  void descend(const Tree& tree, int id, std::span<const double> x, std::span<const double> z,
               std::vector<double>& phi) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf()) {
      const std::size_t a = fg_.size(), b = bg_.size();
      if (a + b == 0) return;
      if (a > 0) {
        const double w = node.value * weight_[a - 1][b];
        for (int f : fg_) phi[static_cast<std::size_t>(f)] += w;
      }
      if (b > 0) {
        const double w = node.value * weight_[a][b - 1];
        for (int f : bg_) phi[static_cast<std::size_t>(f)] -= w;
      }
      return;
    }
    const auto f = static_cast<std::size_t>(node.feature);
    const int xc = child(node, x[f]);
    const int zc = child(node, z[f]);
    if (side_[f] == kForeground) return descend(tree, xc, x, z, phi);
    if (side_[f] == kBackground) return descend(tree, zc, x, z, phi);
    if (xc == zc) return descend(tree, xc, x, z, phi);

    side_[f] = kForeground;
    fg_.push_back(node.feature);
    descend(tree, xc, x, z, phi);
    fg_.pop_back();
    side_[f] = kBackground;
    bg_.push_back(node.feature);
    descend(tree, zc, x, z, phi);
    bg_.pop_back();
    side_[f] = kUndecided;
  }

  const GbtModel& model_;
  std::vector<std::vector<double>> weight_;
  std::vector<char> side_;
  std::vector<int> fg_, bg_;
};

}  // namespace detail

// Attributions of the model margin for row `x` against `background` (both
// in the model's column order).
inline Attribution shap_values(const GbtModel& model, std::span<const double> x,
                               const Matrix& background) {
  if (background.rows() == 0) throw DomainError("SHAP background set is empty");
  if (background.names() != model.feature_names) {
    throw DomainError("background columns do not match the model");
  }
  const std::size_t d = model.feature_names.size();
  Attribution out;
  out.feature_names = model.feature_names;
  out.feature_values.assign(x.begin(), x.end());
  out.contributions.assign(d, 0.0);
  out.prediction = model.predict_margin(x);

  detail::InterventionalShap engine(model);
  double base = 0.0;
  for (std::size_t i = 0; i < background.rows(); ++i) {
    engine.accumulate(x, background.row(i), out.contributions);
    base += model.predict_margin(background.row(i));
  }
  const double n = static_cast<double>(background.rows());
  for (double& c : out.contributions) c /= n;
  out.base_value = base / n;
  return out;
}

inline Attribution shap_values(const GbtModel& model, const FeatureRow& row,
                               std::span<const FeatureRow> background) {
  if (background.empty()) throw DomainError("SHAP background set is empty");
  Matrix bg(model.feature_names, background.size());
  for (std::size_t i = 0; i < background.size(); ++i) {
    const auto v = align_features(model.feature_names, background[i].feature_names(),
                                  background[i].feature_values());
    std::copy(v.begin(), v.end(), bg.row_ptr(i));
  }
  const auto x = align_features(model.feature_names, row.feature_names(), row.feature_values());
  Attribution a = shap_values(model, x, bg);
  a.player_id = row.player_id;
  return a;
}

inline constexpr std::size_t kMaxBackgroundRows = 256;

// Seeded sample of at most `max_rows` row indices, ascending.
inline std::vector<std::size_t> sample_background(std::size_t n, std::uint64_t seed,
                                                  std::size_t max_rows = kMaxBackgroundRows) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (n <= max_rows) return idx;
  Rng rng(seed);
  for (std::size_t i = 0; i < max_rows; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct ImportanceEntry {
  std::string feature;
  double mean_abs_contribution = 0.0;
};

using GlobalImportance = std::vector<ImportanceEntry>;

inline GlobalImportance global_importance(std::span<const Attribution> attributions) {
  if (attributions.empty()) throw DomainError("global_importance of an empty list");
  const auto& names = attributions.front().feature_names;
  std::vector<double> sum(names.size(), 0.0);
  for (const auto& a : attributions) {
    if (a.feature_names != names) throw DomainError("attributions have different feature sets");
    for (std::size_t j = 0; j < names.size(); ++j) sum[j] += std::abs(a.contributions[j]);
  }
  GlobalImportance out;
  for (std::size_t j = 0; j < names.size(); ++j) {
    out.push_back({names[j], sum[j] / static_cast<double>(attributions.size())});
  }
  std::sort(out.begin(), out.end(), [](const ImportanceEntry& a, const ImportanceEntry& b) {
    if (a.mean_abs_contribution != b.mean_abs_contribution) {
      return a.mean_abs_contribution > b.mean_abs_contribution;
    }
    return a.feature < b.feature;
  });
  return out;
}

// player_id,feature,feature_value,shap_value; one line per (row, feature).
inline std::string summary_to_csv(std::span<const Attribution> attributions) {
  csv::Writer w;
  w.row({"player_id", "feature", "feature_value", "shap_value"});
  for (const auto& a : attributions) {
    for (std::size_t j = 0; j < a.feature_names.size(); ++j) {
      w.row({a.player_id, a.feature_names[j], format_double(a.feature_values[j]),
             format_double(a.contributions[j])});
    }
  }
  return w.str();
}

inline void export_summary(std::span<const Attribution> attributions, const std::string& path) {
  write_file(path, summary_to_csv(attributions));
}

// rank,feature,mean_abs_shap
inline std::string importance_to_csv(const GlobalImportance& importance) {
  csv::Writer w;
  w.row({"rank", "feature", "mean_abs_shap"});
  for (std::size_t i = 0; i < importance.size(); ++i) {
    w.row({std::to_string(i + 1), importance[i].feature,
           format_double(importance[i].mean_abs_contribution)});
  }
  return w.str();
}

inline nlohmann::json to_json(const Attribution& a) {
  nlohmann::json contributions = nlohmann::json::array();
  for (std::size_t j = 0; j < a.feature_names.size(); ++j) {
    contributions.push_back({{"feature", a.feature_names[j]},
                             {"feature_value", a.feature_values[j]},
                             {"shap_value", a.contributions[j]}});
  }
  return {{"player_id", a.player_id},
          {"base_value", a.base_value},
          {"prediction", a.prediction},
          {"contributions", std::move(contributions)}};
}

inline Attribution attribution_from_json(const nlohmann::json& j) {
  Attribution a;
  a.player_id = j.at("player_id").get<std::string>();
  a.base_value = j.at("base_value").get<double>();
  a.prediction = j.at("prediction").get<double>();
  for (const auto& c : j.at("contributions")) {
    a.feature_names.push_back(c.at("feature").get<std::string>());
    a.feature_values.push_back(c.at("feature_value").get<double>());
    a.contributions.push_back(c.at("shap_value").get<double>());
  }
  return a;
}

}  // namespace scoutval
