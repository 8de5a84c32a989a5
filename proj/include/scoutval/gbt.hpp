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

// Gradient-boosted regression trees with exact greedy split search.
//
// Both objectives are fitted by second-order boosting: every round computes
// per-row gradients g and hessians h of the loss at the current margin, grows
// one depth-limited tree on a seeded row subsample maximizing
//
//   gain = G_L^2 / H_L + G_R^2 / H_R - G^2 / H
//
// and sets each leaf to -learning_rate * G / H. For squared error (h = 1)
// this is exactly the reduction in residual sum of squares and the leaf is
// the mean residual.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "scoutval/common.hpp"
#include "scoutval/features.hpp"
#include "scoutval/matrix.hpp"

namespace scoutval {

enum class Objective { kSquaredError, kLogistic };

inline std::string_view to_string(Objective o) {
  return o == Objective::kLogistic ? "logistic" : "squared_error";
}

enum class MissingGoes { kLeft, kRight };

// Flat node storage; children are indices into Tree::nodes.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  MissingGoes missing_goes = MissingGoes::kLeft;
  double value = 0.0;  // leaf output, learning rate folded in
  double cover = 0.0;  // hessian sum of training rows reaching the node

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int leaf_index(std::span<const double> x) const {
    int n = 0;
    while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
      const TreeNode& node = nodes[static_cast<std::size_t>(n)];
      const double v = x[static_cast<std::size_t>(node.feature)];
      if (std::isnan(v)) {
        n = node.missing_goes == MissingGoes::kLeft ? node.left : node.right;
      } else {
        n = v < node.threshold ? node.left : node.right;
      }
    }
    return n;
  }
  double predict(std::span<const double> x) const {
    return nodes[static_cast<std::size_t>(leaf_index(x))].value;
  }
  int depth() const { return depth_of(0); }

  bool operator==(const Tree&) const = default;

 private:
  int depth_of(int n) const {
    const TreeNode& node = nodes[static_cast<std::size_t>(n)];
    if (node.is_leaf()) return 0;
    return 1 + std::max(depth_of(node.left), depth_of(node.right));
  }
};

struct TrainConfig {
  int n_trees = 500;
  double learning_rate = 0.05;
  int max_depth = 6;
  double subsample = 0.8;
  double min_child_cover = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_trees < 1) throw DomainError("n_trees must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
      throw DomainError("learning_rate must be in (0, 1]");
    }
    if (!(subsample > 0.0 && subsample <= 1.0)) throw DomainError("subsample must be in (0, 1]");
    if (max_depth < 0) throw DomainError("max_depth must be >= 0");
    if (!(min_child_cover >= 0.0)) throw DomainError("min_child_cover must be >= 0");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"n_trees", c.n_trees},     {"learning_rate", c.learning_rate},
          {"max_depth", c.max_depth}, {"subsample", c.subsample},
          {"min_child_cover", c.min_child_cover}, {"seed", c.seed}};
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct GbtModel {
  Objective objective = Objective::kSquaredError;
  double base_score = 0.0;
  double learning_rate = 0.05;
  std::vector<std::string> feature_names;
  std::vector<Tree> trees;

  // Raw additive score: base_score + sum of leaf values.
  double predict_margin(std::span<const double> x) const {
    double s = base_score;
    for (const auto& t : trees) s += t.predict(x);
    return s;
  }
  // Regression: the margin. Logistic: probability.
  double predict_values(std::span<const double> x) const {
    const double m = predict_margin(x);
    return objective == Objective::kLogistic ? sigmoid(m) : m;
  }

  bool operator==(const GbtModel&) const = default;
};

// Re-orders a row's named values into the model's column order. Names the
// row does not carry become NaN and follow each node's missing branch.
inline std::vector<double> align_features(const std::vector<std::string>& model_names,
                                          const std::vector<std::string>& row_names,
                                          const std::vector<double>& row_values) {
  if (model_names == row_names) return row_values;
  std::unordered_map<std::string_view, double> by_name;
  for (std::size_t i = 0; i < row_names.size(); ++i) by_name[row_names[i]] = row_values[i];
  std::vector<double> out(model_names.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < model_names.size(); ++j) {
    if (auto it = by_name.find(model_names[j]); it != by_name.end()) out[j] = it->second;
  }
  return out;
}

inline double predict(const GbtModel& model, const FeatureRow& row) {
  return model.predict_values(
      align_features(model.feature_names, row.feature_names(), row.feature_values()));
}

inline double predict_margin(const GbtModel& model, const FeatureRow& row) {
  return model.predict_margin(
      align_features(model.feature_names, row.feature_names(), row.feature_values()));
}

inline std::vector<double> predict_all(const GbtModel& model, const Matrix& x) {
  std::vector<double> out(x.rows());
  if (x.names() == model.feature_names) {
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = model.predict_values(x.row(i));
    return out;
  }
  std::vector<double> values;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    values.assign(x.row(i).begin(), x.row(i).end());
    out[i] = model.predict_values(align_features(model.feature_names, x.names(), values));
  }
  return out;
}

namespace detail {

// Exact greedy tree growth over presorted columns, level by level.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<std::vector<std::uint32_t>>& sorted,
              const TrainConfig& cfg)
      : x_(x), sorted_(sorted), cfg_(cfg) {}

  // `in_sample[i]` selects the rows used for this tree.
  Tree build(std::span<const double> grad, std::span<const double> hess,
             const std::vector<char>& in_sample) {
    Tree tree;
    const std::size_t n = x_.rows();
    node_of_.assign(n, -1);
    NodeStats root;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_sample[i]) continue;
      node_of_[i] = 0;
      root.g += grad[i];
      root.h += hess[i];
    }
    tree.nodes.push_back(TreeNode{});
    std::vector<int> frontier = {0};
    std::vector<NodeStats> stats = {root};

    for (int depth = 0; depth < cfg_.max_depth && !frontier.empty(); ++depth) {
      std::vector<Split> best = find_splits(frontier, stats, grad, hess);
      std::vector<int> next;
      std::vector<NodeStats> next_stats;
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        if (!best[s].valid) continue;
        const int id = frontier[s];
        const int l = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{});
        tree.nodes.push_back(TreeNode{});
        TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = static_cast<int>(best[s].feature);
        node.threshold = best[s].threshold;
        node.left = l;
        node.right = l + 1;
        node.missing_goes =
            best[s].left.h >= best[s].right.h ? MissingGoes::kLeft : MissingGoes::kRight;
        next.push_back(l);
        next.push_back(l + 1);
        next_stats.push_back(best[s].left);
        next_stats.push_back(best[s].right);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const int id = node_of_[i];
        if (id < 0) continue;
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
        if (node.is_leaf()) continue;
        node_of_[i] = x_(i, static_cast<std::size_t>(node.feature)) < node.threshold
                          ? node.left
                          : node.right;
      }
      // Nodes that did not split become leaves now.
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        if (!best[s].valid) set_leaf(tree.nodes[static_cast<std::size_t>(frontier[s])], stats[s]);
      }
      frontier = std::move(next);
      stats = std::move(next_stats);
    }
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      set_leaf(tree.nodes[static_cast<std::size_t>(frontier[s])], stats[s]);
    }
    fill_internal_cover(tree, 0);
    return tree;
  }

 private:
  struct NodeStats {
    double g = 0.0;
    double h = 0.0;
  };
  struct Split {
    bool valid = false;
    double gain = 0.0;
    std::size_t feature = 0;
    double threshold = 0.0;
    NodeStats left, right;
  };

  void set_leaf(TreeNode& node, const NodeStats& s) const {
    node.feature = -1;
    node.value = s.h > 0.0 ? -cfg_.learning_rate * s.g / s.h : 0.0;
    node.cover = s.h;
  }

  double fill_internal_cover(Tree& tree, int id) const {
    TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf()) return node.cover;
    const double c = fill_internal_cover(tree, node.left) + fill_internal_cover(tree, node.right);
    tree.nodes[static_cast<std::size_t>(id)].cover = c;
    return c;
  }

  static double score(const NodeStats& s) { return s.h > 0.0 ? s.g * s.g / s.h : 0.0; }

  std::vector<Split> find_splits(const std::vector<int>& frontier,
                                 const std::vector<NodeStats>& stats,
                                 std::span<const double> grad, std::span<const double> hess) {
    const std::size_t k = frontier.size();
    std::vector<Split> best(k);
    int max_id = 0;
    for (int id : frontier) max_id = std::max(max_id, id);
    std::vector<int> slot(static_cast<std::size_t>(max_id) + 1, -1);
    for (std::size_t s = 0; s < k; ++s) slot[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);

    std::vector<NodeStats> acc(k);
    std::vector<double> last(k);
    std::vector<char> seen(k);
    std::vector<double> parent(k);
    for (std::size_t s = 0; s < k; ++s) parent[s] = score(stats[s]);

    for (std::size_t j = 0; j < x_.cols(); ++j) {
      std::fill(acc.begin(), acc.end(), NodeStats{});
      std::fill(seen.begin(), seen.end(), 0);
      for (std::uint32_t i : sorted_[j]) {
        const int id = node_of_[i];
        if (id < 0 || id > max_id) continue;
        const int sl = slot[static_cast<std::size_t>(id)];
        if (sl < 0) continue;
        const auto s = static_cast<std::size_t>(sl);
        const double v = x_(i, j);
        if (seen[s] && v > last[s]) {
          const NodeStats& l = acc[s];
          const NodeStats r{stats[s].g - l.g, stats[s].h - l.h};
          if (l.h >= cfg_.min_child_cover && r.h >= cfg_.min_child_cover) {
            const double gain = score(l) + score(r) - parent[s];
            const double floor = 1e-12 * std::max(1.0, parent[s]);
            if (gain > floor && (!best[s].valid || gain > best[s].gain)) {
              double t = last[s] + (v - last[s]) / 2.0;
              if (!(t > last[s])) t = v;
              best[s] = Split{true, gain, j, t, l, r};
            }
          }
        }
        acc[s].g += grad[i];
        acc[s].h += hess[i];
        last[s] = v;
        seen[s] = 1;
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<std::vector<std::uint32_t>>& sorted_;
  const TrainConfig& cfg_;
  std::vector<int> node_of_;
};

inline std::vector<std::vector<std::uint32_t>> presort(const Matrix& x) {
  std::vector<std::vector<std::uint32_t>> sorted(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    auto& idx = sorted[j];
    idx.resize(x.rows());
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x(a, j) < x(b, j); });
  }
  return sorted;
}

inline std::vector<char> draw_subsample(std::size_t n, double fraction, std::uint64_t seed,
                                        int round) {
  std::vector<char> mask(n, 1);
  if (fraction >= 1.0) return mask;
  const auto take = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(round));
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(idx[i], idx[i + rng.below(n - i)]);
  }
  std::fill(mask.begin(), mask.end(), 0);
  for (std::size_t i = 0; i < take; ++i) mask[idx[i]] = 1;
  return mask;
}

inline void check_inputs(const Matrix& x, std::span<const double> y) {
  if (x.empty() || x.cols() == 0) throw DomainError("training matrix is empty");
  if (y.size() != x.rows()) throw DomainError("target length does not match matrix rows");
  for (double v : y) {
    if (!std::isfinite(v)) throw DomainError("non-finite training target");
  }
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (double v : x.row(i)) {
      if (!std::isfinite(v)) throw DomainError("non-finite feature value in training matrix");
    }
  }
}

// Boosting loop shared by both objectives. `gradients` fills g/h from the
// current margins.
template <typename GradientFn, typename RoundFn>
void boost(GbtModel& model, const Matrix& x, const TrainConfig& cfg, GradientFn&& gradients,
           RoundFn&& on_round) {
  const auto sorted = presort(x);
  TreeBuilder builder(x, sorted, cfg);
  const std::size_t n = x.rows();
  std::vector<double> margin(n, model.base_score);
  std::vector<double> g(n), h(n);
  for (int round = 0; round < cfg.n_trees; ++round) {
    gradients(margin, g, h);
    const auto mask = draw_subsample(n, cfg.subsample, cfg.seed, round);
    Tree tree = builder.build(g, h, mask);
    for (std::size_t i = 0; i < n; ++i) margin[i] += tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
    on_round(round, margin);
  }
}

}  // namespace detail

// Per-round training loss, when a caller wants to inspect convergence.
using RoundCallback = std::function<void(int round, double train_loss)>;

inline GbtModel train_regressor(const Matrix& x, std::span<const double> y,
                                const TrainConfig& cfg, const RoundCallback& on_round = {}) {
  cfg.validate();
  detail::check_inputs(x, y);
  GbtModel model;
  model.objective = Objective::kSquaredError;
  model.learning_rate = cfg.learning_rate;
  model.feature_names = x.names();
  model.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  detail::boost(
      model, x, cfg,
      [&](const std::vector<double>& m, std::vector<double>& g, std::vector<double>& h) {
        for (std::size_t i = 0; i < m.size(); ++i) {
          g[i] = m[i] - y[i];
          h[i] = 1.0;
        }
      },
      [&](int round, const std::vector<double>& m) {
        if (!on_round) return;
        double sse = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) sse += (m[i] - y[i]) * (m[i] - y[i]);
        on_round(round, sse / static_cast<double>(m.size()));
      });
  return model;
}

// Class-weighted logistic boosting. `pos_weight` <= 0 selects n_neg / n_pos.
inline GbtModel train_classifier(const Matrix& x, std::span<const char> labels,
                                 const TrainConfig& cfg, double pos_weight = 0.0,
                                 const RoundCallback& on_round = {}) {
  cfg.validate();
  std::vector<double> y(labels.size());
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = labels[i] ? 1.0 : 0.0;
    n_pos += labels[i] ? 1 : 0;
  }
  detail::check_inputs(x, y);
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DomainError("classifier labels contain a single class");
  if (pos_weight <= 0.0) pos_weight = static_cast<double>(n_neg) / static_cast<double>(n_pos);

  std::vector<double> w(y.size());
  double w_pos = 0.0, w_all = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    w[i] = y[i] > 0.5 ? pos_weight : 1.0;
    w_all += w[i];
    if (y[i] > 0.5) w_pos += w[i];
  }
  const double p0 = w_pos / w_all;

  GbtModel model;
  model.objective = Objective::kLogistic;
  model.learning_rate = cfg.learning_rate;
  model.feature_names = x.names();
  model.base_score = std::log(p0 / (1.0 - p0));
  detail::boost(
      model, x, cfg,
      [&](const std::vector<double>& m, std::vector<double>& g, std::vector<double>& h) {
        for (std::size_t i = 0; i < m.size(); ++i) {
          const double p = sigmoid(m[i]);
          g[i] = w[i] * (p - y[i]);
          h[i] = w[i] * p * (1.0 - p);
        }
      },
      [&](int round, const std::vector<double>& m) {
        if (!on_round) return;
        double loss = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
          // Weighted log loss via softplus for stability.
          const double z = m[i];
          const double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
          loss += w[i] * (sp - y[i] * z);
        }
        on_round(round, loss / w_all);
      });
  return model;
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormatName = "scoutval.gbt";

namespace detail {

inline nlohmann::json node_to_json(const GbtModel& m, const Tree& t, int id) {
  const TreeNode& n = t.nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) return {{"leaf", n.value}, {"cover", n.cover}};
  return {{"feature", m.feature_names[static_cast<std::size_t>(n.feature)]},
          {"threshold", n.threshold},
          {"missing", n.missing_goes == MissingGoes::kLeft ? "left" : "right"},
          {"cover", n.cover},
          {"left", node_to_json(m, t, n.left)},
          {"right", node_to_json(m, t, n.right)}};
}

inline int node_from_json(const nlohmann::json& j,
                          const std::unordered_map<std::string, int>& feature_index, Tree& t,
                          int depth) {
  if (depth > 64) throw ParseError("tree too deep");
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.push_back(TreeNode{});
  TreeNode node;
  node.cover = j.at("cover").get<double>();
  if (j.contains("leaf")) {
    node.value = j.at("leaf").get<double>();
    t.nodes[static_cast<std::size_t>(id)] = node;
    return id;
  }
  const auto name = j.at("feature").get<std::string>();
  auto it = feature_index.find(name);
  if (it == feature_index.end()) throw ParseError("tree references unknown feature '" + name + "'");
  node.feature = it->second;
  node.threshold = j.at("threshold").get<double>();
  const auto missing = j.at("missing").get<std::string>();
  if (missing != "left" && missing != "right") throw ParseError("invalid missing direction");
  node.missing_goes = missing == "left" ? MissingGoes::kLeft : MissingGoes::kRight;
  node.left = node_from_json(j.at("left"), feature_index, t, depth + 1);
  node.right = node_from_json(j.at("right"), feature_index, t, depth + 1);
  t.nodes[static_cast<std::size_t>(id)] = node;
  return id;
}

}  // namespace detail

inline nlohmann::json to_json(const GbtModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) trees.push_back(detail::node_to_json(m, t, 0));
  return {{"format", kModelFormatName},
          {"version", kModelFormatVersion},
          {"objective", std::string(to_string(m.objective))},
          {"base_score", m.base_score},
          {"learning_rate", m.learning_rate},
          {"feature_names", m.feature_names},
          {"trees", std::move(trees)}};
}

inline GbtModel model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != kModelFormatName) {
      throw ParseError("not a scoutval model file");
    }
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw VersionError("unsupported model version " + std::to_string(version) +
                         " (expected " + std::to_string(kModelFormatVersion) + ")");
    }
    GbtModel m;
    const auto objective = j.at("objective").get<std::string>();
    if (objective == "squared_error") {
      m.objective = Objective::kSquaredError;
    } else if (objective == "logistic") {
      m.objective = Objective::kLogistic;
    } else {
      throw ParseError("unknown objective '" + objective + "'");
    }
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    std::unordered_map<std::string, int> index;
    for (std::size_t i = 0; i < m.feature_names.size(); ++i) {
      index[m.feature_names[i]] = static_cast<int>(i);
    }
    for (const auto& tj : j.at("trees")) {
      Tree t;
      detail::node_from_json(tj, index, t, 0);
      m.trees.push_back(std::move(t));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

inline std::string model_to_string(const GbtModel& m) { return to_json(m).dump() + "\n"; }

inline void save_model(const GbtModel& m, const std::string& path) {
  write_file(path, model_to_string(m));
}

inline GbtModel load_model(const std::string& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace scoutval
