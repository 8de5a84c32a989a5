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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "scoutval/explain.hpp"

namespace scoutval {
namespace {

Matrix random_rows(const std::vector<std::string>& names, std::size_t n, Rng& rng) {
  Matrix m(names, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) m(i, j) = rng.normal();
  }
  return m;
}

std::vector<double> random_row(std::size_t d, Rng& rng) {
  std::vector<double> x(d);
  for (double& v : x) v = rng.normal();
  return x;
}

double additivity_gap(const Attribution& a) {
  return std::abs(a.base_value +
                  std::accumulate(a.contributions.begin(), a.contributions.end(), 0.0) -
                  a.prediction);
}

TEST(Shap, ZeroTrees) {
  GbtModel m;
  m.base_score = 1.25;
  m.feature_names = {"a", "b"};
  Rng rng(1);
  const auto a = shap_values(m, random_row(2, rng), random_rows(m.feature_names, 5, rng));
  EXPECT_EQ(a.base_value, 1.25);
  for (double c : a.contributions) EXPECT_EQ(c, 0.0);
}

TEST(Shap, SingleStumpBalancedBackground) {
  GbtModel m;
  m.feature_names = {"A", "B", "C"};
  Tree t;
  t.nodes.resize(3);
  t.nodes[0].feature = 0;
  t.nodes[0].threshold = 0.0;
  t.nodes[0].left = 1;
  t.nodes[0].right = 2;
  t.nodes[1].value = -1.0;
  t.nodes[2].value = 1.0;
  m.trees.push_back(t);
  Matrix bg(m.feature_names, 4);
  const double a_vals[] = {-1.0, -0.5, 0.5, 1.0};
  for (std::size_t i = 0; i < 4; ++i) {
    bg(i, 0) = a_vals[i];
    bg(i, 1) = static_cast<double>(i);
    bg(i, 2) = -static_cast<double>(i);
  }
  const std::vector<double> x = {1.0, 7.0, -7.0};
  const auto a = shap_values(m, x, bg);
  EXPECT_NEAR(a.contributions[0], 1.0, 1e-15);
  EXPECT_EQ(a.contributions[1], 0.0);
  EXPECT_EQ(a.contributions[2], 0.0);
  EXPECT_NEAR(a.base_value, 0.0, 1e-15);
  const auto oracle = oracle::brute_force_shapley(m, x, bg);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a.contributions[j], oracle[j], 1e-12);
}

TEST(Shap, MatchesBruteForceOnRandomEnsembles) {
  Rng rng(2);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t d = 1 + rng.below(4);
    const int depth = 1 + static_cast<int>(rng.below(3));
    const GbtModel m = oracle::random_ensemble(d, depth, 1 + static_cast<int>(rng.below(6)), rng);
    const Matrix bg = random_rows(m.feature_names, 1 + rng.below(32), rng);
    auto x = random_row(d, rng);
    if (rep % 7 == 0) x[rng.below(d)] = std::nan("");
    const auto a = shap_values(m, x, bg);
    const auto o = oracle::brute_force_shapley(m, x, bg);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(a.contributions[j], o[j], 1e-8) << rep;
    EXPECT_LT(additivity_gap(a), 1e-8);
  }
}

TEST(Shap, MatchesBruteForceOnTrainedModels) {
  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t d = 2 + rng.below(3);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
    const Matrix x = random_rows(names, 120, rng);
    std::vector<double> y(120);
    for (std::size_t i = 0; i < 120; ++i) y[i] = x(i, 0) * x(i, 1) + std::sin(x(i, d - 1));
    TrainConfig c;
    c.n_trees = 15;
    c.max_depth = 3;
    c.seed = static_cast<std::uint64_t>(rep);
    const GbtModel m = train_regressor(x, y, c);
    const Matrix bg = random_rows(names, 20, rng);
    const auto row = random_row(d, rng);
    const auto a = shap_values(m, row, bg);
    const auto o = oracle::brute_force_shapley(m, row, bg);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(a.contributions[j], o[j], 1e-8);
  }
}

TEST(Shap, AdditivityOnFullSizeModel) {
  Rng rng(4);
  std::vector<std::string> names;
  for (int j = 0; j < 12; ++j) names.push_back("x" + std::to_string(j));
  const Matrix x = random_rows(names, 600, rng);
  std::vector<double> y(600);
  for (std::size_t i = 0; i < 600; ++i) y[i] = x(i, 0) + x(i, 1) * x(i, 2) - std::abs(x(i, 3));
  TrainConfig c;
  c.n_trees = 100;
  const GbtModel m = train_regressor(x, y, c);
  const Matrix bg = random_rows(names, 64, rng);
  for (int r = 0; r < 20; ++r) EXPECT_LT(additivity_gap(shap_values(m, random_row(12, rng), bg)), 1e-8);
}

TEST(Shap, DummyFeatureGetsExactZero) {
  Rng rng(5);
  GbtModel m = oracle::random_ensemble(3, 3, 5, rng);
  m.feature_names.push_back("unused");
  const Matrix bg = random_rows(m.feature_names, 10, rng);
  const auto a = shap_values(m, random_row(4, rng), bg);
  EXPECT_EQ(a.contributions[3], 0.0);
}

TEST(Shap, SymmetricFeaturesShareCredit) {
  // f = 1 if a > 0 and b > 0; a and b play identical roles.
  GbtModel m;
  m.feature_names = {"a", "b"};
  for (int order = 0; order < 2; ++order) {
    Tree t;
    t.nodes.resize(5);
    t.nodes[0] = {order, 0.0, 1, 2, MissingGoes::kLeft, 0.0, 0.0};
    t.nodes[1].value = 0.0;
    t.nodes[2] = {1 - order, 0.0, 3, 4, MissingGoes::kLeft, 0.0, 0.0};
    t.nodes[3].value = 0.0;
    t.nodes[4].value = 0.5;
    m.trees.push_back(t);
  }
  // Equal background columns make a and b interchangeable in the value function.
  Rng rng(6);
  Matrix bg(m.feature_names, 16);
  for (std::size_t i = 0; i < 16; ++i) bg(i, 0) = bg(i, 1) = rng.normal();
  const std::vector<double> x = {0.8, 0.8};
  const auto a = shap_values(m, x, bg);
  EXPECT_NEAR(a.contributions[0], a.contributions[1], 1e-8);
}

TEST(Shap, EmptyBackgroundIsError) {
  GbtModel m;
  m.feature_names = {"a"};
  EXPECT_THROW(shap_values(m, std::vector<double>{1.0}, Matrix({"a"}, 0)), DomainError);
}

TEST(Shap, FeatureRowOverloadAlignsByName) {
  Rng rng(7);
  const GbtModel m = oracle::random_ensemble(3, 2, 4, rng);
  FeatureRow row, rev;
  const auto x = random_row(3, rng);
  for (std::size_t j = 0; j < 3; ++j) row.structured.push(m.feature_names[j], x[j]);
  for (std::size_t j = 3; j-- > 0;) rev.structured.push(m.feature_names[j], x[j]);
  std::vector<FeatureRow> bg;
  for (int i = 0; i < 5; ++i) {
    FeatureRow b;
    for (std::size_t j = 0; j < 3; ++j) b.structured.push(m.feature_names[j], rng.normal());
    bg.push_back(b);
  }
  EXPECT_EQ(shap_values(m, row, bg).contributions, shap_values(m, rev, bg).contributions);
}

TEST(SampleBackground, BoundedSeededAscending) {
  EXPECT_EQ(sample_background(10, 1).size(), 10u);
  const auto a = sample_background(5000, 3), b = sample_background(5000, 3);
  EXPECT_EQ(a.size(), kMaxBackgroundRows);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_NE(a, sample_background(5000, 4));
}

Attribution attr(std::vector<double> phi) {
  Attribution a;
  a.player_id = "p";
  a.feature_names = {"A", "B", "C"};
  a.feature_values = {1.0, 2.0, 3.0};
  a.contributions = std::move(phi);
  return a;
}

TEST(GlobalImportance, Examples) {
  const std::vector<Attribution> one = {attr({0.1, -0.5, 0.3})};
  const auto g = global_importance(one);
  EXPECT_EQ(g[0].feature, "B");
  EXPECT_EQ(g[1].feature, "C");
  EXPECT_EQ(g[2].feature, "A");
  const std::vector<Attribution> opposite = {attr({0.4, 0, 0}), attr({-0.4, 0, 0})};
  const auto h = global_importance(opposite);
  EXPECT_EQ(h[0].feature, "A");
  EXPECT_DOUBLE_EQ(h[0].mean_abs_contribution, 0.4);
  EXPECT_EQ(h[1].mean_abs_contribution, 0.0);
  EXPECT_EQ(h[1].feature, "B");  // ties by name
  EXPECT_THROW(global_importance(std::vector<Attribution>{}), DomainError);
}

TEST(ExportSummary, LinesAndRoundTrip) {
  testing::ScratchDir dir("explain");
  const std::vector<Attribution> v = {attr({0.1, -0.2, 1.0 / 3.0}), attr({1e-17, 2.5, -7.0})};
  export_summary(v, dir.file("s.csv"));
  const auto t = csv::parse(read_file(dir.file("s.csv")));
  ASSERT_EQ(t.rows.size(), 6u);
  EXPECT_EQ(parse_double(t.rows[2][3]), 1.0 / 3.0);
  EXPECT_EQ(parse_double(t.rows[3][3]), 1e-17);
  export_summary({}, dir.file("e.csv"));
  EXPECT_EQ(read_file(dir.file("e.csv")), "player_id,feature,feature_value,shap_value\n");
  const auto back = attribution_from_json(nlohmann::json::parse(to_json(v[0]).dump()));
  EXPECT_EQ(back.contributions, v[0].contributions);
  EXPECT_EQ(back.feature_names, v[0].feature_names);
}

}  // namespace
}  // namespace scoutval
