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

#include "fixtures.hpp"
#include "scoutval/metrics.hpp"
#include "scoutval/pipeline.hpp"
#include "scoutval/synth.hpp"

namespace scoutval {
namespace {

using testing::day;

// Exhaustive positive-negative pair count, ties worth one half.
double pairwise_auc(const std::vector<char>& labels, const std::vector<double>& scores) {
  double pairs = 0.0, wins = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1.0;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

std::vector<ObservationKey> keys_on(std::initializer_list<int> days) {
  std::vector<ObservationKey> k;
  int i = 0;
  for (int d : days) k.push_back({"p" + std::to_string(i++), day(d)});
  return k;
}

TEST(ChronologicalSplit, EightyTwenty) {
  const auto s = chronological_split(keys_on({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), 0.8);
  ASSERT_EQ(s.train.size(), 8u);
  ASSERT_EQ(s.test.size(), 2u);
  EXPECT_EQ(s.train.back().asof, day(8));
  EXPECT_EQ(s.test.front().asof, day(9));
  EXPECT_EQ(s.boundary, day(8));
}

TEST(ChronologicalSplit, AllOnOneDayIsError) {
  EXPECT_THROW(chronological_split(keys_on({3, 3, 3, 3, 3}), 0.8), InsufficientDataError);
}

TEST(ChronologicalSplit, BoundaryTiesJoinTrain) {
  const auto s = chronological_split(keys_on({1, 2, 3, 3, 3, 4}), 0.5);
  EXPECT_EQ(s.train.size(), 5u);
  for (const auto& k : s.train) EXPECT_LE(k.asof, s.boundary);
  for (const auto& k : s.test) EXPECT_GT(k.asof, s.boundary);
}

TEST(ChronologicalSplit, ShuffledInputSameSplit) {
  Rng rng(1);
  std::vector<ObservationKey> keys;
  for (int i = 0; i < 100; ++i) {
    keys.push_back({"id" + std::to_string(i), day(static_cast<int>(rng.below(30)))});
  }
  const auto a = chronological_split(keys, 0.8);
  rng.shuffle(keys);
  const auto b = chronological_split(keys, 0.8);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
}

TEST(RegressionMetrics, WorkedExamples) {
  const std::vector<double> y = {0, 0, 1, 1}, z = {0, 0, 0, 0};
  auto m = regression_metrics(y, z);
  EXPECT_DOUBLE_EQ(m.rmse, std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(m.mae, 0.5);
  ASSERT_TRUE(m.r2);
  EXPECT_DOUBLE_EQ(*m.r2, -1.0);
  m = regression_metrics(y, y);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(*m.r2, 1.0);
  const std::vector<double> mean(4, 0.5);
  EXPECT_DOUBLE_EQ(*regression_metrics(y, mean).r2, 0.0);
  const std::vector<double> flat(4, 2.0);
  EXPECT_FALSE(regression_metrics(flat, y).r2.has_value());
  EXPECT_THROW(regression_metrics(std::vector<double>{1.0}, std::vector<double>{1.0}),
               DomainError);
}

TEST(RegressionMetrics, ShiftInvarianceAndOrdering) {
  Rng rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(2 + rng.below(50)), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    const auto m = regression_metrics(a, b);
    const double c = rng.uniform(-100, 100);
    std::vector<double> as = a, bs = b;
    for (double& v : as) v += c;
    for (double& v : bs) v += c;
    const auto s = regression_metrics(as, bs);
    EXPECT_NEAR(s.rmse, m.rmse, 1e-9);
    EXPECT_NEAR(s.mae, m.mae, 1e-9);
    EXPECT_GE(m.rmse, m.mae);
    EXPECT_LE(*m.r2, 1.0);
  }
}

TEST(RocAuc, Examples) {
  EXPECT_EQ(*roc_auc(std::vector<char>{1, 0}, std::vector<double>{0.9, 0.1}), 1.0);
  EXPECT_EQ(*roc_auc(std::vector<char>{1, 0, 1, 0}, std::vector<double>(4, 0.3)), 0.5);
  EXPECT_DOUBLE_EQ(*roc_auc(std::vector<char>{1, 0, 1, 0}, std::vector<double>{0.8, 0.7, 0.6, 0.5}),
                   0.75);
  EXPECT_FALSE(roc_auc(std::vector<char>{1, 1}, std::vector<double>{0.1, 0.2}).has_value());
}

TEST(RocAuc, MatchesPairwiseBruteForceWithTies) {
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.below(499);
    std::vector<char> labels(n);
    std::vector<double> scores(n);
    const int levels = 1 + static_cast<int>(rng.below(30));
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.uniform() < 0.3 ? 1 : 0;
      scores[i] = rep % 3 == 0 ? rng.normal() : static_cast<double>(rng.below(levels));
    }
    labels[0] = 1;
    labels[1] = 0;
    EXPECT_NEAR(*roc_auc(labels, scores), pairwise_auc(labels, scores), 1e-12);
    if (rep % 3 == 0) {
      std::vector<double> neg(n);
      for (std::size_t i = 0; i < n; ++i) neg[i] = -scores[i];
      EXPECT_NEAR(*roc_auc(labels, neg), 1.0 - *roc_auc(labels, scores), 1e-12);
    }
  }
}

TEST(F1, Examples) {
  const std::vector<char> y = {1, 0, 1, 0};
  EXPECT_EQ(f1_score(y, y), 1.0);
  EXPECT_EQ(f1_score(y, std::vector<char>(4, 0)), 0.0);
  // TP 1, FP 1, FN 1
  EXPECT_DOUBLE_EQ(f1_score(std::vector<char>{1, 1, 0}, std::vector<char>{1, 0, 1}), 0.5);
}

PipelineConfig quick_config() {
  PipelineConfig c;
  c.regressor.n_trees = 25;
  c.classifier.n_trees = 25;
  c.folds = 3;
  c.seed = 3;
  return c;
}

Dataset quick_dataset(std::uint64_t seed = 5) {
  SynthConfig s;
  s.n_players = 300;
  s.weeks = 40;
  s.seed = seed;
  return generate(s).dataset;
}

TEST(Ablation, ShapeAndSharedTestSplit) {
  const auto t = run_ablation(quick_dataset(), quick_config());
  ASSERT_EQ(t.cells.size(), 6u);
  const std::size_t n_test = t.cells[0].metrics.n_test;
  for (Variant v : kVariants) {
    for (Learner l : {Learner::kGbt, Learner::kLinear}) {
      const auto& m = t.cell(v, l).metrics;
      EXPECT_EQ(m.n_test, n_test);
      EXPECT_GE(m.rmse, m.mae);
      ASSERT_TRUE(m.roc_auc.has_value());
      EXPECT_GE(*m.roc_auc, 0.0);
      EXPECT_LE(*m.roc_auc, 1.0);
      EXPECT_GE(m.f1, 0.0);
      EXPECT_LE(m.f1, 1.0);
    }
  }
  const std::string csv_text = ablation_to_csv(t);
  EXPECT_EQ(std::count(csv_text.begin(), csv_text.end(), '\n'), 7);
}

TEST(Ablation, SameSeedSameBytes) {
  const Dataset ds = quick_dataset();
  const auto a = run_ablation(ds, quick_config());
  const auto b = run_ablation(ds, quick_config());
  EXPECT_EQ(ablation_to_csv(a), ablation_to_csv(b));
  EXPECT_EQ(ablation_to_text(a), ablation_to_text(b));
}

TEST(Ablation, PerVariantLabelSourceRuns) {
  PipelineConfig c = quick_config();
  c.label_source = LabelSource::kPerVariant;
  const auto t = run_ablation(quick_dataset(), c);
  EXPECT_EQ(t.labels.size(), 3u);
  EXPECT_NE(t.label(Variant::kFull).threshold.tau, t.label(Variant::kTextOnly).threshold.tau);
}

TEST(Ablation, LabelBudgetOnTrainingSplit) {
  for (double q : {0.80, 0.85, 0.90}) {
    PipelineConfig c = quick_config();
    c.quantile_q = q;
    const PreparedData prep = prepare(quick_dataset(), c);
    const LabelStage s = label_stage(prep, c);
    const double n = static_cast<double>(s.train_labels.size());
    const auto pos = static_cast<double>(std::count(s.train_labels.begin(), s.train_labels.end(), 1));
    EXPECT_NEAR(pos, (1.0 - q) * n, 1.0) << q;
  }
}

// Replacing every test-split target changes no fitted object.
TEST(Leakage, TestTargetsDoNotReachFittedObjects) {
  const PipelineConfig c = quick_config();
  const PreparedData prep = prepare(quick_dataset(), c);
  PreparedData swapped = prep;
  Rng rng(4);
  for (auto& r : swapped.split.test) r.target_value_eur = rng.uniform(0, 1e9);
  const LabelStage a = label_stage(prep, c), b = label_stage(swapped, c);
  EXPECT_EQ(model_to_string(a.regressor), model_to_string(b.regressor));
  EXPECT_EQ(a.threshold.tau, b.threshold.tau);
  EXPECT_EQ(a.train_labels, b.train_labels);
  EXPECT_EQ(a.test_pred, b.test_pred);
  EXPECT_NE(a.test_labels, b.test_labels);
}

// Changing the final snapshot of test-split players at the dataset level
// leaves the train split, the imputer and the PCA untouched.
TEST(Leakage, DatasetEditsOnTestRowsKeepPreprocessing) {
  const Dataset ds = quick_dataset(8);
  const PipelineConfig c = quick_config();
  const PreparedData prep = prepare(ds, c);
  Dataset edited = ds;
  for (const auto& r : prep.split.test) {
    edited.valuations[r.key.player_id].back().value_eur *= 3.0;
    for (auto& a : edited.articles[r.key.player_id]) {
      for (double& e : a.embedding) e += 5.0;
    }
  }
  const PreparedData again = prepare(edited, c);
  EXPECT_EQ(again.imputer, prep.imputer);
  EXPECT_EQ(again.pca, prep.pca);
  ASSERT_EQ(again.split.train.size(), prep.split.train.size());
  for (std::size_t i = 0; i < prep.split.train.size(); ++i) {
    EXPECT_EQ(again.split.train[i].key, prep.split.train[i].key);
    EXPECT_EQ(again.split.train[i].target_value_eur, prep.split.train[i].target_value_eur);
  }
}

}  // namespace
}  // namespace scoutval
