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

// Chronological splitting plus regression and ranking metrics.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scoutval/common.hpp"
#include "scoutval/features.hpp"

namespace scoutval {

inline Date observation_date(const FeatureRow& r) { return r.asof; }
inline const std::string& observation_player(const FeatureRow& r) { return r.player_id; }
inline Date observation_date(const RawFeatures& r) { return r.key.asof; }
inline const std::string& observation_player(const RawFeatures& r) { return r.key.player_id; }
inline Date observation_date(const ObservationKey& k) { return k.asof; }
inline const std::string& observation_player(const ObservationKey& k) { return k.player_id; }

// Anything carrying an as-of date and a player id can be split.
template <typename T>
concept Dated = requires(const T& t) {
  { observation_date(t) } -> std::convertible_to<Date>;
  { observation_player(t) } -> std::convertible_to<std::string>;
};

template <Dated T>
struct Split {
  std::vector<T> train;
  std::vector<T> test;
  Date boundary;  // latest training as-of date
};

// Sorts by (asof, player_id) and puts the first ceil(f n) rows in train;
// every row sharing the boundary date joins train as well.
template <Dated T>
Split<T> chronological_split(std::vector<T> rows, double train_fraction = 0.8) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DomainError("train_fraction must be in (0, 1)");
  }
  std::stable_sort(rows.begin(), rows.end(), [](const T& a, const T& b) {
    const Date da = observation_date(a), db = observation_date(b);
    if (da != db) return da < db;
    return observation_player(a) < observation_player(b);
  });
  const auto n = rows.size();
  auto cut = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
  if (n == 0 || cut == 0) throw InsufficientDataError("chronological split leaves train empty");
  const Date boundary = observation_date(rows[cut - 1]);
  while (cut < n && observation_date(rows[cut]) == boundary) ++cut;
  if (cut >= n) throw InsufficientDataError("chronological split leaves test empty");
  Split<T> out;
  out.boundary = boundary;
  out.train.assign(std::make_move_iterator(rows.begin()),
                   std::make_move_iterator(rows.begin() + static_cast<std::ptrdiff_t>(cut)));
  out.test.assign(std::make_move_iterator(rows.begin() + static_cast<std::ptrdiff_t>(cut)),
                  std::make_move_iterator(rows.end()));
  return out;
}

struct RegressionMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> r2;  // absent when y_true has zero variance
};

inline RegressionMetrics regression_metrics(std::span<const double> y_true,
                                            std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw DomainError("metric inputs differ in length");
  if (y_true.size() < 2) throw DomainError("regression metrics need at least 2 rows");
  const auto n = static_cast<double>(y_true.size());
  const double mean = std::accumulate(y_true.begin(), y_true.end(), 0.0) / n;
  double sse = 0.0, sae = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double e = y_true[i] - y_pred[i];
    sse += e * e;
    sae += std::abs(e);
    sst += (y_true[i] - mean) * (y_true[i] - mean);
  }
  RegressionMetrics m;
  m.rmse = std::sqrt(sse / n);
  m.mae = sae / n;
  if (sst > 0.0) m.r2 = 1.0 - sse / sst;
  return m;
}

// Mann-Whitney AUC with midranks for ties; absent when one class is missing.
inline std::optional<double> roc_auc(std::span<const char> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw DomainError("metric inputs differ in length");
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j share the midrank
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

inline double f1_score(std::span<const char> labels, std::span<const char> predictions) {
  if (labels.size() != predictions.size()) throw DomainError("metric inputs differ in length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] && labels[i]) ++tp;
    if (predictions[i] && !labels[i]) ++fp;
    if (!predictions[i] && labels[i]) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace scoutval
