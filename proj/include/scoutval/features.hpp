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

// As-of feature computation. Every function here reads only data dated at or
// before its `asof` argument, so appending later data never changes a
// result.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scoutval/common.hpp"
#include "scoutval/csv.hpp"
#include "scoutval/ingest.hpp"

namespace scoutval {

inline constexpr double kDaysPerYear = 365.25;

// ---------------------------------------------------------------------------
// Market dynamics
// ---------------------------------------------------------------------------

struct MarketFeatures {
  double mv_mean = 0.0;
  double mv_std = 0.0;
  double mv_max = 0.0;
  double mv_trend = 0.0;  // EUR per day
  std::int64_t n_snapshots = 0;
};

inline MarketFeatures market_features(const ValuationSeries& series, Date asof) {
  std::vector<const ValuationSnapshot*> hist;
  for (const auto& s : series) {
    if (s.timestamp <= asof) hist.push_back(&s);
  }
  if (hist.empty()) {
    throw InsufficientDataError("no valuation snapshot at or before " + asof.to_string());
  }
  std::sort(hist.begin(), hist.end(),
            [](auto* a, auto* b) { return a->timestamp < b->timestamp; });

  MarketFeatures f;
  const auto n = static_cast<double>(hist.size());
  f.n_snapshots = static_cast<std::int64_t>(hist.size());
  double sum = 0.0;
  f.mv_max = hist.front()->value_eur;
  for (auto* s : hist) {
    sum += s->value_eur;
    f.mv_max = std::max(f.mv_max, s->value_eur);
  }
  f.mv_mean = sum / n;
  if (hist.size() < 2) return f;

  const Date t0 = hist.front()->timestamp;
  double t_mean = 0.0;
  for (auto* s : hist) t_mean += static_cast<double>(s->timestamp - t0);
  t_mean /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (auto* s : hist) {
    const double dt = static_cast<double>(s->timestamp - t0) - t_mean;
    const double dv = s->value_eur - f.mv_mean;
    sxx += dt * dt;
    sxy += dt * dv;
    syy += dv * dv;
  }
  f.mv_std = std::sqrt(syy / (n - 1.0));
  f.mv_trend = sxx > 0.0 ? sxy / sxx : 0.0;
  return f;
}

// ---------------------------------------------------------------------------
// Biographical / contract / transfer context
// ---------------------------------------------------------------------------

struct ContextFeatures {
  std::optional<double> age_years;
  std::optional<double> height_cm;
  std::optional<double> contract_remaining_days;
  std::int64_t transfer_count = 0;
  std::optional<double> last_fee_eur;
};

inline ContextFeatures context_features(const PlayerRecord& player, Date asof) {
  ContextFeatures f;
  if (player.birth_date) {
    f.age_years = static_cast<double>(asof - *player.birth_date) / kDaysPerYear;
  }
  f.height_cm = player.height_cm;
  if (player.contract_expiry) {
    f.contract_remaining_days =
        static_cast<double>(std::max<std::int64_t>(0, *player.contract_expiry - asof));
  }
  for (const auto& t : player.transfers) {
    if (t.date > asof) continue;
    ++f.transfer_count;
    if (t.fee_eur) f.last_fee_eur = *t.fee_eur;
  }
  return f;
}

// ---------------------------------------------------------------------------
// News-derived features
// ---------------------------------------------------------------------------

struct SentimentSummary {
  double mean = 0.0;
  double volatility = 0.0;
};

// Mean and sample (n-1) standard deviation; volatility is 0 for one score.
inline SentimentSummary sentiment_aggregate(std::span<const double> scores) {
  if (scores.empty()) throw InsufficientDataError("sentiment_aggregate on empty list");
  const double n = static_cast<double>(scores.size());
  SentimentSummary s;
  s.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  if (scores.size() < 2) return s;
  double ss = 0.0;
  for (double x : scores) ss += (x - s.mean) * (x - s.mean);
  s.volatility = std::sqrt(ss / (n - 1.0));
  return s;
}

inline std::vector<double> mean_pool(std::span<const std::vector<double>> embeddings,
                                     std::span<const std::string> ids = {}) {
  if (embeddings.empty()) throw InsufficientDataError("mean_pool on empty list");
  const std::size_t dim = embeddings.front().size();
  std::vector<double> out(dim, 0.0);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].size() != dim) {
      const std::string who = i < ids.size() ? "'" + ids[i] + "'" : "#" + std::to_string(i);
      throw DomainError("embedding of article " + who + " has dimension " +
                        std::to_string(embeddings[i].size()) + ", expected " +
                        std::to_string(dim));
    }
    for (std::size_t k = 0; k < dim; ++k) out[k] += embeddings[i][k];
  }
  const double n = static_cast<double>(embeddings.size());
  for (double& v : out) v /= n;
  return out;
}

struct TextFeatures {
  double sent_mean = 0.0;
  double sent_vol = 0.0;
  std::int64_t n_articles = 0;
  std::optional<std::vector<double>> pooled_embedding;  // absent without coverage
};

inline TextFeatures text_features(std::span<const ArticleFeatures> articles, Date asof) {
  std::vector<double> scores;
  std::vector<std::vector<double>> embeddings;
  std::vector<std::string> ids;
  for (const auto& a : articles) {
    if (!at_or_before(a.published_at, asof)) continue;
    scores.push_back(a.sentiment);
    embeddings.push_back(a.embedding);
    ids.push_back(a.article_id);
  }
  TextFeatures f;
  f.n_articles = static_cast<std::int64_t>(scores.size());
  if (scores.empty()) return f;
  const auto s = sentiment_aggregate(scores);
  f.sent_mean = s.mean;
  f.sent_vol = s.volatility;
  f.pooled_embedding = mean_pool(embeddings, ids);
  return f;
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

inline constexpr double kPcaVarianceTarget = 0.95;

struct PcaModel {
  std::vector<double> mean_vector;
  std::vector<std::vector<double>> components;  // all, descending variance
  std::vector<double> explained_variance;
  std::size_t retained_k = 0;

  std::size_t input_dim() const { return mean_vector.size(); }

  double explained_ratio(std::size_t k) const {
    const double total =
        std::accumulate(explained_variance.begin(), explained_variance.end(), 0.0);
    if (total <= 0.0) return 1.0;
    double part = 0.0;
    for (std::size_t i = 0; i < k && i < explained_variance.size(); ++i) {
      part += explained_variance[i];
    }
    return part / total;
  }

  bool operator==(const PcaModel&) const = default;
};

inline PcaModel fit_pca(const std::vector<std::vector<double>>& rows,
                        double variance_target = kPcaVarianceTarget) {
  if (rows.size() < 2) throw InsufficientDataError("PCA needs at least 2 rows");
  const std::size_t d = rows.front().size();
  if (d == 0) throw InsufficientDataError("PCA needs at least 1 column");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (r.size() != d) throw DomainError("PCA input rows differ in dimension");
    for (std::size_t j = 0; j < d; ++j) x(i, static_cast<Eigen::Index>(j)) = r[j];
  }
  const Eigen::VectorXd mean = x.colwise().mean();
  x.rowwise() -= mean.transpose();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("PCA eigendecomposition failed");

  PcaModel m;
  m.mean_vector.assign(mean.data(), mean.data() + mean.size());
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();
  for (Eigen::Index c = static_cast<Eigen::Index>(d) - 1; c >= 0; --c) {
    std::vector<double> comp(d);
    std::size_t arg = 0;
    for (std::size_t j = 0; j < d; ++j) {
      comp[j] = vectors(static_cast<Eigen::Index>(j), c);
      if (std::abs(comp[j]) > std::abs(comp[arg])) arg = j;
    }
    if (comp[arg] < 0.0) {
      for (double& v : comp) v = -v;
    }
    m.components.push_back(std::move(comp));
    m.explained_variance.push_back(std::max(0.0, values(c)));
  }

  const double total =
      std::accumulate(m.explained_variance.begin(), m.explained_variance.end(), 0.0);
  if (total <= 0.0) {
    m.retained_k = 0;
    return m;
  }
  double cum = 0.0;
  m.retained_k = d;
  for (std::size_t k = 0; k < d; ++k) {
    cum += m.explained_variance[k];
    if (cum / total >= variance_target) {
      m.retained_k = k + 1;
      break;
    }
  }
  return m;
}

inline std::vector<double> pca_transform(const PcaModel& model, std::span<const double> row) {
  if (row.size() != model.input_dim()) {
    throw DomainError("PCA input has dimension " + std::to_string(row.size()) +
                      ", model expects " + std::to_string(model.input_dim()));
  }
  std::vector<double> out(model.retained_k, 0.0);
  for (std::size_t k = 0; k < model.retained_k; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      acc += (row[j] - model.mean_vector[j]) * model.components[k][j];
    }
    out[k] = acc;
  }
  return out;
}

inline nlohmann::json to_json(const PcaModel& m) {
  return {{"mean_vector", m.mean_vector},
          {"components", m.components},
          {"explained_variance", m.explained_variance},
          {"retained_k", m.retained_k}};
}

inline PcaModel pca_from_json(const nlohmann::json& j) {
  PcaModel m;
  m.mean_vector = j.at("mean_vector").get<std::vector<double>>();
  m.components = j.at("components").get<std::vector<std::vector<double>>>();
  m.explained_variance = j.at("explained_variance").get<std::vector<double>>();
  m.retained_k = j.at("retained_k").get<std::size_t>();
  if (m.retained_k > m.components.size()) throw ParseError("retained_k exceeds components");
  for (const auto& c : m.components) {
    if (c.size() != m.mean_vector.size()) throw ParseError("PCA component dimension mismatch");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Feature rows
// ---------------------------------------------------------------------------

enum class Variant { kFull, kNoText, kTextOnly };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoText: return "no_text";
    case Variant::kTextOnly: return "text_only";
  }
  return "full";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "full") return Variant::kFull;
  if (s == "no_text") return Variant::kNoText;
  if (s == "text_only") return Variant::kTextOnly;
  throw ParseError("unknown variant '" + std::string(s) + "'");
}

constexpr bool uses_text(Variant v) { return v != Variant::kNoText; }
constexpr bool uses_structured(Variant v) { return v != Variant::kTextOnly; }

struct NamedVector {
  std::vector<std::string> names;
  std::vector<double> values;

  void push(std::string name, double value) {
    names.push_back(std::move(name));
    values.push_back(value);
  }
  std::optional<double> get(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return values[i];
    }
    return std::nullopt;
  }
  bool operator==(const NamedVector&) const = default;
};

struct FeatureRow {
  std::string player_id;
  Date asof;
  NamedVector structured;
  NamedVector text;
  double target_value_eur = 0.0;

  // Concatenated names/values, structured block first.
  std::vector<std::string> feature_names() const {
    std::vector<std::string> out = structured.names;
    out.insert(out.end(), text.names.begin(), text.names.end());
    return out;
  }
  std::vector<double> feature_values() const {
    std::vector<double> out = structured.values;
    out.insert(out.end(), text.values.begin(), text.values.end());
    return out;
  }
  bool operator==(const FeatureRow&) const = default;
};

// (player, as-of date) pair identifying one observation.
struct ObservationKey {
  std::string player_id;
  Date asof;
  bool operator==(const ObservationKey&) const = default;
};

// Unimputed per-observation features.
struct RawFeatures {
  ObservationKey key;
  MarketFeatures market;
  ContextFeatures context;
  TextFeatures text;
  double target_value_eur = 0.0;
};

// Computes raw features for `key`. The target is the snapshot on `key.asof`
// (or the latest before it); market dynamics use only snapshots strictly
// before the target so the current value never enters the inputs.
// Returns nullopt when no earlier snapshot exists.
inline std::optional<RawFeatures> raw_features(const Dataset& ds, const ObservationKey& key) {
  auto series_it = ds.valuations.find(key.player_id);
  auto player_it = ds.players.find(key.player_id);
  if (series_it == ds.valuations.end() || player_it == ds.players.end()) return std::nullopt;
  const ValuationSeries& series = series_it->second;

  const ValuationSnapshot* target = nullptr;
  for (const auto& s : series) {
    if (s.timestamp <= key.asof) target = &s;
  }
  if (target == nullptr) return std::nullopt;
  const bool has_history = std::any_of(series.begin(), series.end(), [&](const auto& s) {
    return s.timestamp < target->timestamp;
  });
  if (!has_history) return std::nullopt;

  RawFeatures raw;
  raw.key = key;
  raw.market = market_features(series, target->timestamp - 1);
  raw.context = context_features(player_it->second, key.asof);
  static const std::vector<ArticleFeatures> kNoArticles;
  auto art_it = ds.articles.find(key.player_id);
  raw.text = text_features(art_it == ds.articles.end() ? kNoArticles : art_it->second, key.asof);
  raw.target_value_eur = target->value_eur;
  return raw;
}

// Latest snapshot date at or before `cutoff` for every player that has at
// least one earlier snapshot to serve as history.
inline std::vector<ObservationKey> latest_observations(const Dataset& ds, Date cutoff) {
  std::vector<ObservationKey> keys;
  for (const auto& [id, series] : ds.valuations) {
    std::size_t count = 0;
    Date last;
    for (const auto& s : series) {
      if (s.timestamp <= cutoff) {
        ++count;
        last = std::max(last, s.timestamp);
      }
    }
    if (count >= 2) keys.push_back({id, last});
  }
  return keys;
}

// Latest snapshot date across the dataset.
inline Date dataset_end(const Dataset& ds) {
  Date end(std::numeric_limits<std::int64_t>::min());
  for (const auto& [id, series] : ds.valuations) {
    for (const auto& s : series) end = std::max(end, s.timestamp);
  }
  return end;
}

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Training-set medians used to fill absent context fields.
struct Imputer {
  double age_years = 0.0;
  double height_cm = 0.0;
  double contract_remaining_days = 0.0;
  double last_fee_eur = 0.0;

  static Imputer fit(std::span<const RawFeatures> train) {
    std::vector<double> age, height, contract, fee;
    for (const auto& r : train) {
      if (r.context.age_years) age.push_back(*r.context.age_years);
      if (r.context.height_cm) height.push_back(*r.context.height_cm);
      if (r.context.contract_remaining_days) {
        contract.push_back(*r.context.contract_remaining_days);
      }
      if (r.context.last_fee_eur) fee.push_back(*r.context.last_fee_eur);
    }
    return {detail::median_of(age), detail::median_of(height), detail::median_of(contract),
            detail::median_of(fee)};
  }

  bool operator==(const Imputer&) const = default;
};

inline nlohmann::json to_json(const Imputer& imp) {
  return {{"age_years", imp.age_years},
          {"height_cm", imp.height_cm},
          {"contract_remaining_days", imp.contract_remaining_days},
          {"last_fee_eur", imp.last_fee_eur}};
}

inline Imputer imputer_from_json(const nlohmann::json& j) {
  return {j.at("age_years").get<double>(), j.at("height_cm").get<double>(),
          j.at("contract_remaining_days").get<double>(), j.at("last_fee_eur").get<double>()};
}

inline std::vector<std::string> structured_feature_names() {
  return {"mv_mean",   "mv_std",    "mv_max",
          "mv_trend",  "n_snapshots", "age_years",
          "height_cm", "contract_remaining_days", "transfer_count",
          "last_fee_eur"};
}

inline std::vector<std::string> text_feature_names(std::size_t pca_k) {
  std::vector<std::string> names = {"sent_mean", "sent_vol", "n_articles"};
  for (std::size_t k = 0; k < pca_k; ++k) names.push_back("emb_pc" + std::to_string(k + 1));
  return names;
}

// Applies imputation and the variant's block selection. `pca` is required
// when the variant carries text.
inline FeatureRow finalize_row(const RawFeatures& raw, Variant variant, const PcaModel* pca,
                               const Imputer& imputer) {
  FeatureRow row;
  row.player_id = raw.key.player_id;
  row.asof = raw.key.asof;
  row.target_value_eur = raw.target_value_eur;
  if (uses_structured(variant)) {
    const auto& m = raw.market;
    const auto& c = raw.context;
    row.structured.push("mv_mean", m.mv_mean);
    row.structured.push("mv_std", m.mv_std);
    row.structured.push("mv_max", m.mv_max);
    row.structured.push("mv_trend", m.mv_trend);
    row.structured.push("n_snapshots", static_cast<double>(m.n_snapshots));
    row.structured.push("age_years", c.age_years.value_or(imputer.age_years));
    row.structured.push("height_cm", c.height_cm.value_or(imputer.height_cm));
    row.structured.push("contract_remaining_days",
                        c.contract_remaining_days.value_or(imputer.contract_remaining_days));
    row.structured.push("transfer_count", static_cast<double>(c.transfer_count));
    row.structured.push("last_fee_eur", c.last_fee_eur.value_or(imputer.last_fee_eur));
  }
  if (uses_text(variant)) {
    if (pca == nullptr) throw DomainError("variant with text features requires a PCA model");
    const auto& t = raw.text;
    row.text.push("sent_mean", t.sent_mean);
    row.text.push("sent_vol", t.sent_vol);
    row.text.push("n_articles", static_cast<double>(t.n_articles));
    const std::vector<double> projected =
        t.pooled_embedding ? pca_transform(*pca, *t.pooled_embedding)
                           : std::vector<double>(pca->retained_k, 0.0);
    for (std::size_t k = 0; k < projected.size(); ++k) {
      row.text.push("emb_pc" + std::to_string(k + 1), projected[k]);
    }
  }
  return row;
}

inline std::vector<RawFeatures> raw_features_for(const Dataset& ds,
                                                 std::span<const ObservationKey> keys) {
  std::vector<RawFeatures> out;
  out.reserve(keys.size());
  for (const auto& k : keys) {
    if (auto raw = raw_features(ds, k)) out.push_back(std::move(*raw));
  }
  return out;
}

inline std::vector<FeatureRow> build_rows(std::span<const RawFeatures> raws, Variant variant,
                                          const PcaModel* pca, const Imputer& imputer) {
  std::vector<FeatureRow> rows;
  rows.reserve(raws.size());
  for (const auto& r : raws) rows.push_back(finalize_row(r, variant, pca, imputer));
  return rows;
}

// One row per player holding market history at `asof`, with all rows
// stamped at `asof`.
inline std::vector<FeatureRow> build_matrix(const Dataset& ds, Date asof, const PcaModel* pca,
                                            Variant variant, const Imputer& imputer) {
  std::vector<ObservationKey> keys;
  for (const auto& [id, series] : ds.valuations) keys.push_back({id, asof});
  return build_rows(raw_features_for(ds, keys), variant, pca, imputer);
}

// Pooled embeddings of the observations that have coverage; PCA input.
inline std::vector<std::vector<double>> pooled_embeddings(std::span<const RawFeatures> raws) {
  std::vector<std::vector<double>> out;
  for (const auto& r : raws) {
    if (r.text.pooled_embedding) out.push_back(*r.text.pooled_embedding);
  }
  return out;
}

inline std::string matrix_to_csv(std::span<const FeatureRow> rows) {
  csv::Writer w;
  std::vector<std::string> header = {"player_id", "asof", "target_value_eur"};
  const std::vector<std::string> names =
      rows.empty() ? std::vector<std::string>{} : rows.front().feature_names();
  header.insert(header.end(), names.begin(), names.end());
  w.row(header);
  for (const auto& r : rows) {
    if (r.feature_names() != names) throw DomainError("inconsistent feature names in matrix");
    std::vector<std::string> fields = {r.player_id, r.asof.to_string(),
                                       format_double(r.target_value_eur)};
    for (double v : r.feature_values()) fields.push_back(format_double(v));
    w.row(fields);
  }
  return w.str();
}

inline std::vector<FeatureRow> matrix_from_csv(const std::string& text) {
  const csv::Table t = csv::parse(text);
  const std::size_t c_id = t.column("player_id");
  const std::size_t c_asof = t.column("asof");
  const std::size_t c_target = t.column("target_value_eur");
  std::vector<FeatureRow> rows;
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw ParseError("feature matrix row has wrong width");
    FeatureRow row;
    row.player_id = r[c_id];
    row.asof = Date::parse(r[c_asof]);
    row.target_value_eur = parse_double(r[c_target]);
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i == c_id || i == c_asof || i == c_target) continue;
      // Blocks are not distinguished on disk; everything loads as structured.
      row.structured.push(t.header[i], parse_double(r[i], t.header[i]));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace scoutval
