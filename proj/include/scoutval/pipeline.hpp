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

// End-to-end stages: observation rows, chronological split, train-fitted
// preprocessing, the label stage, the ablation harness and the deployable
// trained state.

#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scoutval/common.hpp"
#include "scoutval/explain.hpp"
#include "scoutval/features.hpp"
#include "scoutval/gbt.hpp"
#include "scoutval/ingest.hpp"
#include "scoutval/linear.hpp"
#include "scoutval/matrix.hpp"
#include "scoutval/metrics.hpp"
#include "scoutval/mispricing.hpp"

namespace scoutval {

// How training-split mispricing is obtained for the label stage.
//   in_sample: residuals of the regressor fitted on the whole training split.
//   cross_fit: out-of-fold residuals from K regressors, each fitted without
//              the fold it scores.
enum class LabelMode { kInSample, kCrossFit };

inline std::string_view to_string(LabelMode m) {
  return m == LabelMode::kInSample ? "in_sample" : "cross_fit";
}

inline LabelMode parse_label_mode(std::string_view s) {
  if (s == "in_sample") return LabelMode::kInSample;
  if (s == "cross_fit") return LabelMode::kCrossFit;
  throw DomainError("unknown label mode '" + std::string(s) + "'");
}

// Which regressor defines the ablation labels.
//   shared:      the full-feature regressor labels every variant, so all
//                classification cells score one target.
//   per_variant: each variant labels with its own regressor.
enum class LabelSource { kShared, kPerVariant };

inline std::string_view to_string(LabelSource s) {
  return s == LabelSource::kShared ? "shared" : "per_variant";
}

inline LabelSource parse_label_source(std::string_view s) {
  if (s == "shared") return LabelSource::kShared;
  if (s == "per_variant") return LabelSource::kPerVariant;
  throw DomainError("unknown label source '" + std::string(s) + "'");
}

struct PipelineConfig {
  double train_fraction = 0.8;
  double quantile_q = kDefaultQuantile;
  double pca_variance = kPcaVarianceTarget;
  TrainConfig regressor;
  TrainConfig classifier;
  LabelMode label_mode = LabelMode::kCrossFit;
  LabelSource label_source = LabelSource::kShared;
  int folds = 5;
  std::uint64_t seed = 7;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      throw DomainError("train_fraction must be in (0, 1)");
    }
    if (!(quantile_q > 0.0 && quantile_q < 1.0)) throw DomainError("quantile_q must be in (0, 1)");
    if (!(pca_variance > 0.0 && pca_variance <= 1.0)) {
      throw DomainError("pca_variance must be in (0, 1]");
    }
    if (folds < 2) throw DomainError("folds must be >= 2");
    regressor.validate();
    classifier.validate();
  }

  // Learner seeds derive from the master seed so one number pins a run.
  TrainConfig regressor_config() const {
    TrainConfig c = regressor;
    c.seed = Rng::splitmix64(seed ^ 0x5EED0001ULL);
    return c;
  }
  TrainConfig classifier_config() const {
    TrainConfig c = classifier;
    c.seed = Rng::splitmix64(seed ^ 0x5EED0002ULL);
    return c;
  }
};

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {{"train_fraction", c.train_fraction},
          {"quantile_q", c.quantile_q},
          {"pca_variance", c.pca_variance},
          {"regressor", to_json(c.regressor)},
          {"classifier", to_json(c.classifier)},
          {"label_mode", std::string(to_string(c.label_mode))},
          {"label_source", std::string(to_string(c.label_source))},
          {"folds", c.folds},
          {"seed", c.seed}};
}

inline std::string config_hash(const PipelineConfig& c) { return fnv1a_hex(to_json(c).dump()); }

// Order-independent digest of every value the pipeline reads.
inline std::string dataset_fingerprint(const Dataset& ds) {
  Fnv1a h;
  auto field = [&](std::string_view s) {
    h.update(s);
    h.update(std::string_view("\x1f", 1));
  };
  for (const auto& [id, p] : ds.players) {
    field(id);
    field(p.name);
    field(optional_to_string(p.birth_date));
    field(optional_to_string(p.height_cm));
    field(p.nationality);
    field(optional_to_string(p.contract_start));
    field(optional_to_string(p.contract_expiry));
    for (const auto& t : p.transfers) {
      field(t.date.to_string());
      field(t.from_club);
      field(t.to_club);
      field(optional_to_string(t.fee_eur));
      field(to_string(t.category));
    }
  }
  for (const auto& [id, series] : ds.valuations) {
    for (const auto& v : series) {
      field(id);
      field(v.timestamp.to_string());
      field(format_double(v.value_eur));
    }
  }
  for (const auto& [id, list] : ds.articles) {
    for (const auto& a : list) {
      field(a.article_id);
      field(a.player_id);
      field(a.published_at.to_string());
      field(format_double(a.sentiment));
      for (double e : a.embedding) field(format_double(e));
      field(std::to_string(a.token_count));
    }
  }
  return h.hex();
}

// PCA stand-in when the training split has too few articles to fit one.
inline PcaModel empty_pca(std::size_t dim) {
  PcaModel m;
  m.mean_vector.assign(dim, 0.0);
  m.retained_k = 0;
  return m;
}

struct PreparedData {
  Split<RawFeatures> split;
  Imputer imputer;
  PcaModel pca;
};

// Latest observation per player, chronological split, then imputation
// medians and PCA fitted on the training side only.
inline PreparedData prepare(const Dataset& ds, const PipelineConfig& cfg) {
  cfg.validate();
  const auto keys = latest_observations(ds, dataset_end(ds));
  PreparedData p;
  p.split = chronological_split(raw_features_for(ds, keys), cfg.train_fraction);
  p.imputer = Imputer::fit(p.split.train);
  const auto pooled = pooled_embeddings(p.split.train);
  p.pca = pooled.size() >= 2 ? fit_pca(pooled, cfg.pca_variance) : empty_pca(ds.embedding_dim);
  return p;
}

inline std::vector<double> log_targets(std::span<const RawFeatures> raws) {
  std::vector<double> y;
  y.reserve(raws.size());
  for (const auto& r : raws) y.push_back(log_value(r.target_value_eur));
  return y;
}

inline Matrix variant_matrix(std::span<const RawFeatures> raws, Variant v,
                             const PreparedData& prep) {
  const auto rows = build_rows(raws, v, &prep.pca, prep.imputer);
  return Matrix::from_rows(rows);
}

struct LabelStage {
  Variant variant = Variant::kFull;
  GbtModel regressor;  // fitted on the whole training split
  std::vector<double> train_pred, test_pred;  // log scale
  std::vector<double> train_mispricing, test_mispricing;
  ThresholdSpec threshold;
  std::vector<char> train_labels, test_labels;
};

namespace detail {

// Out-of-fold predictions with seeded fold assignment.
inline std::vector<double> cross_fit_predictions(const Matrix& x, std::span<const double> y,
                                                 const TrainConfig& rc, int folds,
                                                 std::uint64_t seed) {
  const std::size_t n = x.rows();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::substream(seed, 0xF01D5ULL);
  rng.shuffle(order);
  std::vector<int> fold_of(n);
  for (std::size_t r = 0; r < n; ++r) fold_of[order[r]] = static_cast<int>(r % folds);

  std::vector<double> out(n, 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<std::vector<double>> cols_in(x.cols());
    std::vector<double> y_in;
    std::vector<std::size_t> held;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == f) {
        held.push_back(i);
        continue;
      }
      for (std::size_t j = 0; j < x.cols(); ++j) cols_in[j].push_back(x(i, j));
      y_in.push_back(y[i]);
    }
    TrainConfig c = rc;
    c.seed = Rng::splitmix64(rc.seed + static_cast<std::uint64_t>(f) + 1);
    const GbtModel m = train_regressor(Matrix::from_columns(x.names(), cols_in), y_in, c);
    for (std::size_t i : held) out[i] = m.predict_values(x.row(i));
  }
  return out;
}

inline std::vector<double> mispricing_of(std::span<const double> pred,
                                         std::span<const double> y_log) {
  std::vector<double> m(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) m[i] = pred[i] - y_log[i];
  return m;
}

}  // namespace detail

// Regressor on the variant's features, mispricing on the training split,
// tau from the training distribution, labels on both splits.
inline LabelStage label_stage(const PreparedData& prep, const PipelineConfig& cfg,
                              Variant variant = Variant::kFull) {
  const Matrix x_train = variant_matrix(prep.split.train, variant, prep);
  const Matrix x_test = variant_matrix(prep.split.test, variant, prep);
  const auto y_train = log_targets(prep.split.train);
  const auto y_test = log_targets(prep.split.test);
  const TrainConfig rc = cfg.regressor_config();

  LabelStage s;
  s.variant = variant;
  s.regressor = train_regressor(x_train, y_train, rc);
  s.test_pred = predict_all(s.regressor, x_test);
  s.train_pred = cfg.label_mode == LabelMode::kInSample
                     ? predict_all(s.regressor, x_train)
                     : detail::cross_fit_predictions(x_train, y_train, rc, cfg.folds, cfg.seed);
  s.train_mispricing = detail::mispricing_of(s.train_pred, y_train);
  s.test_mispricing = detail::mispricing_of(s.test_pred, y_test);
  s.threshold.quantile_q = cfg.quantile_q;
  s.threshold.tau = quantile_threshold(s.train_mispricing, cfg.quantile_q);
  s.train_labels = label_undervalued(s.train_mispricing, s.threshold.tau);
  s.test_labels = label_undervalued(s.test_mispricing, s.threshold.tau);
  return s;
}

// ---------------------------------------------------------------------------
// Ablation harness
// ---------------------------------------------------------------------------

struct MetricsReport {
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> r2;
  std::optional<double> roc_auc;
  double f1 = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

enum class Learner { kGbt, kLinear };

inline std::string_view to_string(Learner l) { return l == Learner::kGbt ? "gbt" : "linear"; }

struct AblationCell {
  Variant variant = Variant::kFull;
  Learner learner = Learner::kGbt;
  MetricsReport metrics;
};

// Labels of one variant: its own regressor, tau and positive counts.
struct VariantLabels {
  Variant variant = Variant::kFull;
  ThresholdSpec threshold;
  std::size_t n_train_positive = 0;
  std::size_t n_test_positive = 0;
};

struct AblationTable {
  std::vector<AblationCell> cells;  // variant-major: full, no_text, text_only
  std::vector<VariantLabels> labels;
  double quantile_q = kDefaultQuantile;
  Date boundary;

  const VariantLabels& label(Variant v) const {
    for (const auto& l : labels) {
      if (l.variant == v) return l;
    }
    throw DomainError("ablation variant not found");
  }
  const AblationCell& cell(Variant v, Learner l) const {
    for (const auto& c : cells) {
      if (c.variant == v && c.learner == l) return c;
    }
    throw DomainError("ablation cell not found");
  }
};

inline constexpr std::array<Variant, 3> kVariants = {Variant::kFull, Variant::kNoText,
                                                     Variant::kTextOnly};

namespace detail {

inline std::vector<double> class_weights(std::span<const char> labels) {
  std::size_t pos = 0;
  for (char c : labels) pos += c ? 1 : 0;
  const double pw = pos == 0 ? 1.0
                             : static_cast<double>(labels.size() - pos) / static_cast<double>(pos);
  std::vector<double> w(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) w[i] = labels[i] ? pw : 1.0;
  return w;
}

inline MetricsReport evaluate_cell(const PreparedData& prep, const LabelStage& labels,
                                   const PipelineConfig& cfg, Variant v, Learner l) {
  const Matrix x_train = variant_matrix(prep.split.train, v, prep);
  const Matrix x_test = variant_matrix(prep.split.test, v, prep);
  const auto y_train = log_targets(prep.split.train);
  const auto y_test = log_targets(prep.split.test);

  std::vector<double> reg_pred, prob;
  if (l == Learner::kGbt) {
    reg_pred = labels.variant == v
                   ? labels.test_pred
                   : predict_all(train_regressor(x_train, y_train, cfg.regressor_config()), x_test);
    prob = predict_all(train_classifier(x_train, labels.train_labels, cfg.classifier_config()),
                       x_test);
  } else {
    reg_pred = LinearPipeline::fit(x_train, y_train).predict_all(x_test);
    const Standardizer st = Standardizer::fit(x_train);
    const auto w = class_weights(labels.train_labels);
    const LinearModel lm = fit_logistic(st.apply(x_train), labels.train_labels, w);
    const auto margins = lm.predict_all(st.apply(x_test));
    prob.resize(margins.size());
    for (std::size_t i = 0; i < margins.size(); ++i) prob[i] = logistic(margins[i]);
  }

  const auto reg = regression_metrics(y_test, reg_pred);
  MetricsReport m;
  m.rmse = reg.rmse;
  m.mae = reg.mae;
  m.r2 = reg.r2;
  m.roc_auc = roc_auc(labels.test_labels, prob);
  std::vector<char> hard(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) hard[i] = prob[i] >= 0.5 ? 1 : 0;
  m.f1 = f1_score(labels.test_labels, hard);
  m.n_train = prep.split.train.size();
  m.n_test = prep.split.test.size();
  return m;
}

}  // namespace detail

// Every variant trains its regressors and classifiers on its own feature
// block. Labels come from the boosted regressor named by label_source; both
// learners of a variant classify the same labels. All cells share the
// split, the train-fitted preprocessing and the seed.
inline AblationTable run_ablation(const PreparedData& prep, const PipelineConfig& cfg) {
  AblationTable t;
  t.quantile_q = cfg.quantile_q;
  t.boundary = prep.split.boundary;
  std::optional<LabelStage> shared;
  if (cfg.label_source == LabelSource::kShared) shared = label_stage(prep, cfg, Variant::kFull);
  for (Variant v : kVariants) {
    const LabelStage labels = shared ? *shared : label_stage(prep, cfg, v);
    VariantLabels vl;
    vl.variant = v;
    vl.threshold = labels.threshold;
    for (char c : labels.train_labels) vl.n_train_positive += c ? 1 : 0;
    for (char c : labels.test_labels) vl.n_test_positive += c ? 1 : 0;
    t.labels.push_back(vl);
    for (Learner l : {Learner::kGbt, Learner::kLinear}) {
      t.cells.push_back({v, l, detail::evaluate_cell(prep, labels, cfg, v, l)});
    }
  }
  return t;
}

inline AblationTable run_ablation(const Dataset& ds, const PipelineConfig& cfg) {
  return run_ablation(prepare(ds, cfg), cfg);
}

inline std::string optional_metric(const std::optional<double>& v) {
  return v ? format_double(*v) : "NA";
}

inline std::string ablation_to_csv(const AblationTable& t) {
  csv::Writer w;
  w.row({"quantile_q", "tau", "variant", "learner", "n_train", "n_test", "rmse", "mae", "r2",
         "roc_auc", "f1"});
  for (const auto& c : t.cells) {
    const auto& m = c.metrics;
    w.row({format_double(t.quantile_q), format_double(t.label(c.variant).threshold.tau),
           std::string(to_string(c.variant)), std::string(to_string(c.learner)),
           std::to_string(m.n_train), std::to_string(m.n_test), format_double(m.rmse),
           format_double(m.mae), optional_metric(m.r2), optional_metric(m.roc_auc),
           format_double(m.f1)});
  }
  return w.str();
}

inline std::string ablation_to_text(const AblationTable& t) {
  auto fixed = [](const std::optional<double>& v) {
    if (!v) return std::string("NA");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  char head[160];
  std::string out;
  std::snprintf(head, sizeof head, "q = %.2f  boundary = %s\n", t.quantile_q,
                t.boundary.to_string().c_str());
  out += head;
  for (const auto& l : t.labels) {
    std::snprintf(head, sizeof head, "  %-10s tau = %.6f  positives = %zu train, %zu test\n",
                  std::string(to_string(l.variant)).c_str(), l.threshold.tau, l.n_train_positive,
                  l.n_test_positive);
    out += head;
  }
  std::snprintf(head, sizeof head, "%-10s %-7s %7s %7s %8s %8s %8s %8s %8s\n", "variant",
                "learner", "n_train", "n_test", "rmse", "mae", "r2", "roc_auc", "f1");
  out += head;
  for (const auto& c : t.cells) {
    const auto& m = c.metrics;
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %-7s %7zu %7zu %8s %8s %8s %8s %8s\n",
                  std::string(to_string(c.variant)).c_str(),
                  std::string(to_string(c.learner)).c_str(), m.n_train, m.n_test,
                  fixed(m.rmse).c_str(), fixed(m.mae).c_str(), fixed(m.r2).c_str(),
                  fixed(m.roc_auc).c_str(), fixed(m.f1).c_str());
    out += line;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deployable state
// ---------------------------------------------------------------------------

struct TrainedModels {
  PipelineConfig config;
  Imputer imputer;
  PcaModel pca;
  GbtModel regressor;
  GbtModel classifier;
  ThresholdSpec threshold;
  Date boundary;
  Matrix background;  // full-variant training rows for attributions
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

inline TrainedModels train_models(const Dataset& ds, const PipelineConfig& cfg) {
  const PreparedData prep = prepare(ds, cfg);
  const LabelStage labels = label_stage(prep, cfg);
  const Matrix x_train = variant_matrix(prep.split.train, Variant::kFull, prep);

  TrainedModels t;
  t.config = cfg;
  t.imputer = prep.imputer;
  t.pca = prep.pca;
  t.regressor = labels.regressor;
  t.classifier = train_classifier(x_train, labels.train_labels, cfg.classifier_config());
  t.threshold = labels.threshold;
  t.boundary = prep.split.boundary;
  t.n_train = prep.split.train.size();
  t.n_test = prep.split.test.size();

  const auto idx = sample_background(x_train.rows(), cfg.seed);
  t.background = Matrix(x_train.names(), idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto src = x_train.row(idx[r]);
    std::copy(src.begin(), src.end(), t.background.row_ptr(r));
  }
  return t;
}

struct ScoredObservation {
  FeatureRow row;
  MispricingReport report;
  double probability = 0.0;
};

inline ScoredObservation score_raw(const RawFeatures& raw, const TrainedModels& m) {
  ScoredObservation s;
  s.row = finalize_row(raw, Variant::kFull, &m.pca, m.imputer);
  const double log_expected = predict(m.regressor, s.row);
  s.report = make_report(raw.key.player_id, raw.key.asof, raw.target_value_eur, log_expected,
                         m.threshold.tau);
  s.probability = predict(m.classifier, s.row);
  return s;
}

// Every player's latest observation, sorted by player id.
inline std::vector<ScoredObservation> score_latest(const Dataset& ds, const TrainedModels& m) {
  std::vector<ScoredObservation> out;
  for (const auto& raw : raw_features_for(ds, latest_observations(ds, dataset_end(ds)))) {
    out.push_back(score_raw(raw, m));
  }
  return out;
}

inline constexpr int kTrajectoryStride = 4;  // snapshots between trajectory points

// Mispricing at every kTrajectoryStride-th snapshot plus the latest one.
inline std::vector<MispricingReport> score_trajectory(const Dataset& ds, const std::string& id,
                                                      const TrainedModels& m) {
  std::vector<MispricingReport> out;
  auto it = ds.valuations.find(id);
  if (it == ds.valuations.end()) return out;
  const auto& series = it->second;
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (i % kTrajectoryStride != 0 && i + 1 != series.size()) continue;
    if (auto raw = raw_features(ds, {id, series[i].timestamp})) {
      out.push_back(score_raw(*raw, m).report);
    }
  }
  return out;
}

inline std::vector<RankedEntry> rank(std::span<const ScoredObservation> scored) {
  std::map<std::string, double> prob;
  std::map<std::string, double> mis;
  for (const auto& s : scored) {
    prob[s.row.player_id] = s.probability;
    mis[s.row.player_id] = s.report.mispricing;
  }
  std::vector<RankedEntry> out;
  const auto top = shortlist(prob, std::max<std::size_t>(1, prob.size()));
  for (std::size_t i = 0; i < top.size() && !prob.empty(); ++i) {
    out.push_back({i + 1, top[i].player_id, top[i].probability, mis[top[i].player_id]});
  }
  return out;
}

inline Attribution explain_row(const TrainedModels& m, const FeatureRow& row) {
  const auto x = align_features(m.regressor.feature_names, row.feature_names(),
                                row.feature_values());
  Attribution a = shap_values(m.regressor, x, m.background);
  a.player_id = row.player_id;
  return a;
}

}  // namespace scoutval
