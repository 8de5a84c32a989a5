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

// Run manifests and the on-disk state directory shared by the CLI and the
// service.
//
// state_dir layout:
//   manifest.json        last run's manifest
//   config.json          pipeline configuration used for training
//   regressor.json       expected-value model
//   classifier.json      undervaluation classifier
//   pca.json             embedding projection
//   imputer.json         training medians
//   threshold.json       q, tau, split boundary and split sizes
//   background.csv       attribution background rows
//   features.csv         latest full-variant row per player
//   reports.jsonl/.csv   latest mispricing report per player
//   trajectories.jsonl   per-player mispricing history
//   scores.csv           every player ranked by probability
//   shortlist.csv        top-k of scores.csv
//   explanations.jsonl   precomputed attributions

#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scoutval/common.hpp"
#include "scoutval/csv.hpp"
#include "scoutval/explain.hpp"
#include "scoutval/features.hpp"
#include "scoutval/gbt.hpp"
#include "scoutval/ingest.hpp"
#include "scoutval/matrix.hpp"
#include "scoutval/mispricing.hpp"
#include "scoutval/pipeline.hpp"

namespace scoutval {

inline constexpr int kSchemaVersion = 1;

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kRegressorFile = "regressor.json";
inline constexpr const char* kClassifierFile = "classifier.json";
inline constexpr const char* kPcaFile = "pca.json";
inline constexpr const char* kImputerFile = "imputer.json";
inline constexpr const char* kThresholdFile = "threshold.json";
inline constexpr const char* kBackgroundFile = "background.csv";
inline constexpr const char* kFeaturesFile = "features.csv";
inline constexpr const char* kReportsFile = "reports.jsonl";
inline constexpr const char* kReportsCsvFile = "reports.csv";
inline constexpr const char* kTrajectoriesFile = "trajectories.jsonl";
inline constexpr const char* kScoresFile = "scores.csv";
inline constexpr const char* kShortlistFile = "shortlist.csv";
inline constexpr const char* kExplanationsFile = "explanations.jsonl";

inline std::string path_in(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

inline nlohmann::json component_versions() {
  return {{"scoutval", std::string(kVersion)},
          {"schema", kSchemaVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                        std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

// Wall-clock time is left out on purpose: every timestamp comes from the
// data, so equal manifests imply equal outputs.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string dataset_fingerprint;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json timestamps = nlohmann::json::object();
  std::vector<std::string> outputs;
};

inline nlohmann::json to_json(const RunManifest& m) {
  return {{"schema_version", kSchemaVersion},
          {"command", m.command},
          {"seed", m.seed},
          {"config_hash", m.config_hash},
          {"dataset_fingerprint", m.dataset_fingerprint},
          {"versions", component_versions()},
          {"config", m.config},
          {"timestamps", m.timestamps},
          {"outputs", m.outputs}};
}

// Earliest and latest valuation dates.
inline nlohmann::json data_timestamps(const Dataset& ds) {
  std::optional<Date> first, last;
  for (const auto& [id, series] : ds.valuations) {
    for (const auto& s : series) {
      if (!first || s.timestamp < *first) first = s.timestamp;
      if (!last || *last < s.timestamp) last = s.timestamp;
    }
  }
  nlohmann::json j = nlohmann::json::object();
  if (first) j["data_start"] = first->to_string();
  if (last) j["data_end"] = last->to_string();
  return j;
}

inline RunManifest pipeline_manifest(std::string command, const Dataset& ds,
                                     const PipelineConfig& cfg) {
  RunManifest m;
  m.command = std::move(command);
  m.seed = cfg.seed;
  m.config_hash = config_hash(cfg);
  m.dataset_fingerprint = dataset_fingerprint(ds);
  m.config = to_json(cfg);
  m.timestamps = data_timestamps(ds);
  return m;
}

inline void write_manifest(const RunManifest& m, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_file(path_in(dir, kManifestFile), to_json(m).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

inline nlohmann::json read_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::vector<nlohmann::json> out;
  const std::string text = read_file(path);
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.n_trees = j.at("n_trees").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_depth = j.at("max_depth").get<int>();
  c.subsample = j.at("subsample").get<double>();
  c.min_child_cover = j.at("min_child_cover").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    c.train_fraction = j.at("train_fraction").get<double>();
    c.quantile_q = j.at("quantile_q").get<double>();
    c.pca_variance = j.at("pca_variance").get<double>();
    c.regressor = train_config_from_json(j.at("regressor"));
    c.classifier = train_config_from_json(j.at("classifier"));
    c.label_mode = parse_label_mode(j.at("label_mode").get<std::string>());
    c.label_source = parse_label_source(j.at("label_source").get<std::string>());
    c.folds = j.at("folds").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Matrices on disk
// ---------------------------------------------------------------------------

inline std::string plain_matrix_to_csv(const Matrix& m) {
  csv::Writer w;
  w.row(m.names());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::vector<std::string> fields;
    for (double v : m.row(i)) fields.push_back(format_double(v));
    w.row(fields);
  }
  return w.str();
}

inline Matrix plain_matrix_from_csv(const std::string& text) {
  const csv::Table t = csv::parse(text);
  Matrix m(t.header, t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i].size() != t.header.size()) throw ParseError("matrix row has wrong width");
    for (std::size_t j = 0; j < t.header.size(); ++j) {
      m(i, j) = parse_double(t.rows[i][j], t.header[j]);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Trained artifacts
// ---------------------------------------------------------------------------

inline void save_trained(const TrainedModels& t, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_file(path_in(dir, kConfigFile), to_json(t.config).dump(2) + "\n");
  save_model(t.regressor, path_in(dir, kRegressorFile));
  save_model(t.classifier, path_in(dir, kClassifierFile));
  write_file(path_in(dir, kPcaFile), to_json(t.pca).dump() + "\n");
  write_file(path_in(dir, kImputerFile), to_json(t.imputer).dump(2) + "\n");
  const nlohmann::json threshold = {{"quantile_q", t.threshold.quantile_q},
                                    {"tau", t.threshold.tau},
                                    {"boundary", t.boundary.to_string()},
                                    {"n_train", t.n_train},
                                    {"n_test", t.n_test}};
  write_file(path_in(dir, kThresholdFile), threshold.dump(2) + "\n");
  write_file(path_in(dir, kBackgroundFile), plain_matrix_to_csv(t.background));
}

inline std::string require_file(const std::string& dir, const char* name,
                                const char* what = "file not found") {
  const std::string p = path_in(dir, name);
  if (!std::filesystem::exists(p)) throw FileError(p, what);
  return p;
}

inline ThresholdSpec threshold_from_json(const nlohmann::json& j) {
  try {
    return {j.at("quantile_q").get<double>(), j.at("tau").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("threshold: ") + e.what());
  }
}

inline GbtModel load_model_file(const std::string& dir, const char* name) {
  return load_model(require_file(dir, name, "model not found"));
}

inline TrainedModels load_trained(const std::string& dir) {
  TrainedModels t;
  t.regressor = load_model_file(dir, kRegressorFile);
  t.classifier = load_model_file(dir, kClassifierFile);
  t.config = pipeline_config_from_json(read_json(require_file(dir, kConfigFile)));
  try {
    t.pca = pca_from_json(read_json(require_file(dir, kPcaFile)));
    t.imputer = imputer_from_json(read_json(require_file(dir, kImputerFile)));
    const nlohmann::json th = read_json(require_file(dir, kThresholdFile));
    t.threshold = threshold_from_json(th);
    t.boundary = Date::parse(th.at("boundary").get<std::string>());
    t.n_train = th.at("n_train").get<std::size_t>();
    t.n_test = th.at("n_test").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(dir + ": " + e.what());
  }
  t.background = plain_matrix_from_csv(read_file(require_file(dir, kBackgroundFile)));
  if (t.regressor.feature_names != t.classifier.feature_names ||
      t.background.names() != t.regressor.feature_names) {
    throw SchemaError(dir + ": model, classifier and background columns disagree");
  }
  return t;
}

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

inline nlohmann::json trajectory_to_json(const std::string& id,
                                         std::span<const MispricingReport> reports) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : reports) list.push_back(to_json(r));
  return {{"player_id", id}, {"reports", std::move(list)}};
}

struct ScoreOutputs {
  std::vector<ScoredObservation> scored;
  std::vector<RankedEntry> ranking;
};

// Latest reports, trajectories, feature rows and the full ranking.
inline ScoreOutputs write_scores(const Dataset& ds, const TrainedModels& m,
                                 const std::string& dir) {
  std::filesystem::create_directories(dir);
  ScoreOutputs out;
  out.scored = score_latest(ds, m);
  out.ranking = rank(out.scored);

  std::vector<MispricingReport> reports;
  std::vector<FeatureRow> rows;
  std::string trajectories;
  for (const auto& s : out.scored) {
    reports.push_back(s.report);
    rows.push_back(s.row);
    trajectories += trajectory_to_json(s.report.player_id,
                                       score_trajectory(ds, s.report.player_id, m))
                        .dump();
    trajectories.push_back('\n');
  }
  write_file(path_in(dir, kReportsFile), reports_to_jsonl(reports));
  write_file(path_in(dir, kReportsCsvFile), reports_to_csv(reports));
  write_file(path_in(dir, kFeaturesFile), matrix_to_csv(rows));
  write_file(path_in(dir, kTrajectoriesFile), trajectories);
  write_file(path_in(dir, kScoresFile), shortlist_to_csv(out.ranking));
  return out;
}

inline std::vector<RankedEntry> ranking_from_csv(const std::string& text) {
  const csv::Table t = csv::parse(text);
  const std::size_t c_rank = t.column("rank");
  const std::size_t c_id = t.column("player_id");
  const std::size_t c_prob = t.column("probability");
  const std::size_t c_mis = t.column("mispricing");
  std::vector<RankedEntry> out;
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw ParseError("ranking row has wrong width");
    out.push_back({static_cast<std::size_t>(parse_int(r[c_rank], "rank")), r[c_id],
                   parse_double(r[c_prob], "probability"),
                   parse_double(r[c_mis], "mispricing")});
  }
  return out;
}

inline std::string explanations_to_jsonl(std::span<const Attribution> attributions) {
  std::string out;
  for (const auto& a : attributions) {
    out += to_json(a).dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace scoutval
