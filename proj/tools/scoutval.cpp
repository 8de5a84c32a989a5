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

// scoutval command line: ingest | featurize | train | score | shortlist |
// ablate | explain | synth | serve.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scoutval/app.hpp"
#include "scoutval/service.hpp"
#include "scoutval/synth.hpp"

namespace fs = std::filesystem;
using namespace scoutval;

namespace {

struct PipelineFlags {
  std::uint64_t seed = 7;
  double q = kDefaultQuantile;
  double train_fraction = 0.8;
  std::string label_mode = "cross_fit";
  std::string label_source = "shared";
  int trees = 500;
  std::int64_t min_tokens = kDefaultMinTokens;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "master seed")->capture_default_str();
    cmd->add_option("--q", q, "label quantile")->capture_default_str()->check(
        CLI::Range(0.0, 1.0));
    cmd->add_option("--train-fraction", train_fraction, "chronological train share")
        ->capture_default_str();
    cmd->add_option("--label-mode", label_mode, "in_sample | cross_fit")
        ->capture_default_str()
        ->check(CLI::IsMember({"in_sample", "cross_fit"}));
    cmd->add_option("--label-source", label_source, "shared | per_variant")
        ->capture_default_str()
        ->check(CLI::IsMember({"shared", "per_variant"}));
    cmd->add_option("--trees", trees, "boosting rounds for both learners")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--min-tokens", min_tokens, "drop articles shorter than this")
        ->capture_default_str();
  }

  PipelineConfig config() const {
    PipelineConfig c;
    c.seed = seed;
    c.quantile_q = q;
    c.train_fraction = train_fraction;
    c.label_mode = parse_label_mode(label_mode);
    c.label_source = parse_label_source(label_source);
    c.regressor.n_trees = trees;
    c.classifier.n_trees = trees;
    c.validate();
    return c;
  }
};

Dataset load_or_throw(const std::string& dir, std::int64_t min_tokens) {
  if (!fs::is_directory(dir)) throw FileError(dir, "data directory not found");
  LoadedDataset loaded = load_dataset(dir, min_tokens);
  for (const auto& e : loaded.report.row_errors) std::cerr << "warning: " << e << "\n";
  return std::move(loaded.dataset);
}

void record(RunManifest& m, const std::string& dir, std::initializer_list<const char*> files) {
  for (const char* f : files) m.outputs.push_back(f);
  write_manifest(m, dir);
}

// Manifest for commands that only read a state directory: identity fields
// carry over from the run that produced it.
RunManifest derived_manifest(std::string command, const std::string& state) {
  RunManifest m;
  m.command = std::move(command);
  const std::string p = path_in(state, kManifestFile);
  if (fs::exists(p)) {
    const auto prev = read_json(p);
    m.seed = prev.value("seed", std::uint64_t{0});
    m.config_hash = prev.value("config_hash", std::string());
    m.dataset_fingerprint = prev.value("dataset_fingerprint", std::string());
    m.config = prev.value("config", nlohmann::json::object());
    m.timestamps = prev.value("timestamps", nlohmann::json::object());
  }
  return m;
}

nlohmann::json orphans_to_json(const OrphanReport& o) {
  return {{"valuation_player_ids", o.valuation_player_ids},
          {"article_player_ids", o.article_player_ids},
          {"transfer_player_ids", o.transfer_player_ids},
          {"dropped_short_articles", o.dropped_short_articles}};
}

int run_ingest(const std::string& data, const std::string& out, std::int64_t min_tokens) {
  if (!fs::is_directory(data)) throw FileError(data, "data directory not found");
  LoadedDataset loaded = load_dataset(data, min_tokens);
  write_dataset(loaded.dataset, out);
  const nlohmann::json report = {{"players", loaded.dataset.players.size()},
                                 {"row_errors", loaded.report.row_errors},
                                 {"orphans", orphans_to_json(loaded.report.orphans)}};
  write_file(path_in(out, "ingest_report.json"), report.dump(2) + "\n");
  RunManifest m;
  m.command = "ingest";
  m.dataset_fingerprint = dataset_fingerprint(loaded.dataset);
  m.config = {{"min_tokens", min_tokens}};
  m.config_hash = fnv1a_hex(m.config.dump());
  m.timestamps = data_timestamps(loaded.dataset);
  record(m, out,
         {kPlayersFile, kValuationsFile, kTransfersFile, kArticlesFile, "ingest_report.json"});
  std::cerr << "ingested " << loaded.dataset.players.size() << " players, "
            << loaded.report.row_errors.size() << " rejected rows\n";
  return 0;
}

int run_featurize(const std::string& data, const std::string& out, const PipelineFlags& f,
                  const std::string& variant_name) {
  const PipelineConfig cfg = f.config();
  const Variant variant = parse_variant(variant_name);
  const Dataset ds = load_or_throw(data, f.min_tokens);
  const PreparedData prep = prepare(ds, cfg);
  fs::create_directories(out);
  write_file(path_in(out, "features_train.csv"),
             matrix_to_csv(build_rows(prep.split.train, variant, &prep.pca, prep.imputer)));
  write_file(path_in(out, "features_test.csv"),
             matrix_to_csv(build_rows(prep.split.test, variant, &prep.pca, prep.imputer)));
  write_file(path_in(out, kPcaFile), to_json(prep.pca).dump() + "\n");
  write_file(path_in(out, kImputerFile), to_json(prep.imputer).dump(2) + "\n");
  RunManifest m = pipeline_manifest("featurize", ds, cfg);
  m.timestamps["split_boundary"] = prep.split.boundary.to_string();
  record(m, out, {"features_train.csv", "features_test.csv", kPcaFile, kImputerFile});
  return 0;
}

int run_train(const std::string& data, const std::string& state, const PipelineFlags& f) {
  const PipelineConfig cfg = f.config();
  const Dataset ds = load_or_throw(data, f.min_tokens);
  const TrainedModels t = train_models(ds, cfg);
  save_trained(t, state);
  RunManifest m = pipeline_manifest("train", ds, cfg);
  m.timestamps["split_boundary"] = t.boundary.to_string();
  record(m, state,
         {kConfigFile, kRegressorFile, kClassifierFile, kPcaFile, kImputerFile, kThresholdFile,
          kBackgroundFile});
  std::cerr << "trained on " << t.n_train << " rows, tau = " << t.threshold.tau << "\n";
  return 0;
}

int run_score(const std::string& data, const std::string& state, std::int64_t min_tokens) {
  const TrainedModels t = load_trained(state);
  const Dataset ds = load_or_throw(data, min_tokens);
  const ScoreOutputs out = write_scores(ds, t, state);
  RunManifest m = pipeline_manifest("score", ds, t.config);
  m.timestamps["split_boundary"] = t.boundary.to_string();
  record(m, state,
         {kReportsFile, kReportsCsvFile, kFeaturesFile, kTrajectoriesFile, kScoresFile});
  std::cerr << "scored " << out.scored.size() << " players\n";
  return 0;
}

int run_shortlist(const std::string& state, std::size_t k, std::string out) {
  if (k < 1) throw DomainError("--k must be >= 1");
  auto ranking = ranking_from_csv(read_file(require_file(state, kScoresFile, "scores not found")));
  if (ranking.size() < k) {
    std::cerr << "warning: population of " << ranking.size() << " is smaller than k = " << k
              << "\n";
  }
  if (ranking.size() > k) ranking.resize(k);
  if (out.empty()) out = path_in(state, kShortlistFile);
  write_file(out, shortlist_to_csv(ranking));
  RunManifest m = derived_manifest("shortlist", state);
  m.config["k"] = k;
  m.outputs.push_back(out);
  write_manifest(m, fs::path(out).parent_path().empty() ? "." : fs::path(out).parent_path().string());
  return 0;
}

int run_explain(const std::string& state, std::vector<std::string> players, std::size_t top) {
  const TrainedModels t = load_trained(state);
  std::map<std::string, FeatureRow> rows;
  for (auto& r : matrix_from_csv(read_file(require_file(state, kFeaturesFile, "features not found")))) {
    const std::string id = r.player_id;
    rows.emplace(id, std::move(r));
  }
  if (players.empty()) {
    const auto ranking = ranking_from_csv(read_file(require_file(state, kScoresFile)));
    for (std::size_t i = 0; i < ranking.size() && i < top; ++i) {
      players.push_back(ranking[i].player_id);
    }
  }
  std::vector<Attribution> attributions;
  for (const auto& id : players) {
    const auto it = rows.find(id);
    if (it == rows.end()) throw DomainError("unknown player '" + id + "'");
    attributions.push_back(explain_row(t, it->second));
  }
  write_file(path_in(state, kExplanationsFile), explanations_to_jsonl(attributions));
  write_file(path_in(state, "shap_summary.csv"), summary_to_csv(attributions));
  if (!attributions.empty()) {
    write_file(path_in(state, "importance.csv"),
               importance_to_csv(global_importance(attributions)));
  }
  RunManifest m = derived_manifest("explain", state);
  m.outputs = {kExplanationsFile, "shap_summary.csv", "importance.csv"};
  write_manifest(m, state);
  return 0;
}

int run_ablate(const std::string& data, const std::string& out, const PipelineFlags& f,
               std::vector<double> qs, bool sensitivity) {
  PipelineConfig cfg = f.config();
  if (sensitivity) qs = {0.80, 0.85, 0.90};
  if (qs.empty()) qs = {cfg.quantile_q};
  const Dataset ds = load_or_throw(data, f.min_tokens);
  const PreparedData prep = prepare(ds, cfg);

  std::string csv_text, text;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    PipelineConfig c = cfg;
    c.quantile_q = qs[i];
    c.validate();
    const AblationTable table = run_ablation(prep, c);
    std::string part = ablation_to_csv(table);
    // one header for the whole file
    if (i > 0) part.erase(0, part.find('\n') + 1);
    csv_text += part;
    if (i > 0) text += "\n";
    text += ablation_to_text(table);
  }
  fs::create_directories(out);
  write_file(path_in(out, "ablation.csv"), csv_text);
  write_file(path_in(out, "ablation.txt"), text);
  RunManifest m = pipeline_manifest("ablate", ds, cfg);
  m.config["quantiles"] = qs;
  m.config_hash = fnv1a_hex(m.config.dump());
  m.timestamps["split_boundary"] = prep.split.boundary.to_string();
  record(m, out, {"ablation.csv", "ablation.txt"});
  std::cout << text;
  return 0;
}

int run_synth(const SynthConfig& sc, const std::string& out) {
  const SynthResult r = generate(sc);
  write_synth(r, out);
  RunManifest m;
  m.command = "synth";
  m.seed = sc.seed;
  m.config = to_json(sc);
  m.config_hash = fnv1a_hex(m.config.dump());
  m.dataset_fingerprint = dataset_fingerprint(r.dataset);
  m.timestamps = data_timestamps(r.dataset);
  record(m, out,
         {kPlayersFile, kValuationsFile, kTransfersFile, kArticlesFile, kGroundTruthFile,
          kFairValuesFile});
  std::cerr << "generated " << sc.n_players << " players, " << r.truth.undervalued_count()
            << " undervalued\n";
  return 0;
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

int run_serve(const std::string& state, const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw DomainError("--bind must be host:port");
  const std::string host = bind.substr(0, colon);
  const int port = static_cast<int>(parse_int(bind.substr(colon + 1), "port"));
  Service service(state);
  httplib::Server server;
  service.install(server);
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  std::cerr << "serving " << state << " on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw Error("cannot listen on " + bind);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scoutval: transfer-market mispricing pipeline"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string data, out, state, variant = "full", bind = "127.0.0.1:8080", shortlist_out;
  std::size_t k = kDefaultShortlistK, top = 25;
  std::vector<std::string> players;
  std::vector<double> qs;
  bool sensitivity = false;
  std::int64_t min_tokens = kDefaultMinTokens;
  PipelineFlags flags;
  SynthConfig sc;

  auto* ingest = app.add_subcommand("ingest", "validate raw files and write a clean copy");
  ingest->add_option("--data", data, "input directory")->required();
  ingest->add_option("--out", out, "output directory")->required();
  ingest->add_option("--min-tokens", min_tokens, "drop articles shorter than this");

  auto* featurize = app.add_subcommand("featurize", "write train/test feature matrices");
  featurize->add_option("--data", data, "dataset directory")->required();
  featurize->add_option("--out", out, "output directory")->required();
  featurize->add_option("--variant", variant, "full | no_text | text_only")
      ->check(CLI::IsMember({"full", "no_text", "text_only"}));
  flags.attach(featurize);

  auto* train = app.add_subcommand("train", "fit models into a state directory");
  train->add_option("--data", data, "dataset directory")->required();
  train->add_option("--state", state, "state directory")->required();
  flags.attach(train);

  auto* score = app.add_subcommand("score", "score every player with trained models");
  score->add_option("--data", data, "dataset directory")->required();
  score->add_option("--state", state, "state directory")->required();
  score->add_option("--min-tokens", min_tokens, "drop articles shorter than this");

  auto* shortlist_cmd = app.add_subcommand("shortlist", "write the top-k ranked players");
  shortlist_cmd->add_option("--state", state, "state directory")->required();
  shortlist_cmd->add_option("--k", k, "shortlist length")->check(CLI::PositiveNumber);
  shortlist_cmd->add_option("--out", shortlist_out, "output CSV (default state/shortlist.csv)");

  auto* ablate = app.add_subcommand("ablate", "feature-block ablation table");
  ablate->add_option("--data", data, "dataset directory")->required();
  ablate->add_option("--out", out, "results directory")->required();
  ablate->add_option("--quantiles", qs, "label quantiles to run (default: --q)");
  ablate->add_flag("--sensitivity", sensitivity, "run q = 0.80, 0.85 and 0.90");
  flags.attach(ablate);

  auto* explain = app.add_subcommand("explain", "attributions for scored players");
  explain->add_option("--state", state, "state directory")->required();
  explain->add_option("--player", players, "player ids (default: top of the ranking)");
  explain->add_option("--top", top, "ranked players to explain when none given");

  auto* synth = app.add_subcommand("synth", "generate a synthetic market");
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--n-players", sc.n_players)->capture_default_str();
  synth->add_option("--weeks", sc.weeks)->capture_default_str();
  synth->add_option("--embedding-dim", sc.embedding_dim)->capture_default_str();
  synth->add_option("--noise-sigma", sc.noise_sigma)->capture_default_str();
  synth->add_option("--text-signal", sc.text_signal_strength)->capture_default_str();
  synth->add_option("--mispricing-rate", sc.mispricing_rate)->capture_default_str();
  synth->add_option("--discount-min", sc.discount_min)->capture_default_str();
  synth->add_option("--discount-max", sc.discount_max)->capture_default_str();
  synth->add_option("--articles-per-player", sc.articles_per_player)->capture_default_str();
  synth->add_option("--seed", sc.seed)->capture_default_str();

  auto* serve = app.add_subcommand("serve", "HTTP service over a state directory");
  serve->add_option("--state", state, "state directory")->required();
  serve->add_option("--bind", bind, "host:port")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return run_ingest(data, out, min_tokens);
    if (*featurize) return run_featurize(data, out, flags, variant);
    if (*train) return run_train(data, state, flags);
    if (*score) return run_score(data, state, min_tokens);
    if (*shortlist_cmd) return run_shortlist(state, k, shortlist_out);
    if (*ablate) return run_ablate(data, out, flags, qs, sensitivity);
    if (*explain) return run_explain(state, players, top);
    if (*synth) {
      sc.validate();
      return run_synth(sc, out);
    }
    if (*serve) return run_serve(state, bind);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
