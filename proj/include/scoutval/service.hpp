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

// Read-only HTTP service over a state directory.
//
// Requests read one immutable ServingState through an atomically loaded
// shared_ptr. POST /refresh builds a fresh state from disk and swaps it in
// only after every artifact parsed; on failure the old state keeps serving.

#pragma once

#include <atomic>
#include <charconv>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

// Eigen must come before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "scoutval/app.hpp"
#include "httplib.h"
#include "json.hpp"

namespace scoutval {

struct ServingState {
  nlohmann::json manifest;
  GbtModel regressor;
  GbtModel classifier;
  PcaModel pca;
  ThresholdSpec threshold;
  Matrix background;
  std::vector<RankedEntry> ranking;
  std::map<std::string, MispricingReport> latest;
  std::map<std::string, std::vector<MispricingReport>> trajectories;
  std::map<std::string, FeatureRow> features;
  std::map<std::string, Attribution> explanations;  // precomputed subset
};

inline std::shared_ptr<const ServingState> load_serving_state(const std::string& dir) {
  const TrainedModels t = load_trained(dir);
  auto s = std::make_shared<ServingState>();
  s->manifest = read_json(require_file(dir, kManifestFile));
  s->regressor = t.regressor;
  s->classifier = t.classifier;
  s->pca = t.pca;
  s->threshold = t.threshold;
  s->background = t.background;
  s->ranking = ranking_from_csv(read_file(require_file(dir, kScoresFile)));
  try {
    for (const auto& r : reports_from_jsonl(read_file(require_file(dir, kReportsFile)))) {
      s->latest[r.player_id] = r;
    }
    for (const auto& j : read_jsonl(require_file(dir, kTrajectoriesFile))) {
      auto& list = s->trajectories[j.at("player_id").get<std::string>()];
      for (const auto& r : j.at("reports")) list.push_back(report_from_json(r));
    }
    const std::string expl = path_in(dir, kExplanationsFile);
    if (std::filesystem::exists(expl)) {
      for (const auto& j : read_jsonl(expl)) {
        Attribution a = attribution_from_json(j);
        s->explanations[a.player_id] = std::move(a);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(dir + ": " + e.what());
  }
  for (auto& row : matrix_from_csv(read_file(require_file(dir, kFeaturesFile)))) {
    if (row.feature_names() != s->regressor.feature_names) {
      throw SchemaError(dir + ": feature columns do not match the model");
    }
    const std::string id = row.player_id;
    s->features[id] = std::move(row);
  }
  return s;
}

struct Reply {
  int status = 200;
  nlohmann::json body;
};

inline nlohmann::json error_body(std::string_view code, const std::string& message) {
  return {{"schema_version", kSchemaVersion},
          {"error", {{"code", code}, {"message", message}}}};
}

inline constexpr std::size_t kDefaultShortlistK = 20;

class Service {
 public:
  explicit Service(std::string state_dir)
      : dir_(std::move(state_dir)), state_(load_serving_state(dir_)) {}

  std::shared_ptr<const ServingState> state() const { return std::atomic_load(&state_); }

  // `k` is the raw query value, absent when not given.
  Reply shortlist(const std::optional<std::string>& k_text) const {
    std::size_t k = kDefaultShortlistK;
    if (k_text) {
      const char* b = k_text->data();
      const char* e = b + k_text->size();
      long long v = 0;
      const auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || p != e || v < 1) {
        return {400, error_body("bad_request", "k must be a positive integer")};
      }
      k = static_cast<std::size_t>(v);
    }
    const auto s = state();
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < s->ranking.size() && i < k; ++i) {
      const auto& r = s->ranking[i];
      entries.push_back({{"rank", r.rank},
                         {"player_id", r.player_id},
                         {"probability", r.probability},
                         {"mispricing", r.mispricing}});
    }
    return {200,
            {{"schema_version", kSchemaVersion},
             {"k", k},
             {"population", s->ranking.size()},
             {"entries", std::move(entries)}}};
  }

  Reply mispricing(const std::string& id) const {
    const auto s = state();
    const auto it = s->latest.find(id);
    if (it == s->latest.end()) return not_found(id);
    nlohmann::json trajectory = nlohmann::json::array();
    if (auto t = s->trajectories.find(id); t != s->trajectories.end()) {
      for (const auto& r : t->second) trajectory.push_back(to_json(r));
    }
    return {200,
            {{"schema_version", kSchemaVersion},
             {"player_id", id},
             {"tau", s->threshold.tau},
             {"latest", to_json(it->second)},
             {"trajectory", std::move(trajectory)}}};
  }

  Reply explanation(const std::string& id) const {
    const auto s = state();
    if (auto it = s->explanations.find(id); it != s->explanations.end()) {
      return {200, {{"schema_version", kSchemaVersion}, {"explanation", to_json(it->second)}}};
    }
    const auto row = s->features.find(id);
    if (row == s->features.end()) return not_found(id);
    const auto x = align_features(s->regressor.feature_names, row->second.feature_names(),
                                  row->second.feature_values());
    Attribution a = shap_values(s->regressor, x, s->background);
    a.player_id = id;
    return {200, {{"schema_version", kSchemaVersion}, {"explanation", to_json(a)}}};
  }

  Reply refresh() {
    std::lock_guard<std::mutex> lock(refresh_mu_);
    try {
      std::shared_ptr<const ServingState> fresh = load_serving_state(dir_);
      std::atomic_store(&state_, std::move(fresh));
    } catch (const std::exception& e) {
      return {500, error_body("refresh_failed", e.what())};
    }
    return {200, {{"schema_version", kSchemaVersion},
                  {"status", "refreshed"},
                  {"manifest", state()->manifest}}};
  }

  Reply health() const {
    const auto s = state();
    return {200, {{"schema_version", kSchemaVersion},
                  {"status", "ok"},
                  {"players", s->latest.size()},
                  {"manifest", s->manifest}}};
  }

  void install(httplib::Server& server) {
    auto send = [](httplib::Response& res, const Reply& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server.Get("/shortlist", [this, send](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> k;
      if (req.has_param("k")) k = req.get_param_value("k");
      send(res, shortlist(k));
    });
    server.Get(R"(/players/([^/]+)/mispricing)",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 send(res, mispricing(req.matches[1]));
               });
    server.Get(R"(/players/([^/]+)/explanation)",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 send(res, explanation(req.matches[1]));
               });
    server.Post("/refresh", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, refresh());
    });
    server.Get("/health", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, health());
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        res.set_content(error_body("http_" + std::to_string(res.status), "no such route").dump(),
                        "application/json");
      }
    });
    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          std::string what = "internal error";
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            what = e.what();
          } catch (...) {
          }
          res.status = 500;
          res.set_content(error_body("internal", what).dump(), "application/json");
        });
  }

 private:
  static Reply not_found(const std::string& id) {
    return {404, error_body("not_found", "unknown player '" + id + "'")};
  }

  std::string dir_;
  std::shared_ptr<const ServingState> state_;
  std::mutex refresh_mu_;
};

}  // namespace scoutval
