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

// Shared helpers for the unit tests: tiny hand-built datasets, a word-list
// sentiment scorer for producing article inputs, and scratch directories.

#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "scoutval/common.hpp"
#include "scoutval/ingest.hpp"

namespace scoutval::testing {

inline Date day(int n) { return Date::from_ymd(2020, 1, 1) + n; }

inline ValuationSnapshot snap(const std::string& id, int d, double v) {
  return {id, day(d), v};
}

inline PlayerRecord player(const std::string& id, const std::string& name) {
  PlayerRecord p;
  p.player_id = id;
  p.name = name;
  p.birth_date = Date::from_ymd(1998, 5, 1);
  p.height_cm = 180.0;
  p.nationality = "ES";
  p.contract_start = Date::from_ymd(2019, 7, 1);
  p.contract_expiry = Date::from_ymd(2023, 6, 30);
  return p;
}

inline ArticleFeatures article(const std::string& aid, const std::string& pid, int d,
                               double sentiment, std::vector<double> emb,
                               std::int64_t tokens = 50) {
  ArticleFeatures a;
  a.article_id = aid;
  a.player_id = pid;
  a.published_at = Timestamp::from_date(day(d), 12);
  a.sentiment = sentiment;
  a.embedding = std::move(emb);
  a.token_count = tokens;
  return a;
}

// Word-list scorer: (positive - negative) / matched words, 0 when nothing
// matches. Only used to fabricate article inputs in tests.
inline double lexicon_sentiment(const std::string& text) {
  static const std::set<std::string> positive = {"brilliant", "decisive", "excellent",
                                                 "strong",    "clinical", "superb"};
  static const std::set<std::string> negative = {"injured", "poor",   "error",
                                                 "dropped", "benched", "weak"};
  std::istringstream in(text);
  std::string w;
  int pos = 0, neg = 0;
  while (in >> w) {
    std::string t;
    for (char c : w) {
      if (std::isalpha(static_cast<unsigned char>(c))) {
        t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      }
    }
    pos += positive.count(t) ? 1 : 0;
    neg += negative.count(t) ? 1 : 0;
  }
  if (pos + neg == 0) return 0.0;
  return static_cast<double>(pos - neg) / static_cast<double>(pos + neg);
}

inline std::int64_t word_count(const std::string& text) {
  std::istringstream in(text);
  std::string w;
  std::int64_t n = 0;
  while (in >> w) ++n;
  return n;
}

// Two players with eight weekly snapshots and a few articles.
inline Dataset small_dataset() {
  std::vector<PlayerRecord> players = {player("p1", "Ana Lopez"), player("p2", "Bo Kim")};
  players[1].height_cm.reset();
  std::vector<ValuationSnapshot> vals;
  for (int w = 0; w < 8; ++w) {
    vals.push_back(snap("p1", 7 * w, 1e6 + 1e5 * w));
    vals.push_back(snap("p2", 7 * w, 5e6 - 2e5 * w));
  }
  const std::vector<std::string> texts = {"brilliant decisive display", "poor error again today",
                                          "strong clinical finish", "benched"};
  std::vector<ArticleFeatures> arts;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const std::string pid = i % 2 == 0 ? "p1" : "p2";
    arts.push_back(article("a" + std::to_string(i), pid, 10 + 7 * static_cast<int>(i),
                           lexicon_sentiment(texts[i]),
                           {static_cast<double>(i), 1.0 - static_cast<double>(i)},
                           word_count(texts[i])));
  }
  return assemble(players, vals, arts, {}, 0).dataset;
}

// Fresh directory under the system temp path, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("scoutval_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace scoutval::testing
