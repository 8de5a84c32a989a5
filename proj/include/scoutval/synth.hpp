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

// Seeded synthetic transfer market with a known fair-value function.
//
// Each player i draws structured quantities from substream (seed, 2i) and
// text quantities from (seed, 2i + 1); the undervalued subset comes from a
// dedicated stream. Changing text_signal_strength therefore leaves every
// structured file untouched.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scoutval/common.hpp"
#include "scoutval/csv.hpp"
#include "scoutval/ingest.hpp"
#include "scoutval/mispricing.hpp"

namespace scoutval {

struct SynthConfig {
  int n_players = 2000;
  int weeks = 104;
  int embedding_dim = 8;
  double noise_sigma = 0.05;
  double text_signal_strength = 0.6;
  double mispricing_rate = 0.15;
  double discount_min = 0.2;
  double discount_max = 0.5;
  double articles_per_player = 8.0;
  std::uint64_t seed = 7;

  void validate() const {
    if (n_players < 10) throw DomainError("n_players must be >= 10");
    if (weeks < 4) throw DomainError("weeks must be >= 4");
    if (embedding_dim < 1) throw DomainError("embedding_dim must be >= 1");
    if (!(noise_sigma >= 0.0)) throw DomainError("noise_sigma must be >= 0");
    if (!(text_signal_strength >= 0.0 && text_signal_strength <= 1.0)) {
      throw DomainError("text_signal_strength must be in [0, 1]");
    }
    if (!(mispricing_rate > 0.0 && mispricing_rate < 1.0)) {
      throw DomainError("mispricing_rate must be in (0, 1)");
    }
    if (!(discount_min > 0.0 && discount_min <= discount_max && discount_max < 1.0)) {
      throw DomainError("discounts must satisfy 0 < min <= max < 1");
    }
    if (!(articles_per_player >= 0.0)) throw DomainError("articles_per_player must be >= 0");
  }
};

inline nlohmann::json to_json(const SynthConfig& c) {
  return {{"n_players", c.n_players},
          {"weeks", c.weeks},
          {"embedding_dim", c.embedding_dim},
          {"noise_sigma", c.noise_sigma},
          {"text_signal_strength", c.text_signal_strength},
          {"mispricing_rate", c.mispricing_rate},
          {"discount_min", c.discount_min},
          {"discount_max", c.discount_max},
          {"articles_per_player", c.articles_per_player},
          {"seed", c.seed}};
}

struct FairPoint {
  Date date;
  double fair_value_eur = 0.0;
};

struct PlayerTruth {
  bool true_undervalued = false;
  double injected_discount = 0.0;  // zero unless undervalued
  std::optional<Date> discount_onset;
  std::vector<FairPoint> fair;  // one entry per valuation snapshot
};

struct GroundTruth {
  std::map<std::string, PlayerTruth> players;

  std::size_t undervalued_count() const {
    return static_cast<std::size_t>(std::count_if(
        players.begin(), players.end(), [](const auto& kv) { return kv.second.true_undervalued; }));
  }
};

struct SynthResult {
  Dataset dataset;  // as written to disk; short articles are still present
  GroundTruth truth;
};

inline const Date kSynthEpoch = Date::from_ymd(2015, 1, 5);

namespace detail {

inline constexpr std::array<const char*, 24> kFirstNames = {
    "Jonas", "Luca",  "Mateo",  "Noah",   "Kai",    "Emil",   "Tomas", "Andrés",
    "Björn", "Rafael", "Théo",  "Milan",  "Jakub",  "Nico",   "Oskar", "Samuel",
    "Ivan",  "Pedro",  "Yusuf", "Elias",  "Dario",  "Leo",    "Marek", "Gonçalo"};
inline constexpr std::array<const char*, 24> kLastNames = {
    "Müller",  "Rossi",   "García", "Silva",  "Novak",   "Jensen", "Kovač",  "Dubois",
    "Pereira", "Schmidt", "Öztürk", "Hansen", "Lindqvist", "Moreau", "Costa", "Nowak",
    "Fernández", "Bauer", "Ivanov", "Horvat", "Larsen",  "Ribeiro", "Santos", "Weiß"};
inline constexpr std::array<const char*, 8> kNations = {"DE", "ES", "FR", "IT",
                                                        "PT", "BR", "NL", "HR"};
inline constexpr std::array<const char*, 12> kClubs = {
    "Northbridge", "Portavia",  "Redmoor",  "Saltcliff", "Eastvale", "Granholm",
    "Kestrel FC",  "Lindenau",  "Marisol",  "Ostwick",   "Quarry Utd", "Valbrook"};

inline std::string synth_player_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "p%05d", i);
  return buf;
}

// Log of the fair value for a player at a given age and contract horizon.
// Nonlinear in age with an age x growth interaction, saturating in contract.
inline double log_fair_value(double quality, double growth, double age_years,
                             double contract_years) {
  const double peak = -0.02 * (age_years - 26.5) * (age_years - 26.5);
  const double youth = std::tanh((25.0 - age_years) / 3.0);
  const double contract = 0.2 * std::tanh(contract_years - 1.0);
  return 15.0 + 1.15 * quality + peak + 0.25 * growth * youth + contract;
}

}  // namespace detail

namespace detail {

// Structured draws that precede the choice of the undervalued subset.
struct SynthProfile {
  Rng rs{0};
  double quality = 0.0;
  double growth = 0.0;
  int first_week = 0;
  int last_week = 0;
  Date birth;
  bool has_birth = true;
  double height = 0.0;
  bool has_height = true;
  bool has_contract = true;
  Date c_start;
  Date c_expiry;
  double propensity = 0.0;  // log-weight for undervaluation selection
};

}  // namespace detail

inline SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  using detail::synth_player_id;
  const int n = cfg.n_players;
  // Selection tilt towards short contracts, text latent mix, and the spread
  // of the off-signal embedding axes.
  constexpr double kPropensity = 3.0;
  constexpr double kTextU = 0.6;
  constexpr double kTextQ = 0.5;
  constexpr double kEmbNoise = 0.15;

  std::vector<detail::SynthProfile> profiles(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& pr = profiles[static_cast<std::size_t>(i)];
    pr.rs = Rng::substream(cfg.seed, 2 * static_cast<std::uint64_t>(i));
    Rng& rs = pr.rs;
    pr.quality = rs.normal();
    pr.growth = rs.normal();
    pr.first_week = static_cast<int>(rs.below(static_cast<std::uint64_t>(cfg.weeks / 3 + 1)));
    const int end_lo = std::max(cfg.weeks / 2, pr.first_week + 3);
    pr.last_week = std::min(cfg.weeks - 1,
                            end_lo + static_cast<int>(rs.below(static_cast<std::uint64_t>(
                                         std::max(1, cfg.weeks - end_lo)))));
    const Date first_date = kSynthEpoch + 7 * pr.first_week;
    const double age0 = rs.uniform(17.0, 34.0);
    pr.birth = first_date - static_cast<std::int64_t>(std::llround(age0 * 365.25));
    pr.has_birth = rs.uniform() >= 0.03;
    pr.height = std::round(rs.uniform(165.0, 198.0) * 10.0) / 10.0;
    pr.has_height = rs.uniform() >= 0.05;
    pr.has_contract = rs.uniform() >= 0.05;
    pr.c_start = first_date - static_cast<std::int64_t>(rs.below(3 * 365));
    pr.c_expiry = first_date + 180 + static_cast<std::int64_t>(rs.below(4 * 365));
    // Players entering the final year of a contract are discounted more often.
    const Date last_date = kSynthEpoch + 7 * pr.last_week;
    const double remaining =
        pr.has_contract ? std::clamp(static_cast<double>(pr.c_expiry - last_date) / 365.25, 0.0, 3.0)
                        : 1.5;
    pr.propensity = kPropensity * (1.5 - remaining);
  }

  // Exact seeded count of undervalued players: weighted sampling without
  // replacement (largest log(u) / w keys).
  std::vector<char> undervalued(static_cast<std::size_t>(n), 0);
  {
    const auto n_under =
        static_cast<std::size_t>(std::llround(cfg.mispricing_rate * static_cast<double>(n)));
    Rng pick = Rng::substream(cfg.seed, 0xD15C0u);
    std::vector<std::pair<double, int>> keys;
    for (int i = 0; i < n; ++i) {
      double u = 0.0;
      do {
        u = pick.uniform();
      } while (u <= 0.0);
      keys.emplace_back(std::log(u) / std::exp(profiles[static_cast<std::size_t>(i)].propensity), i);
    }
    std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t k = 0; k < n_under; ++k) undervalued[static_cast<std::size_t>(keys[k].second)] = 1;
  }
  const double rate = cfg.mispricing_rate;
  const double u_scale = std::sqrt(rate * (1.0 - rate));

  std::vector<PlayerRecord> players;
  std::vector<ValuationSnapshot> valuations;
  std::vector<ArticleFeatures> articles;
  SynthResult out;

  for (int i = 0; i < n; ++i) {
    const std::string id = synth_player_id(i);
    auto& pr = profiles[static_cast<std::size_t>(i)];
    Rng& rs = pr.rs;
    Rng rt = Rng::substream(cfg.seed, 2 * static_cast<std::uint64_t>(i) + 1);
    const bool under = undervalued[static_cast<std::size_t>(i)] != 0;
    const double quality = pr.quality, growth = pr.growth;
    const Date first_date = kSynthEpoch + 7 * pr.first_week;
    const Date birth = pr.birth, c_start = pr.c_start, c_expiry = pr.c_expiry;
    const bool has_birth = pr.has_birth, has_height = pr.has_height, has_contract = pr.has_contract;
    const double height = pr.height;
    const double discount_draw = rs.uniform(cfg.discount_min, cfg.discount_max);
    rs.next();  // reserved draw, keeps the later per-player draws at fixed positions
    const double discount = under ? discount_draw : 0.0;
    const int n_weeks = pr.last_week - pr.first_week + 1;

    PlayerRecord p;
    p.player_id = id;
    p.name = std::string(detail::kFirstNames[rs.below(detail::kFirstNames.size())]) + " " +
             detail::kLastNames[rs.below(detail::kLastNames.size())];
    if (has_birth) p.birth_date = birth;
    if (has_height) p.height_cm = height;
    p.nationality = detail::kNations[rs.below(detail::kNations.size())];
    if (has_contract) {
      p.contract_start = c_start;
      p.contract_expiry = c_expiry;
    }

    PlayerTruth truth;
    truth.true_undervalued = under;
    truth.injected_discount = discount;
    // The market marks the player down on the final snapshot only, so the
    // history before it still reflects the fair trajectory.
    const int onset_index = under ? n_weeks - 1 : n_weeks;
    for (int w = 0; w < n_weeks; ++w) {
      const Date d = first_date + 7 * w;
      const double age = static_cast<double>((d - birth)) / 365.25;
      const double contract_years =
          (has_contract ? static_cast<double>(c_expiry - d) : 365.0) / 365.25;
      const double log_fair = detail::log_fair_value(quality, growth, age, contract_years) +
                              cfg.noise_sigma * rs.normal();
      const double fair = std::exp(log_fair);
      const bool discounted = under && w >= onset_index;
      if (discounted && !truth.discount_onset) truth.discount_onset = d;
      truth.fair.push_back({d, fair});
      valuations.push_back({id, d, discounted ? fair * (1.0 - discount) : fair});
    }

    // Transfers: up to three, fees tied to the fair value at the time.
    const int n_transfers = static_cast<int>(rs.below(4));
    std::vector<int> transfer_weeks;
    for (int t = 0; t < n_transfers; ++t) {
      transfer_weeks.push_back(static_cast<int>(rs.below(static_cast<std::uint64_t>(n_weeks))));
    }
    std::sort(transfer_weeks.begin(), transfer_weeks.end());
    transfer_weeks.erase(std::unique(transfer_weeks.begin(), transfer_weeks.end()),
                         transfer_weeks.end());
    std::size_t club = rs.below(detail::kClubs.size());
    for (int w : transfer_weeks) {
      TransferEvent ev;
      ev.date = first_date + 7 * w;
      ev.from_club = detail::kClubs[club];
      club = (club + 1 + rs.below(detail::kClubs.size() - 1)) % detail::kClubs.size();
      ev.to_club = detail::kClubs[club];
      const double kind = rs.uniform();
      const double fee_factor = rs.uniform(0.6, 1.4);
      if (kind < 0.7) {
        ev.category = TransferCategory::kPermanent;
        ev.fee_eur = std::round(truth.fair[static_cast<std::size_t>(w)].fair_value_eur *
                                fee_factor);
      } else if (kind < 0.85) {
        ev.category = TransferCategory::kLoan;
      } else if (kind < 0.95) {
        ev.category = TransferCategory::kFree;
        ev.fee_eur = 0.0;
      }
      p.transfers.push_back(std::move(ev));
    }

    // Text stream: per-player latent mixing ground truth with noise.
    const double s = cfg.text_signal_strength;
    const double signal =
        (kTextQ * quality + kTextU * ((under ? 1.0 : 0.0) - rate) / u_scale) /
        std::sqrt(kTextQ * kTextQ + kTextU * kTextU);
    const double latent = s * signal + std::sqrt(1.0 - s * s) * rt.normal();
    const bool silent = rt.uniform() < 0.08;
    const double lambda = silent ? 0.0 : cfg.articles_per_player;
    // Poisson count by inversion; lambda is small.
    int n_articles = 0;
    if (lambda > 0.0) {
      const double l = std::exp(-lambda);
      double prod = rt.uniform();
      while (prod > l) {
        ++n_articles;
        prod *= rt.uniform();
      }
    }
    for (int a = 0; a < n_articles; ++a) {
      ArticleFeatures art;
      art.article_id = id + "-a" + std::to_string(a);
      art.player_id = id;
      const auto week = static_cast<std::int64_t>(rt.below(static_cast<std::uint64_t>(n_weeks)));
      const auto second = static_cast<std::int64_t>(rt.below(7 * 86400));
      art.published_at = Timestamp((first_date + 7 * week).days() * 86400 + second);
      art.sentiment = std::clamp(std::tanh(0.8 * latent + 0.5 * rt.normal()), -1.0, 1.0);
      art.embedding.resize(static_cast<std::size_t>(cfg.embedding_dim));
      art.embedding[0] = latent + 0.5 * rt.normal();
      for (int k = 1; k < cfg.embedding_dim; ++k) {
        art.embedding[static_cast<std::size_t>(k)] = kEmbNoise * rt.normal();
      }
      art.token_count = rt.uniform() < 0.05 ? static_cast<std::int64_t>(rt.below(3))
                                            : 40 + static_cast<std::int64_t>(rt.below(400));
      articles.push_back(std::move(art));
    }

    players.push_back(std::move(p));
    out.truth.players.emplace(id, std::move(truth));
  }

  out.dataset = assemble(std::move(players), std::move(valuations), std::move(articles), {}, 0)
                    .dataset;
  out.dataset.embedding_dim = static_cast<std::size_t>(cfg.embedding_dim);
  return out;
}

inline constexpr const char* kGroundTruthFile = "ground_truth.csv";
inline constexpr const char* kFairValuesFile = "fair_values.csv";

inline void write_ground_truth(const GroundTruth& truth, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  csv::Writer gt;
  gt.row({"player_id", "true_undervalued", "injected_discount", "discount_onset",
          "final_fair_value_eur"});
  csv::Writer fair;
  fair.row({"player_id", "date", "fair_value_eur"});
  for (const auto& [id, t] : truth.players) {
    gt.row({id, t.true_undervalued ? "1" : "0", format_double(t.injected_discount),
            optional_to_string(t.discount_onset),
            t.fair.empty() ? "" : format_double(t.fair.back().fair_value_eur)});
    for (const auto& f : t.fair) fair.row({id, f.date.to_string(), format_double(f.fair_value_eur)});
  }
  gt.save((fs::path(dir) / kGroundTruthFile).string());
  fair.save((fs::path(dir) / kFairValuesFile).string());
}

// Reads ground_truth.csv (the fair trajectory is not needed for scoring).
inline GroundTruth read_ground_truth(const std::string& path) {
  const csv::Table t = csv::read(path);
  const std::size_t c_id = t.column("player_id");
  const std::size_t c_u = t.column("true_undervalued");
  const std::size_t c_d = t.column("injected_discount");
  const std::size_t c_on = t.column("discount_onset");
  GroundTruth g;
  for (const auto& r : t.rows) {
    PlayerTruth p;
    p.true_undervalued = r.at(c_u) == "1";
    p.injected_discount = parse_double(r.at(c_d), "injected_discount");
    if (!r.at(c_on).empty()) p.discount_onset = Date::parse(r.at(c_on));
    if (!g.players.emplace(r.at(c_id), std::move(p)).second) throw DuplicateKeyError(r.at(c_id));
  }
  return g;
}

inline void write_synth(const SynthResult& result, const std::string& dir) {
  write_dataset(result.dataset, dir);
  write_ground_truth(result.truth, dir);
}

// Fraction of the first k shortlist entries that are truly undervalued.
inline double score_against_truth(std::span<const std::string> shortlist, const GroundTruth& truth,
                                  std::size_t k) {
  if (k < 1 || k > shortlist.size()) throw DomainError("k must be in [1, shortlist length]");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) {
    auto it = truth.players.find(shortlist[i]);
    if (it != truth.players.end() && it->second.true_undervalued) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

}  // namespace scoutval
