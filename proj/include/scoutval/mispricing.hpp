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

// Log-value targets, mispricing scores, quantile labels and shortlists.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scoutval/common.hpp"
#include "scoutval/csv.hpp"

namespace scoutval {

inline double log_value(double v) {
  if (!(v >= 0.0)) throw DomainError("value must be non-negative");
  return std::log1p(v);
}

inline double value_from_log(double y) { return std::expm1(y); }

// Positive when the model values the player above the market.
inline double mispricing_score(double expected_eur, double observed_eur) {
  return log_value(expected_eur) - log_value(observed_eur);
}

inline constexpr double kDefaultQuantile = 0.85;

struct ThresholdSpec {
  double quantile_q = kDefaultQuantile;
  double tau = 0.0;
};

// Linear interpolation between order statistics at position 1 + q (n - 1).
inline double quantile_threshold(std::span<const double> scores, double q) {
  if (scores.empty()) throw DomainError("quantile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile must be in [0, 1]");
  std::vector<double> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);  // zero-based
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return s[lo];
  return s[lo] + frac * (s[hi] - s[lo]);
}

inline std::vector<char> label_undervalued(std::span<const double> scores, double tau) {
  std::vector<char> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= tau ? 1 : 0;
  return out;
}

struct ShortlistEntry {
  std::string player_id;
  double probability = 0.0;
};

// Top-k by descending probability, ties by ascending player id.
inline std::vector<ShortlistEntry> shortlist(const std::map<std::string, double>& probabilities,
                                             std::size_t k) {
  if (k < 1) throw DomainError("shortlist size must be >= 1");
  std::vector<ShortlistEntry> all;
  all.reserve(probabilities.size());
  for (const auto& [id, p] : probabilities) all.push_back({id, p});
  std::stable_sort(all.begin(), all.end(), [](const ShortlistEntry& a, const ShortlistEntry& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.player_id < b.player_id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

struct MispricingReport {
  std::string player_id;
  Date asof;
  double observed_value_eur = 0.0;
  double expected_value_eur = 0.0;
  double log_observed = 0.0;
  double log_expected = 0.0;
  double mispricing = 0.0;
  bool undervalued = false;
};

// `log_expected` is the regressor output on the log scale.
inline MispricingReport make_report(std::string player_id, Date asof, double observed_eur,
                                    double log_expected, double tau) {
  MispricingReport r;
  r.player_id = std::move(player_id);
  r.asof = asof;
  r.observed_value_eur = observed_eur;
  r.log_observed = log_value(observed_eur);
  r.log_expected = log_expected;
  r.expected_value_eur = value_from_log(log_expected);
  r.mispricing = r.log_expected - r.log_observed;
  r.undervalued = r.mispricing >= tau;
  return r;
}

inline nlohmann::json to_json(const MispricingReport& r) {
  return {{"player_id", r.player_id},
          {"asof", r.asof.to_string()},
          {"observed_value_eur", r.observed_value_eur},
          {"expected_value_eur", r.expected_value_eur},
          {"log_observed", r.log_observed},
          {"log_expected", r.log_expected},
          {"mispricing", r.mispricing},
          {"undervalued", r.undervalued}};
}

inline MispricingReport report_from_json(const nlohmann::json& j) {
  MispricingReport r;
  r.player_id = j.at("player_id").get<std::string>();
  r.asof = Date::parse(j.at("asof").get<std::string>());
  r.observed_value_eur = j.at("observed_value_eur").get<double>();
  r.expected_value_eur = j.at("expected_value_eur").get<double>();
  r.log_observed = j.at("log_observed").get<double>();
  r.log_expected = j.at("log_expected").get<double>();
  r.mispricing = j.at("mispricing").get<double>();
  r.undervalued = j.at("undervalued").get<bool>();
  return r;
}

inline std::string reports_to_csv(std::span<const MispricingReport> reports) {
  csv::Writer w;
  w.row({"player_id", "asof", "observed_value_eur", "expected_value_eur", "log_observed",
         "log_expected", "mispricing", "undervalued"});
  for (const auto& r : reports) {
    w.row({r.player_id, r.asof.to_string(), format_double(r.observed_value_eur),
           format_double(r.expected_value_eur), format_double(r.log_observed),
           format_double(r.log_expected), format_double(r.mispricing),
           r.undervalued ? "1" : "0"});
  }
  return w.str();
}

inline std::string reports_to_jsonl(std::span<const MispricingReport> reports) {
  std::string out;
  for (const auto& r : reports) {
    out += to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

inline std::vector<MispricingReport> reports_from_jsonl(const std::string& text) {
  std::vector<MispricingReport> out;
  for (std::string_view line : split_lines(text)) {
    if (line.empty()) continue;
    try {
      out.push_back(report_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed mispricing report: ") + e.what());
    }
  }
  return out;
}

struct RankedEntry {
  std::size_t rank = 0;
  std::string player_id;
  double probability = 0.0;
  double mispricing = 0.0;
};

// rank,player_id,probability,mispricing
inline std::string shortlist_to_csv(std::span<const RankedEntry> entries) {
  csv::Writer w;
  w.row({"rank", "player_id", "probability", "mispricing"});
  for (const auto& e : entries) {
    w.row({std::to_string(e.rank), e.player_id, format_double(e.probability),
           format_double(e.mispricing)});
  }
  return w.str();
}

}  // namespace scoutval
