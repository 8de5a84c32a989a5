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

// Parsing of the player, transfer, valuation and article input files, entity
// name normalization, and assembly into a time-aligned Dataset.
//
// File layouts (header row required for CSV, empty field = absent):
//   players.csv     player_id,name,birth_date,height_cm,nationality,
//                   contract_start,contract_expiry
//   transfers.csv   player_id,date,from_club,to_club,fee_eur,category
//   valuations.csv  player_id,timestamp,value_eur
//   articles.jsonl  {"article_id","player_id","published_at","sentiment",
//                    "embedding":[...],"token_count"}   (null = absent)

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "scoutval/common.hpp"
#include "scoutval/csv.hpp"

namespace scoutval {

enum class TransferCategory { kPermanent, kLoan, kFree, kUnknown };

inline std::string_view to_string(TransferCategory c) {
  switch (c) {
    case TransferCategory::kPermanent: return "permanent";
    case TransferCategory::kLoan: return "loan";
    case TransferCategory::kFree: return "free";
    case TransferCategory::kUnknown: break;
  }
  return "unknown";
}

inline TransferCategory parse_transfer_category(std::string_view s) {
  if (s == "permanent") return TransferCategory::kPermanent;
  if (s == "loan") return TransferCategory::kLoan;
  if (s == "free") return TransferCategory::kFree;
  if (s == "unknown" || s.empty()) return TransferCategory::kUnknown;
  throw ParseError("invalid transfer category '" + std::string(s) + "'");
}

struct TransferEvent {
  Date date;
  std::string from_club;
  std::string to_club;
  std::optional<double> fee_eur;
  TransferCategory category = TransferCategory::kUnknown;

  auto key() const {
    return std::tie(date, from_club, to_club, fee_eur, category);
  }
  bool operator==(const TransferEvent&) const = default;
};

struct TransferRow {
  std::string player_id;
  TransferEvent event;
};

struct PlayerRecord {
  std::string player_id;
  std::string name;
  std::optional<Date> birth_date;
  std::optional<double> height_cm;
  std::string nationality;
  std::optional<Date> contract_start;
  std::optional<Date> contract_expiry;
  std::vector<TransferEvent> transfers;  // ascending by date

  bool operator==(const PlayerRecord&) const = default;
};

struct ValuationSnapshot {
  std::string player_id;
  Date timestamp;
  double value_eur = 0.0;

  bool operator==(const ValuationSnapshot&) const = default;
};

using ValuationSeries = std::vector<ValuationSnapshot>;

struct ArticleFeatures {
  std::string article_id;
  std::string player_id;
  Timestamp published_at;
  double sentiment = 0.0;
  std::vector<double> embedding;
  std::int64_t token_count = 0;

  bool operator==(const ArticleFeatures&) const = default;
};

struct Dataset {
  std::map<std::string, PlayerRecord> players;
  std::map<std::string, ValuationSeries> valuations;
  std::map<std::string, std::vector<ArticleFeatures>> articles;
  std::size_t embedding_dim = 0;

  bool operator==(const Dataset&) const = default;
};

// A row that failed validation. Parsing continues past it.
struct RowError {
  std::size_t line = 0;
  std::string message;
};

template <typename T>
struct ParseResult {
  std::vector<T> records;
  std::vector<RowError> errors;
};

enum class FileFormat { kCsv, kJsonl };

class AmbiguityError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::optional<std::string_view> optional_field(const csv::Row& row,
                                                      std::size_t col) {
  if (col >= row.size() || row[col].empty()) return std::nullopt;
  return std::string_view(row[col]);
}

inline const std::string& required_field(const csv::Row& row, std::size_t col,
                                         std::string_view name) {
  if (col >= row.size() || row[col].empty()) {
    throw ParseError("empty required field '" + std::string(name) + "'");
  }
  return row[col];
}

inline void check_non_negative(double v, std::string_view what) {
  if (!std::isfinite(v) || v < 0.0) {
    throw ParseError(std::string(what) + " must be a finite non-negative number");
  }
}

inline void validate_player(const PlayerRecord& p) {
  if (p.player_id.empty()) throw ParseError("empty player_id");
  if (p.height_cm && (!std::isfinite(*p.height_cm) || *p.height_cm <= 0.0)) {
    throw ParseError("height_cm must be positive");
  }
  if (p.contract_start && p.contract_expiry && *p.contract_start > *p.contract_expiry) {
    throw ParseError("contract_start after contract_expiry");
  }
}

inline std::vector<std::string_view> jsonl_lines(const std::string& text,
                                                 std::vector<std::size_t>& line_numbers) {
  std::vector<std::string_view> out;
  std::size_t n = 0;
  for (std::string_view line : split_lines(text)) {
    ++n;
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    out.push_back(line);
    line_numbers.push_back(n);
  }
  return out;
}

template <typename T>
std::optional<T> json_optional(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

inline const nlohmann::json& json_required(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw ParseError(std::string("missing required key '") + key + "'");
  }
  return *it;
}

inline std::optional<Date> json_date(const nlohmann::json& obj, const char* key) {
  auto s = json_optional<std::string>(obj, key);
  if (!s || s->empty()) return std::nullopt;
  return Date::parse(*s);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

inline ParseResult<PlayerRecord> parse_players_text(const std::string& text,
                                                    FileFormat format) {
  ParseResult<PlayerRecord> result;
  std::set<std::string> seen;
  auto accept = [&](PlayerRecord p) {
    if (!seen.insert(p.player_id).second) throw DuplicateKeyError(p.player_id);
    result.records.push_back(std::move(p));
  };

  if (format == FileFormat::kCsv) {
    const csv::Table table = csv::parse(text);
    const std::size_t c_id = table.column("player_id");
    const std::size_t c_name = table.column("name");
    const std::size_t c_birth = table.column("birth_date");
    const std::size_t c_height = table.column("height_cm");
    const std::size_t c_nat = table.column("nationality");
    const std::size_t c_start = table.column("contract_start");
    const std::size_t c_expiry = table.column("contract_expiry");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const csv::Row& row = table.rows[r];
      PlayerRecord p;
      try {
        if (row.size() != table.header.size()) {
          throw ParseError("expected " + std::to_string(table.header.size()) +
                           " fields, got " + std::to_string(row.size()));
        }
        p.player_id = detail::required_field(row, c_id, "player_id");
        p.name = row[c_name];
        if (auto f = detail::optional_field(row, c_birth)) p.birth_date = Date::parse(*f);
        if (auto f = detail::optional_field(row, c_height)) {
          p.height_cm = parse_double(*f, "height_cm");
        }
        p.nationality = row[c_nat];
        if (auto f = detail::optional_field(row, c_start)) p.contract_start = Date::parse(*f);
        if (auto f = detail::optional_field(row, c_expiry)) {
          p.contract_expiry = Date::parse(*f);
        }
        detail::validate_player(p);
      } catch (const ParseError& e) {
        result.errors.push_back({table.lines[r], e.what()});
        continue;
      }
      accept(std::move(p));
    }
    return result;
  }

  std::vector<std::size_t> line_numbers;
  const auto lines = detail::jsonl_lines(text, line_numbers);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    PlayerRecord p;
    try {
      const auto obj = nlohmann::json::parse(lines[i]);
      if (!obj.is_object()) throw ParseError("expected a JSON object");
      p.player_id = detail::json_required(obj, "player_id").get<std::string>();
      p.name = detail::json_optional<std::string>(obj, "name").value_or("");
      p.birth_date = detail::json_date(obj, "birth_date");
      p.height_cm = detail::json_optional<double>(obj, "height_cm");
      p.nationality = detail::json_optional<std::string>(obj, "nationality").value_or("");
      p.contract_start = detail::json_date(obj, "contract_start");
      p.contract_expiry = detail::json_date(obj, "contract_expiry");
      detail::validate_player(p);
    } catch (const nlohmann::json::exception& e) {
      result.errors.push_back({line_numbers[i], e.what()});
      continue;
    } catch (const ParseError& e) {
      result.errors.push_back({line_numbers[i], e.what()});
      continue;
    }
    accept(std::move(p));
  }
  return result;
}

inline ParseResult<PlayerRecord> parse_players(const std::string& path,
                                               FileFormat format = FileFormat::kCsv) {
  return parse_players_text(read_file(path), format);
}

inline ParseResult<TransferRow> parse_transfers_text(const std::string& text) {
  ParseResult<TransferRow> result;
  const csv::Table table = csv::parse(text);
  const std::size_t c_id = table.column("player_id");
  const std::size_t c_date = table.column("date");
  const std::size_t c_from = table.column("from_club");
  const std::size_t c_to = table.column("to_club");
  const std::size_t c_fee = table.column("fee_eur");
  const std::size_t c_cat = table.column("category");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const csv::Row& row = table.rows[r];
    try {
      if (row.size() != table.header.size()) throw ParseError("wrong field count");
      TransferRow t;
      t.player_id = detail::required_field(row, c_id, "player_id");
      t.event.date = Date::parse(detail::required_field(row, c_date, "date"));
      t.event.from_club = row[c_from];
      t.event.to_club = row[c_to];
      if (auto f = detail::optional_field(row, c_fee)) {
        const double fee = parse_double(*f, "fee_eur");
        detail::check_non_negative(fee, "fee_eur");
        t.event.fee_eur = fee;
      }
      t.event.category = parse_transfer_category(row[c_cat]);
      result.records.push_back(std::move(t));
    } catch (const ParseError& e) {
      result.errors.push_back({table.lines[r], e.what()});
    }
  }
  return result;
}

inline ParseResult<TransferRow> parse_transfers(const std::string& path) {
  return parse_transfers_text(read_file(path));
}

inline ParseResult<ValuationSnapshot> parse_valuations_text(const std::string& text) {
  ParseResult<ValuationSnapshot> result;
  const csv::Table table = csv::parse(text);
  const std::size_t c_id = table.column("player_id");
  const std::size_t c_ts = table.column("timestamp");
  const std::size_t c_value = table.column("value_eur");
  std::set<std::pair<std::string, std::int64_t>> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const csv::Row& row = table.rows[r];
    ValuationSnapshot v;
    try {
      if (row.size() != table.header.size()) throw ParseError("wrong field count");
      v.player_id = detail::required_field(row, c_id, "player_id");
      v.timestamp = Date::parse(detail::required_field(row, c_ts, "timestamp"));
      v.value_eur = parse_double(detail::required_field(row, c_value, "value_eur"),
                                 "value_eur");
      detail::check_non_negative(v.value_eur, "value_eur");
    } catch (const ParseError& e) {
      result.errors.push_back({table.lines[r], e.what()});
      continue;
    }
    if (!seen.emplace(v.player_id, v.timestamp.days()).second) {
      throw DuplicateKeyError(v.player_id + "@" + v.timestamp.to_string());
    }
    result.records.push_back(std::move(v));
  }
  return result;
}

inline ParseResult<ValuationSnapshot> parse_valuations(const std::string& path) {
  return parse_valuations_text(read_file(path));
}

inline ParseResult<ArticleFeatures> parse_articles_text(const std::string& text) {
  ParseResult<ArticleFeatures> result;
  std::set<std::string> seen;
  std::optional<std::size_t> dim;
  std::vector<std::size_t> line_numbers;
  const auto lines = detail::jsonl_lines(text, line_numbers);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    ArticleFeatures a;
    try {
      const auto obj = nlohmann::json::parse(lines[i]);
      if (!obj.is_object()) throw ParseError("expected a JSON object");
      a.article_id = detail::json_required(obj, "article_id").get<std::string>();
      a.player_id = detail::json_required(obj, "player_id").get<std::string>();
      a.published_at =
          Timestamp::parse(detail::json_required(obj, "published_at").get<std::string>());
      a.sentiment = detail::json_required(obj, "sentiment").get<double>();
      if (!(a.sentiment >= -1.0 && a.sentiment <= 1.0)) {
        throw ParseError("sentiment outside [-1, 1]");
      }
      a.embedding = detail::json_required(obj, "embedding").get<std::vector<double>>();
      for (double e : a.embedding) {
        if (!std::isfinite(e)) throw ParseError("non-finite embedding entry");
      }
      if (dim && *dim != a.embedding.size()) {
        throw ParseError("embedding dimension " + std::to_string(a.embedding.size()) +
                         " differs from " + std::to_string(*dim) + " in article '" +
                         a.article_id + "'");
      }
      a.token_count = detail::json_required(obj, "token_count").get<std::int64_t>();
      if (a.token_count < 0) throw ParseError("negative token_count");
    } catch (const nlohmann::json::exception& e) {
      result.errors.push_back({line_numbers[i], e.what()});
      continue;
    } catch (const ParseError& e) {
      result.errors.push_back({line_numbers[i], e.what()});
      continue;
    }
    if (!seen.insert(a.article_id).second) throw DuplicateKeyError(a.article_id);
    dim = a.embedding.size();
    result.records.push_back(std::move(a));
  }
  return result;
}

inline ParseResult<ArticleFeatures> parse_articles(const std::string& path) {
  return parse_articles_text(read_file(path));
}

// ---------------------------------------------------------------------------
// Entity resolution
// ---------------------------------------------------------------------------

namespace detail {

inline bool decode_utf8(std::string_view s, std::size_t& i, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  int len = 0;
  if (b0 < 0x80) {
    cp = b0;
    len = 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    cp = b0 & 0x1F;
    len = 2;
  } else if ((b0 & 0xF0) == 0xE0) {
    cp = b0 & 0x0F;
    len = 3;
  } else if ((b0 & 0xF8) == 0xF0) {
    cp = b0 & 0x07;
    len = 4;
  } else {
    return false;
  }
  if (i + static_cast<std::size_t>(len) > s.size()) return false;
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
    if ((b & 0xC0) != 0x80) return false;
    cp = (cp << 6) | (b & 0x3F);
  }
  i += static_cast<std::size_t>(len);
  return true;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Lowercase ASCII folding of Latin-1 Supplement and Latin Extended-A letters.
// Returns empty for code points left untouched.
inline std::string_view fold_latin(char32_t cp) {
  // U+00C0..U+00FF; '*' marks a multi-letter or non-letter slot.
  static constexpr std::string_view kLatin1 =
      "aaaaaa*ceeeeiiiidnooooo*ouuuuy**aaaaaa*ceeeeiiiidnooooo*ouuuuy*y";
  // U+0100..U+017F.
  static constexpr std::string_view kExtendedA =
      "aaaaaaccccccccddddeeeeeeeeeegggggggghhhhiiiiiiiiii**jjkkklllllllllln"
      "nnnnnnnnoooooo**rrrrrrssssssssttttttuuuuuuuuuuuuwwyyyzzzzzzs";
  static_assert(kLatin1.size() == 0x40 && kExtendedA.size() == 0x80);
  if (cp >= 0xC0 && cp <= 0xFF) {
    switch (cp) {
      case 0xC6: case 0xE6: return "ae";
      case 0xDE: case 0xFE: return "th";
      case 0xDF: return "ss";
      case 0xD7: case 0xF7: return {};
      default: return kLatin1.substr(cp - 0xC0, 1);
    }
  }
  if (cp >= 0x100 && cp <= 0x17F) {
    switch (cp) {
      case 0x132: case 0x133: return "ij";
      case 0x152: case 0x153: return "oe";
      default: return kExtendedA.substr(cp - 0x100, 1);
    }
  }
  return {};
}

}  // namespace detail

// Trim, lowercase, fold diacritics, collapse internal whitespace.
inline std::string normalize_name(std::string_view raw) {
  std::string folded;
  folded.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    char32_t cp = 0;
    const std::size_t start = i;
    if (!detail::decode_utf8(raw, i, cp)) {
      // Invalid byte: keep verbatim.
      folded.push_back(raw[start]);
      i = start + 1;
      continue;
    }
    if (cp < 0x80) {
      const char c = static_cast<char>(cp);
      folded.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    } else if (cp >= 0x300 && cp <= 0x36F) {
      // combining mark
    } else if (cp == 0xA0 || cp == 0x2007 || cp == 0x202F) {
      folded.push_back(' ');
    } else if (auto f = detail::fold_latin(cp); !f.empty()) {
      folded += f;
    } else {
      detail::append_utf8(folded, cp);
    }
  }

  std::string out;
  bool pending_space = false;
  for (char c : folded) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

class EntityRegistry {
 public:
  EntityRegistry() = default;

  // Throws AmbiguityError when two distinct players normalize to one key.
  static EntityRegistry build(const std::vector<PlayerRecord>& players) {
    EntityRegistry reg;
    for (const auto& p : players) reg.add(p.name, p.player_id);
    return reg;
  }

  void add(std::string_view name, const std::string& player_id) {
    std::string key = normalize_name(name);
    auto [it, inserted] = by_name_.emplace(key, player_id);
    if (!inserted && it->second != player_id) {
      throw AmbiguityError("names for '" + it->second + "' and '" + player_id +
                           "' both normalize to '" + key + "'");
    }
  }

  std::optional<std::string> resolve(std::string_view raw_name) const {
    auto it = by_name_.find(normalize_name(raw_name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  const std::unordered_map<std::string, std::string>& entries() const { return by_name_; }

 private:
  std::unordered_map<std::string, std::string> by_name_;
};

inline std::optional<std::string> resolve_entity(std::string_view raw_name,
                                                 const EntityRegistry& registry) {
  return registry.resolve(raw_name);
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

inline constexpr std::int64_t kDefaultMinTokens = 3;

inline std::vector<ArticleFeatures> filter_articles(std::vector<ArticleFeatures> articles,
                                                    std::int64_t min_tokens = kDefaultMinTokens) {
  std::erase_if(articles, [&](const ArticleFeatures& a) { return a.token_count < min_tokens; });
  return articles;
}

struct OrphanReport {
  std::vector<std::string> valuation_player_ids;
  std::vector<std::string> article_player_ids;
  std::vector<std::string> transfer_player_ids;
  std::size_t dropped_short_articles = 0;

  bool empty() const {
    return valuation_player_ids.empty() && article_player_ids.empty() &&
           transfer_player_ids.empty();
  }
};

struct AssembleResult {
  Dataset dataset;
  OrphanReport orphans;
};

inline AssembleResult assemble(std::vector<PlayerRecord> players,
                               std::vector<ValuationSnapshot> valuations,
                               std::vector<ArticleFeatures> articles,
                               std::vector<TransferRow> transfers = {},
                               std::int64_t min_tokens = kDefaultMinTokens) {
  if (players.empty()) throw EmptyDatasetError("dataset has no players");
  AssembleResult out;
  Dataset& ds = out.dataset;
  for (auto& p : players) {
    const std::string id = p.player_id;
    if (!ds.players.emplace(id, std::move(p)).second) throw DuplicateKeyError(id);
  }

  std::set<std::string> orphan_v, orphan_a, orphan_t;
  for (auto& t : transfers) {
    auto it = ds.players.find(t.player_id);
    if (it == ds.players.end()) {
      orphan_t.insert(t.player_id);
      continue;
    }
    it->second.transfers.push_back(std::move(t.event));
  }
  for (auto& [id, p] : ds.players) {
    std::sort(p.transfers.begin(), p.transfers.end(),
              [](const TransferEvent& a, const TransferEvent& b) { return a.key() < b.key(); });
  }

  std::set<std::pair<std::string, std::int64_t>> seen_snapshots;
  for (auto& v : valuations) {
    if (!ds.players.contains(v.player_id)) {
      orphan_v.insert(v.player_id);
      continue;
    }
    if (!seen_snapshots.emplace(v.player_id, v.timestamp.days()).second) {
      throw DuplicateKeyError(v.player_id + "@" + v.timestamp.to_string());
    }
    ds.valuations[v.player_id].push_back(std::move(v));
  }
  for (auto& [id, series] : ds.valuations) {
    std::sort(series.begin(), series.end(),
              [](const ValuationSnapshot& a, const ValuationSnapshot& b) {
                return a.timestamp < b.timestamp;
              });
  }

  const std::size_t before = articles.size();
  articles = filter_articles(std::move(articles), min_tokens);
  out.orphans.dropped_short_articles = before - articles.size();
  std::optional<std::size_t> dim;
  for (auto& a : articles) {
    if (!ds.players.contains(a.player_id)) {
      orphan_a.insert(a.player_id);
      continue;
    }
    if (dim && *dim != a.embedding.size()) {
      throw ParseError("embedding dimension mismatch in article '" + a.article_id + "'");
    }
    dim = a.embedding.size();
    ds.articles[a.player_id].push_back(std::move(a));
  }
  for (auto& [id, list] : ds.articles) {
    std::sort(list.begin(), list.end(), [](const ArticleFeatures& a, const ArticleFeatures& b) {
      return std::tie(a.published_at, a.article_id) < std::tie(b.published_at, b.article_id);
    });
  }
  ds.embedding_dim = dim.value_or(0);

  out.orphans.valuation_player_ids.assign(orphan_v.begin(), orphan_v.end());
  out.orphans.article_player_ids.assign(orphan_a.begin(), orphan_a.end());
  out.orphans.transfer_player_ids.assign(orphan_t.begin(), orphan_t.end());
  return out;
}

// ---------------------------------------------------------------------------
// Directory I/O
// ---------------------------------------------------------------------------

inline constexpr const char* kPlayersFile = "players.csv";
inline constexpr const char* kTransfersFile = "transfers.csv";
inline constexpr const char* kValuationsFile = "valuations.csv";
inline constexpr const char* kArticlesFile = "articles.jsonl";

struct LoadReport {
  OrphanReport orphans;
  // "<file>:<line>: message"
  std::vector<std::string> row_errors;
};

struct LoadedDataset {
  Dataset dataset;
  LoadReport report;
};

// Reads players.csv and valuations.csv (required) plus transfers.csv and
// articles.jsonl (optional) from `dir`.
inline LoadedDataset load_dataset(const std::string& dir,
                                  std::int64_t min_tokens = kDefaultMinTokens) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  auto path_of = [&](const char* name) { return (root / name).string(); };
  auto require = [&](const char* name) {
    const std::string p = path_of(name);
    if (!fs::exists(p)) throw FileError(p, "missing input file");
    return p;
  };

  LoadReport report;
  auto collect = [&](const char* file, const std::vector<RowError>& errors) {
    for (const auto& e : errors) {
      report.row_errors.push_back(std::string(file) + ":" + std::to_string(e.line) + ": " +
                                  e.message);
    }
  };

  auto players = parse_players(require(kPlayersFile));
  collect(kPlayersFile, players.errors);
  auto valuations = parse_valuations(require(kValuationsFile));
  collect(kValuationsFile, valuations.errors);
  ParseResult<TransferRow> transfers;
  if (fs::exists(path_of(kTransfersFile))) {
    transfers = parse_transfers(path_of(kTransfersFile));
    collect(kTransfersFile, transfers.errors);
  }
  ParseResult<ArticleFeatures> articles;
  if (fs::exists(path_of(kArticlesFile))) {
    articles = parse_articles(path_of(kArticlesFile));
    collect(kArticlesFile, articles.errors);
  }
  auto assembled = assemble(std::move(players.records), std::move(valuations.records),
                            std::move(articles.records), std::move(transfers.records),
                            min_tokens);
  report.orphans = std::move(assembled.orphans);
  return {std::move(assembled.dataset), std::move(report)};
}

inline std::string optional_to_string(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

inline std::string optional_to_string(const std::optional<Date>& d) {
  return d ? d->to_string() : std::string();
}

inline void write_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);

  csv::Writer players;
  players.row({"player_id", "name", "birth_date", "height_cm", "nationality",
               "contract_start", "contract_expiry"});
  csv::Writer transfers;
  transfers.row({"player_id", "date", "from_club", "to_club", "fee_eur", "category"});
  for (const auto& [id, p] : ds.players) {
    players.row({id, p.name, optional_to_string(p.birth_date),
                 optional_to_string(p.height_cm), p.nationality,
                 optional_to_string(p.contract_start), optional_to_string(p.contract_expiry)});
    for (const auto& t : p.transfers) {
      transfers.row({id, t.date.to_string(), t.from_club, t.to_club,
                     optional_to_string(t.fee_eur), std::string(to_string(t.category))});
    }
  }
  players.save((root / kPlayersFile).string());
  transfers.save((root / kTransfersFile).string());

  csv::Writer valuations;
  valuations.row({"player_id", "timestamp", "value_eur"});
  for (const auto& [id, series] : ds.valuations) {
    for (const auto& v : series) {
      valuations.row({id, v.timestamp.to_string(), format_double(v.value_eur)});
    }
  }
  valuations.save((root / kValuationsFile).string());

  std::string articles;
  for (const auto& [id, list] : ds.articles) {
    for (const auto& a : list) {
      nlohmann::json obj;
      obj["article_id"] = a.article_id;
      obj["player_id"] = a.player_id;
      obj["published_at"] = a.published_at.to_string();
      obj["sentiment"] = a.sentiment;
      obj["embedding"] = a.embedding;
      obj["token_count"] = a.token_count;
      articles += obj.dump();
      articles.push_back('\n');
    }
  }
  write_file((root / kArticlesFile).string(), articles);
}

}  // namespace scoutval
