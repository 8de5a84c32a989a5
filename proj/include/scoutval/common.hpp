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

// Shared vocabulary: error types, calendar dates, RFC 3339 timestamps,
// portable seeded random streams, hashing and round-trip number formatting.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace scoutval {

inline constexpr std::string_view kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class DuplicateKeyError : public Error {
 public:
  DuplicateKeyError(const std::string& key)
      : Error("duplicate key: " + key), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class FileError : public Error {
 public:
  FileError(const std::string& path, const std::string& what)
      : Error(what + ": " + path), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Calendar dates (days since 1970-01-01, proleptic Gregorian)
// ---------------------------------------------------------------------------

namespace detail {

// Howard Hinnant's days_from_civil / civil_from_days.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct Civil {
  std::int64_t year;
  unsigned month;
  unsigned day;
};

constexpr Civil civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {y + (m <= 2), m, d};
}

constexpr bool is_leap(std::int64_t y) {
  return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

constexpr unsigned days_in_month(std::int64_t y, unsigned m) {
  constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len,
                            int& out) {
  if (pos + len > s.size()) return false;
  int value = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    value = value * 10 + (s[i] - '0');
  }
  out = value;
  return true;
}

}  // namespace detail

class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int64_t days_since_epoch) : days_(days_since_epoch) {}

  static constexpr Date from_ymd(int y, unsigned m, unsigned d) {
    return Date(detail::days_from_civil(y, m, d));
  }

  // Strict YYYY-MM-DD.
  static Date parse(std::string_view s) {
    int y = 0, m = 0, d = 0;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
        !detail::parse_fixed_int(s, 0, 4, y) || !detail::parse_fixed_int(s, 5, 2, m) ||
        !detail::parse_fixed_int(s, 8, 2, d) || m < 1 || m > 12 || d < 1 ||
        static_cast<unsigned>(d) > detail::days_in_month(y, m)) {
      throw ParseError("invalid ISO-8601 date '" + std::string(s) + "'");
    }
    return from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
  }

  constexpr std::int64_t days() const { return days_; }

  std::string to_string() const {
    const auto c = detail::civil_from_days(days_);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u", static_cast<long long>(c.year),
                  c.month, c.day);
    return buf;
  }

  constexpr Date operator+(std::int64_t n) const { return Date(days_ + n); }
  constexpr Date operator-(std::int64_t n) const { return Date(days_ - n); }
  constexpr std::int64_t operator-(Date other) const { return days_ - other.days_; }
  constexpr auto operator<=>(const Date&) const = default;

 private:
  std::int64_t days_ = 0;
};

// UTC instant with second resolution, parsed from RFC 3339.
class Timestamp {
 public:
  constexpr Timestamp() = default;
  constexpr explicit Timestamp(std::int64_t seconds) : seconds_(seconds) {}

  static constexpr Timestamp from_date(Date d, int hh = 0, int mm = 0, int ss = 0) {
    return Timestamp(d.days() * 86400 + hh * 3600 + mm * 60 + ss);
  }

  // YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM). Fractional seconds truncate.
  static Timestamp parse(std::string_view s) {
    auto fail = [&]() -> Timestamp {
      throw ParseError("invalid RFC 3339 timestamp '" + std::string(s) + "'");
    };
    if (s.size() < 20) return fail();
    Date date;
    try {
      date = Date::parse(s.substr(0, 10));
    } catch (const ParseError&) {
      return fail();
    }
    if (s[10] != 'T' && s[10] != 't' && s[10] != ' ') return fail();
    int hh = 0, mm = 0, ss = 0;
    if (!detail::parse_fixed_int(s, 11, 2, hh) || s[13] != ':' ||
        !detail::parse_fixed_int(s, 14, 2, mm) || s[16] != ':' ||
        !detail::parse_fixed_int(s, 17, 2, ss) || hh > 23 || mm > 59 || ss > 60) {
      return fail();
    }
    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      const std::size_t start = pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
      if (pos == start) return fail();
    }
    if (pos >= s.size()) return fail();
    std::int64_t offset = 0;
    if (s[pos] == 'Z' || s[pos] == 'z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int oh = 0, om = 0;
      if (!detail::parse_fixed_int(s, pos + 1, 2, oh) || pos + 3 >= s.size() ||
          s[pos + 3] != ':' || !detail::parse_fixed_int(s, pos + 4, 2, om) || oh > 23 ||
          om > 59) {
        return fail();
      }
      offset = (oh * 3600 + om * 60) * (s[pos] == '+' ? 1 : -1);
      pos += 6;
    } else {
      return fail();
    }
    if (pos != s.size()) return fail();
    return Timestamp(from_date(date, hh, mm, ss).seconds() - offset);
  }

  constexpr std::int64_t seconds() const { return seconds_; }

  // Calendar date (UTC) containing this instant.
  constexpr Date date() const {
    std::int64_t d = seconds_ / 86400;
    if (seconds_ % 86400 < 0) --d;
    return Date(d);
  }

  std::string to_string() const {
    const Date d = date();
    const std::int64_t rem = seconds_ - d.days() * 86400;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "T%02d:%02d:%02dZ", static_cast<int>(rem / 3600),
                  static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
    return d.to_string() + buf;
  }

  constexpr auto operator<=>(const Timestamp&) const = default;

 private:
  std::int64_t seconds_ = 0;
};

// True when an instant falls on or before the calendar day `asof` (UTC).
constexpr bool at_or_before(Timestamp t, Date asof) { return t.date() <= asof; }

// ---------------------------------------------------------------------------
// Seeded random streams
//
// std::mt19937_64 output is fully specified by the standard; the
// distribution adaptors are not, so sampling is done here to keep generated
// data identical across standard library implementations.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for a (seed, stream id) pair, order independent.
  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(splitmix64(seed ^ splitmix64(stream + 0x9E3779B97F4A7C15ULL)));
  }

  std::uint64_t next() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = 0;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  static constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Hashing and formatting
// ---------------------------------------------------------------------------

class Fnv1a {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      hash_ ^= c;
      hash_ *= 0x100000001B3ULL;
    }
  }
  std::uint64_t value() const { return hash_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash_));
    return buf;
  }

 private:
  std::uint64_t hash_ = 0xCBF29CE484222325ULL;
};

inline std::string fnv1a_hex(std::string_view bytes) {
  Fnv1a h;
  h.update(bytes);
  return h.hex();
}

// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::string_view what = "number") {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != last) {
    throw ParseError("invalid " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

inline std::int64_t parse_int(std::string_view s, std::string_view what = "integer") {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("invalid " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError(path, "cannot write file");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw FileError(path, "write failed");
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

}  // namespace scoutval
