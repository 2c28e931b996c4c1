#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>

#include "emclim/util.hpp"

namespace emclim {

// UTC instant, seconds since the Unix epoch.
using Instant = std::int64_t;

struct YearMonth {
  int year{};
  int month{};
  auto operator<=>(const YearMonth&) const = default;
};

struct CivilDate {
  int year{};
  int month{};
  int day{};
  auto operator<=>(const CivilDate&) const = default;
};

inline Instant civil_to_instant(int year, int month, int day, int hour = 0, int minute = 0,
                                int second = 0) {
  using namespace std::chrono;
  sys_days sd{std::chrono::year{year} / month / day};
  return sd.time_since_epoch().count() * 86400ll + hour * 3600ll + minute * 60ll + second;
}

inline CivilDate civil_date(Instant t) {
  using namespace std::chrono;
  // floor for negative instants
  std::int64_t d = t >= 0 ? t / 86400 : (t - 86399) / 86400;
  year_month_day ymd{sys_days{days{d}}};
  return {int(ymd.year()), int(unsigned(ymd.month())), int(unsigned(ymd.day()))};
}

inline YearMonth month_of(Instant t) {
  CivilDate c = civil_date(t);
  return {c.year, c.month};
}

inline YearMonth next_month(YearMonth m) {
  return m.month == 12 ? YearMonth{m.year + 1, 1} : YearMonth{m.year, m.month + 1};
}

inline Instant month_start(YearMonth m) { return civil_to_instant(m.year, m.month, 1); }

inline int days_in_month(YearMonth m) {
  return int((month_start(next_month(m)) - month_start(m)) / 86400);
}

inline int hours_in_month(YearMonth m) { return days_in_month(m) * 24; }

inline std::string to_string(YearMonth m) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", m.year, m.month);
  return buf;
}

inline YearMonth parse_year_month(const std::string& s) {
  int y = 0, mo = 0;
  if (std::sscanf(s.c_str(), "%d-%d", &y, &mo) != 2 || mo < 1 || mo > 12)
    throw DataError("invalid year-month: '" + s + "' (expected YYYY-MM)");
  return {y, mo};
}

// Accepts extended ("2019-05-19T15:51:59Z") and basic ("20190519T155159Z")
// ISO-8601 forms; a missing trailing 'Z' is tolerated, offsets are not.
inline Instant parse_instant(const std::string& raw) {
  std::string s = trim(raw);
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.pop_back();
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  int n = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &sec);
  if (n < 3) {
    n = std::sscanf(s.c_str(), "%4d%2d%2dT%2d%2d%2d", &y, &mo, &d, &h, &mi, &sec);
  }
  if (n < 3 || mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 ||
      sec < 0 || sec > 60)
    throw DataError("invalid ISO-8601 timestamp: '" + raw + "'");
  return civil_to_instant(y, mo, d, h, mi, sec);
}

inline std::string format_instant(Instant t) {
  CivilDate c = civil_date(t);
  std::int64_t d = t >= 0 ? t / 86400 : (t - 86399) / 86400;
  std::int64_t rem = t - d * 86400;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02lld:%02lld:%02lldZ", c.year, c.month, c.day,
                static_cast<long long>(rem / 3600), static_cast<long long>((rem / 60) % 60),
                static_cast<long long>(rem % 60));
  return buf;
}

}  // namespace emclim
