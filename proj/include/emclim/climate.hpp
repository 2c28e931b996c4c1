#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emclim/timeutil.hpp"
#include "emclim/zonal.hpp"

namespace emclim::climate {

struct HourlySample {
  Instant t{};
  std::optional<double> value;  // absent = hour recorded but unusable
};

struct HourlySeries {
  std::string variable;
  std::string cell_ref;
  std::vector<HourlySample> samples;  // strictly increasing timestamps

  void push(Instant t, std::optional<double> v) {
    if (!samples.empty() && t <= samples.back().t)
      throw DataError("hourly series timestamps must be strictly increasing (" + variable + ")");
    samples.push_back({t, v});
  }
};

struct DegreeDayConfig {
  double base_c{18.3};
  int min_valid_hours{12};
  bool normalize_per_day{false};  // report degree-days per included day
  int utc_offset_minutes{0};      // day grouping offset; 0 = UTC days
};

struct DegreeDays {
  std::optional<double> hdd;
  std::optional<double> cdd;
  int days_used{};
  int days_dropped{};  // days present in the series but under the hour floor
};

// Daily-mean method: group hours into days, mean each day, accumulate the
// deficit/excess against the base. Days with too few valid hours are
// excluded and counted rather than extrapolated.
inline DegreeDays degree_days(const HourlySeries& temps, YearMonth month,
                              const DegreeDayConfig& cfg = {}) {
  std::map<CivilDate, std::pair<double, int>> days;  // sum, valid hours
  Instant lo = month_start(month);
  Instant hi = month_start(next_month(month));
  for (const HourlySample& s : temps.samples) {
    if (s.t < lo || s.t >= hi || !s.value) continue;
    CivilDate d = civil_date(s.t + std::int64_t(cfg.utc_offset_minutes) * 60);
    auto& acc = days[d];
    acc.first += *s.value;
    acc.second += 1;
  }
  DegreeDays out;
  double hdd = 0.0, cdd = 0.0;
  for (const auto& [day, acc] : days) {
    if (acc.second < cfg.min_valid_hours) {
      ++out.days_dropped;
      continue;
    }
    double mean = acc.first / acc.second;
    hdd += std::max(0.0, cfg.base_c - mean);
    cdd += std::max(0.0, mean - cfg.base_c);
    ++out.days_used;
  }
  if (out.days_used > 0) {
    double scale = cfg.normalize_per_day ? 1.0 / out.days_used : 1.0;
    out.hdd = hdd * scale;
    out.cdd = cdd * scale;
  }
  return out;
}

enum class Reducer { Mean, Sum };

struct MonthlyStat {
  std::optional<double> value;
  double coverage{};  // valid hours / hours in the month
};

inline MonthlyStat monthly_aggregate(const HourlySeries& series, YearMonth month,
                                     Reducer reducer) {
  Instant lo = month_start(month);
  Instant hi = month_start(next_month(month));
  double sum = 0.0;
  int n = 0;
  for (const HourlySample& s : series.samples) {
    if (s.t < lo || s.t >= hi || !s.value) continue;
    sum += *s.value;
    ++n;
  }
  MonthlyStat out;
  out.coverage = double(n) / hours_in_month(month);
  if (n > 0) out.value = reducer == Reducer::Sum ? sum : sum / n;
  return out;
}

struct MonthlyClimate {
  YearMonth month;
  std::optional<double> hdd;
  std::optional<double> cdd;
  std::optional<double> wind;
  std::optional<double> tcdc;
  std::optional<double> acpc01;
};

// Reduce a reanalysis grid stack over a capture region, one value per
// timestamp. A 2.5 km cell fully containing the region degenerates to that
// cell's value under area weighting.
inline HourlySeries sample_cell(
    const std::vector<std::pair<Instant, const raster::RasterGrid*>>& stack,
    const geo::MetricRing& region, geo::LonLat origin, const std::string& variable,
    const std::string& cell_ref = "") {
  HourlySeries out;
  out.variable = variable;
  out.cell_ref = cell_ref;
  for (const auto& [t, grid] : stack) {
    raster::ZonalStat stat = grid->crs == raster::Crs::Wgs84
                                 ? raster::zonal_reduce_geo(*grid, region, origin)
                                 : raster::zonal_reduce(*grid, region);
    out.push(t, stat.value);
  }
  return out;
}

}  // namespace emclim::climate
