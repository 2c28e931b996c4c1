#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emclim/csv.hpp"
#include "emclim/footprints.hpp"
#include "emclim/timeutil.hpp"

namespace emclim::dataset {

// Canonical feature columns, in table order.
inline constexpr std::array<const char*, 12> kFeatureColumns = {
    "avg_rad", "B1",  "B11", "NDVI",      "WIND",      "TCDC",
    "ACPC01",  "hdd", "cdd", "elevation", "assesstot", "yearbuilt"};

inline int feature_index(const std::string& name) {
  for (size_t i = 0; i < kFeatureColumns.size(); ++i)
    if (name == kFeatureColumns[i]) return int(i);
  return -1;
}

struct EnergyRecord {
  std::string bbl;
  std::string bin;
  YearMonth month;
  std::optional<double> electricity_mwh;
  std::optional<double> gas_mwh;
};

struct AttributeRecord {
  std::string bbl;
  std::string bin;
  std::optional<double> floor_area_m2;  // converted from sq.ft input
  std::optional<double> assess_total;
  std::optional<double> year_built;
};

struct FeatureRow {
  std::string bbl;
  std::string bin;
  YearMonth month;
  std::array<std::optional<double>, 12> features;
  std::optional<double> y_electric;
  std::optional<double> y_gas;
};

// Every dropped candidate row lands in exactly one bucket.
struct AttritionReport {
  long rows_in{};
  long rows_out{};
  long duplicate_id{};
  long join_failure{};
  long missing_feature{};
  long zero_energy{};  // no usable endogenous value (zero or absent energy)

  long dropped() const { return duplicate_id + join_failure + missing_feature + zero_energy; }
  double fraction(long count) const { return rows_in == 0 ? 0.0 : double(count) / rows_in; }

  nlohmann::json to_json() const {
    return {
        {"rows_in", rows_in},
        {"rows_out", rows_out},
        {"dropped",
         {{"duplicate_id", duplicate_id},
          {"join_failure", join_failure},
          {"missing_feature", missing_feature},
          {"zero_energy", zero_energy}}},
        {"fractions",
         {{"survivors", fraction(rows_out)},
          {"duplicate_id", fraction(duplicate_id)},
          {"join_failure", fraction(join_failure)},
          {"missing_feature", fraction(missing_feature)},
          {"zero_energy", fraction(zero_energy)}}},
    };
  }
};

// exact international foot
inline constexpr double kSqftToSqm = 0.09290304;

inline double convert_area(double sqft) {
  if (!(sqft > 0.0)) throw DataError("invalid area: " + format_full(sqft) + " sq.ft");
  return sqft * kSqftToSqm;
}

// ln(energy / floor area); zero energy is excluded (nullopt) rather than
// mapped to -inf, matching the removal of zero endogenous terms upstream.
inline std::optional<double> endogenous_transform(double energy_mwh, double floor_area_m2) {
  if (!(floor_area_m2 > 0.0))
    throw DataError("invalid floor area: " + format_full(floor_area_m2) + " m^2");
  if (energy_mwh < 0.0) throw DataError("negative energy value: " + format_full(energy_mwh));
  if (energy_mwh == 0.0) return std::nullopt;
  return std::log(energy_mwh / floor_area_m2);
}

struct KeyConfig {
  int pad_bbl{0};  // zero-pad width, 0 = off
  int pad_bin{0};
};

inline std::string normalize_key(const std::string& raw, int pad) {
  std::string s = trim(raw);
  while (pad > 0 && int(s.size()) < pad) s.insert(s.begin(), '0');
  return s;
}

// Energy CSV: bbl,bin,year,month,electricity_mwh,gas_mwh
inline std::vector<EnergyRecord> parse_energy_csv(const std::filesystem::path& path,
                                                  const KeyConfig& keys = {}) {
  csv::Table t = csv::read_table(path);
  std::string ctx = path.filename().string();
  int c_bbl = t.require_column("bbl", ctx);
  int c_bin = t.require_column("bin", ctx);
  int c_year = t.require_column("year", ctx);
  int c_month = t.require_column("month", ctx);
  int c_elec = t.require_column("electricity_mwh", ctx);
  int c_gas = t.require_column("gas_mwh", ctx);

  std::vector<EnergyRecord> out;
  out.reserve(t.rows.size());
  for (size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::string rctx = ctx + " row " + std::to_string(i + 2);
    EnergyRecord r;
    r.bbl = normalize_key(row[c_bbl], keys.pad_bbl);
    r.bin = normalize_key(row[c_bin], keys.pad_bin);
    int month = int(csv::parse_long(row[c_month], rctx));
    if (month < 1 || month > 12) throw DataError(rctx + ": month out of range");
    r.month = {int(csv::parse_long(row[c_year], rctx)), month};
    r.electricity_mwh = csv::parse_optional_double(row[c_elec], rctx);
    r.gas_mwh = csv::parse_optional_double(row[c_gas], rctx);
    for (auto v : {r.electricity_mwh, r.gas_mwh})
      if (v && *v < 0.0) throw DataError(rctx + ": negative energy value");
    out.push_back(std::move(r));
  }
  return out;
}

// Attributes CSV: bbl,bin,bldgarea_sqft,assesstot_usd,yearbuilt
inline std::vector<AttributeRecord> parse_attributes_csv(const std::filesystem::path& path,
                                                         const KeyConfig& keys = {}) {
  csv::Table t = csv::read_table(path);
  std::string ctx = path.filename().string();
  int c_bbl = t.require_column("bbl", ctx);
  int c_bin = t.require_column("bin", ctx);
  int c_area = t.require_column("bldgarea_sqft", ctx);
  int c_assess = t.require_column("assesstot_usd", ctx);
  int c_year = t.require_column("yearbuilt", ctx);

  std::vector<AttributeRecord> out;
  out.reserve(t.rows.size());
  for (size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::string rctx = ctx + " row " + std::to_string(i + 2);
    AttributeRecord r;
    r.bbl = normalize_key(row[c_bbl], keys.pad_bbl);
    r.bin = normalize_key(row[c_bin], keys.pad_bin);
    if (auto sqft = csv::parse_optional_double(row[c_area], rctx); sqft && *sqft > 0.0)
      r.floor_area_m2 = convert_area(*sqft);
    r.assess_total = csv::parse_optional_double(row[c_assess], rctx);
    r.year_built = csv::parse_optional_double(row[c_year], rctx);
    out.push_back(std::move(r));
  }
  return out;
}

struct BuildingMonthKey {
  std::string bbl;
  std::string bin;
  YearMonth month;
  auto operator<=>(const BuildingMonthKey&) const = default;
};

// Environmental feature values keyed by building-month; names must be a
// subset of the canonical satellite/climate columns.
using EnvFeatureTable = std::map<BuildingMonthKey, std::map<std::string, double>>;

struct AssembleResult {
  std::vector<FeatureRow> rows;
  AttritionReport report;
};

// Inner join of energy, attribute/footprint, and environmental sources.
// Dropping is deterministic: duplicate -> join failure -> missing feature
// -> zero energy, and all duplicate copies are discarded rather than
// electing an arbitrary survivor.
inline AssembleResult assemble(const std::vector<geo::FootprintRecord>& footprints,
                               const std::vector<EnergyRecord>& energy,
                               const std::vector<AttributeRecord>& attributes,
                               const EnvFeatureTable& env) {
  AssembleResult out;
  out.report.rows_in = long(energy.size());

  std::set<std::pair<std::string, std::string>> footprint_keys;
  for (const auto& f : footprints) footprint_keys.insert({f.bbl, f.bin});
  std::map<std::pair<std::string, std::string>, const AttributeRecord*> attr_by_key;
  for (const auto& a : attributes) attr_by_key[{a.bbl, a.bin}] = &a;

  std::map<BuildingMonthKey, int> multiplicity;
  for (const auto& e : energy) multiplicity[{e.bbl, e.bin, e.month}] += 1;

  std::map<BuildingMonthKey, FeatureRow> assembled;  // sorted output order
  for (const auto& e : energy) {
    BuildingMonthKey key{e.bbl, e.bin, e.month};
    if (multiplicity[key] > 1) {
      ++out.report.duplicate_id;
      continue;
    }
    auto attr_it = attr_by_key.find({e.bbl, e.bin});
    bool joined = footprint_keys.count({e.bbl, e.bin}) && attr_it != attr_by_key.end() &&
                  attr_it->second->floor_area_m2.has_value();
    if (!joined) {
      ++out.report.join_failure;
      continue;
    }
    const AttributeRecord& attr = *attr_it->second;

    FeatureRow row;
    row.bbl = e.bbl;
    row.bin = e.bin;
    row.month = e.month;
    auto env_it = env.find(key);
    if (env_it != env.end()) {
      for (const auto& [name, value] : env_it->second) {
        int idx = feature_index(name);
        if (idx < 0) throw DataError("unknown feature column '" + name + "'");
        row.features[idx] = value;
      }
    }
    row.features[feature_index("assesstot")] = attr.assess_total;
    row.features[feature_index("yearbuilt")] = attr.year_built;

    bool complete = true;
    for (const auto& f : row.features) complete = complete && f.has_value();
    if (!complete) {
      ++out.report.missing_feature;
      continue;
    }

    if (e.electricity_mwh)
      row.y_electric = endogenous_transform(*e.electricity_mwh, *attr.floor_area_m2);
    if (e.gas_mwh) row.y_gas = endogenous_transform(*e.gas_mwh, *attr.floor_area_m2);
    if (!row.y_electric && !row.y_gas) {
      ++out.report.zero_energy;
      continue;
    }
    assembled.emplace(key, std::move(row));
  }

  for (auto& [key, row] : assembled) out.rows.push_back(std::move(row));
  out.report.rows_out = long(out.rows.size());
  return out;
}

inline void write_feature_table(const std::vector<FeatureRow>& rows,
                                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write feature table: " + path.string());
  out << "bbl,bin,month";
  for (const char* c : kFeatureColumns) out << ',' << c;
  out << ",y_electric,y_gas\n";
  auto cell = [](const std::optional<double>& v) { return v ? format_full(*v) : std::string(); };
  for (const FeatureRow& r : rows) {
    out << csv::escape(r.bbl) << ',' << csv::escape(r.bin) << ',' << to_string(r.month);
    for (const auto& f : r.features) out << ',' << cell(f);
    out << ',' << cell(r.y_electric) << ',' << cell(r.y_gas) << "\n";
  }
}

// Column metadata sidecar so the CSV stays self-describing.
inline nlohmann::json feature_table_schema() {
  auto col = [](const char* name, const char* unit, const char* source) {
    return nlohmann::json{{"name", name}, {"unit", unit}, {"source", source}};
  };
  nlohmann::json cols = nlohmann::json::array(
      {col("bbl", "", "footprints"), col("bin", "", "footprints"),
       col("month", "YYYY-MM", "energy"),
       col("avg_rad", "nW.sr^-1.cm^-2", "satellite"), col("B1", "W.sr^-1.m^-2", "satellite"),
       col("B11", "W.sr^-1.m^-2", "satellite"), col("NDVI", "1", "satellite"),
       col("WIND", "m.s^-1", "reanalysis"), col("TCDC", "%", "reanalysis"),
       col("ACPC01", "kg.m^-2", "reanalysis"), col("hdd", "degC.day", "reanalysis"),
       col("cdd", "degC.day", "reanalysis"), col("elevation", "m", "elevation-raster"),
       col("assesstot", "USD", "attributes"), col("yearbuilt", "year", "attributes"),
       col("y_electric", "log(MWh.m^-2)", "derived"), col("y_gas", "log(MWh.m^-2)", "derived")});
  return nlohmann::json{{"version", 1}, {"missing", "empty cell"}, {"columns", cols}};
}

inline std::vector<FeatureRow> read_feature_table(const std::filesystem::path& path) {
  csv::Table t = csv::read_table(path);
  std::string ctx = path.filename().string();
  int c_bbl = t.require_column("bbl", ctx);
  int c_bin = t.require_column("bin", ctx);
  int c_month = t.require_column("month", ctx);
  int c_ye = t.require_column("y_electric", ctx);
  int c_yg = t.require_column("y_gas", ctx);
  std::array<int, 12> c_feat{};
  for (size_t i = 0; i < kFeatureColumns.size(); ++i)
    c_feat[i] = t.require_column(kFeatureColumns[i], ctx);

  std::vector<FeatureRow> rows;
  rows.reserve(t.rows.size());
  for (size_t i = 0; i < t.rows.size(); ++i) {
    const auto& raw = t.rows[i];
    std::string rctx = ctx + " row " + std::to_string(i + 2);
    FeatureRow r;
    r.bbl = raw[c_bbl];
    r.bin = raw[c_bin];
    r.month = parse_year_month(raw[c_month]);
    for (size_t j = 0; j < c_feat.size(); ++j)
      r.features[j] = csv::parse_optional_double(raw[c_feat[j]], rctx);
    r.y_electric = csv::parse_optional_double(raw[c_ye], rctx);
    r.y_gas = csv::parse_optional_double(raw[c_yg], rctx);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace emclim::dataset
