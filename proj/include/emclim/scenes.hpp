#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emclim/timeutil.hpp"
#include "emclim/zonal.hpp"

namespace emclim::raster {

struct SceneManifest {
  std::string scene_id;
  Instant timestamp{};
  std::map<std::string, std::filesystem::path> band_files;
  std::optional<std::filesystem::path> mask_file;
  std::string mask_scheme_name;  // empty when no mask ships with the scene
};

// Collection manifest: JSON array of
//   {"scene_id", "timestamp", "bands": {name: path}, "mask": path|null,
//    "mask_scheme": string}
// Relative paths resolve against the manifest's directory.
inline std::vector<SceneManifest> load_scene_collection(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scene manifest: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw DataError(path.string() + ": collection manifest must be an array");

  auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  std::vector<SceneManifest> scenes;
  for (const auto& item : doc) {
    SceneManifest s;
    if (!item.contains("scene_id") || !item.contains("timestamp") || !item.contains("bands"))
      throw DataError(path.string() + ": scene entry missing scene_id/timestamp/bands");
    s.scene_id = item["scene_id"].get<std::string>();
    s.timestamp = parse_instant(item["timestamp"].get<std::string>());
    for (auto& [name, p] : item["bands"].items())
      s.band_files[name] = resolve(p.get<std::string>());
    if (item.contains("mask") && !item["mask"].is_null())
      s.mask_file = resolve(item["mask"].get<std::string>());
    if (item.contains("mask_scheme") && !item["mask_scheme"].is_null())
      s.mask_scheme_name = item["mask_scheme"].get<std::string>();
    scenes.push_back(std::move(s));
  }
  return scenes;
}

struct SceneStat {
  std::string scene_id;
  Instant timestamp{};
  ZonalStat stat;
};

struct CompositeStat {
  std::optional<double> value;
  int scenes_total{};
  int scenes_used{};
};

// Unweighted mean over scenes with any valid coverage; a month with no
// usable scene is reported missing, never imputed.
inline CompositeStat monthly_composite(const std::vector<SceneStat>& scenes, YearMonth month) {
  CompositeStat out;
  double sum = 0.0;
  for (const SceneStat& s : scenes) {
    if (month_of(s.timestamp) != month)
      throw DataError("monthly_composite: scene " + s.scene_id + " is outside " +
                      to_string(month));
    ++out.scenes_total;
    if (s.stat.valid_fraction > 0.0 && s.stat.value) {
      sum += *s.stat.value;
      ++out.scenes_used;
    }
  }
  if (out.scenes_used > 0) out.value = sum / out.scenes_used;
  return out;
}

using MonthlySeries = std::map<YearMonth, double>;

struct SourceComparison {
  double mean_percent_difference{};
  std::map<YearMonth, double> per_month;
  int months_compared{};
};

// Symmetric percent difference, 200*|a-b|/(|a|+|b|), averaged over the
// months both series report. Zero-magnitude months are skipped.
inline SourceComparison compare_sources(const MonthlySeries& a, const MonthlySeries& b) {
  SourceComparison out;
  double sum = 0.0;
  for (const auto& [month, va] : a) {
    auto it = b.find(month);
    if (it == b.end()) continue;
    double vb = it->second;
    double denom = std::abs(va) + std::abs(vb);
    if (denom == 0.0) continue;
    double pct = 200.0 * std::abs(va - vb) / denom;
    out.per_month[month] = pct;
    sum += pct;
    ++out.months_compared;
  }
  if (out.months_compared == 0)
    throw DataError("compare_sources: series share no comparable months");
  out.mean_percent_difference = sum / out.months_compared;
  return out;
}

}  // namespace emclim::raster
