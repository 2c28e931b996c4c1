#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emclim/emc.hpp"
#include "emclim/grid.hpp"
#include "emclim/util.hpp"

namespace emclim::cli {

// One JSON document drives a run; command-line flags override single keys so
// a config file remains a complete, replayable record.
struct RunConfig {
  // inputs
  std::filesystem::path footprints;
  std::filesystem::path attributes;
  std::filesystem::path energy;
  std::filesystem::path scenes;            // collection manifest (JSON array)
  std::filesystem::path reanalysis_index;  // climate source index
  std::filesystem::path elevation_raster;  // static grid
  std::filesystem::path out_dir{"out"};
  std::filesystem::path feature_table;     // defaults to <out_dir>/features.csv
  std::filesystem::path regression_file;   // defaults to <out_dir>/regression_electric_centered.json

  // capture
  double buffer_radius_m{100.0};
  int arc_segments{64};

  // rasters
  raster::Crs raster_crs{raster::Crs::Wgs84};
  std::string mask_scheme{"S2-L1C-QA60"};
  std::string ndvi_nir{"B8"};
  std::string ndvi_red{"B4"};
  std::vector<std::string> band_features{"avg_rad", "B1", "B11"};

  // climate
  double degree_day_base_c{18.3};
  int degree_day_min_valid_hours{12};
  bool degree_day_per_day{false};
  std::string temperature_variable{"TMP"};
  std::string wind_variable{"WIND"};
  std::string cloud_variable{"TCDC"};
  std::string precip_variable{"ACPC01"};

  // keys
  int pad_bbl{0};
  int pad_bin{0};

  // regression
  double vif_threshold{5.0};
  bool vif_prune{true};
  std::vector<std::string> regression_modes{"centered", "centered_normalized"};
  std::vector<std::string> targets{"electric", "gas"};

  // clustering
  int emc_k{10};
  std::uint64_t seed{0};
  emc::Covariance emc_covariance{emc::Covariance::Diagonal};
  std::vector<std::string> emc_exclude;

  int threads{1};

  std::filesystem::path features_csv() const {
    return feature_table.empty() ? out_dir / "features.csv" : feature_table;
  }
  std::filesystem::path regression_json() const {
    return regression_file.empty() ? out_dir / "regression_electric_centered.json"
                                   : regression_file;
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::vector<std::string>& known,
                                const std::string& where) {
  for (auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown config key '" + where + key + "'");
  }
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& doc,
                              const std::filesystem::path& base = {}) {
  RunConfig cfg;
  detail::reject_unknown_keys(
      doc,
      {"paths", "buffer_radius_m", "arc_segments", "raster_crs", "mask_scheme", "ndvi_bands",
       "band_features", "degree_day_base_c", "degree_day_min_valid_hours", "degree_day_per_day",
       "climate_variables", "key_pad", "vif_threshold", "vif_prune", "regression_modes",
       "targets", "emc", "seed", "threads"},
      "");

  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() || base.empty() ? fp : base / fp;
  };
  if (doc.contains("paths")) {
    const auto& p = doc["paths"];
    detail::reject_unknown_keys(p,
                                {"footprints", "attributes", "energy", "scenes",
                                 "reanalysis_index", "elevation_raster", "out_dir",
                                 "feature_table", "regression"},
                                "paths.");
    if (p.contains("footprints")) cfg.footprints = resolve(p["footprints"].get<std::string>());
    if (p.contains("attributes")) cfg.attributes = resolve(p["attributes"].get<std::string>());
    if (p.contains("energy")) cfg.energy = resolve(p["energy"].get<std::string>());
    if (p.contains("scenes")) cfg.scenes = resolve(p["scenes"].get<std::string>());
    if (p.contains("reanalysis_index"))
      cfg.reanalysis_index = resolve(p["reanalysis_index"].get<std::string>());
    if (p.contains("elevation_raster"))
      cfg.elevation_raster = resolve(p["elevation_raster"].get<std::string>());
    if (p.contains("out_dir")) cfg.out_dir = resolve(p["out_dir"].get<std::string>());
    if (p.contains("feature_table")) cfg.feature_table = resolve(p["feature_table"].get<std::string>());
    if (p.contains("regression")) cfg.regression_file = resolve(p["regression"].get<std::string>());
  }
  if (doc.contains("buffer_radius_m")) cfg.buffer_radius_m = doc["buffer_radius_m"].get<double>();
  if (doc.contains("arc_segments")) cfg.arc_segments = doc["arc_segments"].get<int>();
  if (doc.contains("raster_crs"))
    cfg.raster_crs = raster::crs_from_string(doc["raster_crs"].get<std::string>());
  if (doc.contains("mask_scheme")) cfg.mask_scheme = doc["mask_scheme"].get<std::string>();
  if (doc.contains("ndvi_bands")) {
    detail::reject_unknown_keys(doc["ndvi_bands"], {"nir", "red"}, "ndvi_bands.");
    cfg.ndvi_nir = doc["ndvi_bands"].value("nir", cfg.ndvi_nir);
    cfg.ndvi_red = doc["ndvi_bands"].value("red", cfg.ndvi_red);
  }
  if (doc.contains("band_features"))
    cfg.band_features = doc["band_features"].get<std::vector<std::string>>();
  if (doc.contains("degree_day_base_c"))
    cfg.degree_day_base_c = doc["degree_day_base_c"].get<double>();
  if (doc.contains("degree_day_min_valid_hours"))
    cfg.degree_day_min_valid_hours = doc["degree_day_min_valid_hours"].get<int>();
  if (doc.contains("degree_day_per_day"))
    cfg.degree_day_per_day = doc["degree_day_per_day"].get<bool>();
  if (doc.contains("climate_variables")) {
    const auto& cv = doc["climate_variables"];
    detail::reject_unknown_keys(cv, {"temperature", "wind", "cloud", "precipitation"},
                                "climate_variables.");
    cfg.temperature_variable = cv.value("temperature", cfg.temperature_variable);
    cfg.wind_variable = cv.value("wind", cfg.wind_variable);
    cfg.cloud_variable = cv.value("cloud", cfg.cloud_variable);
    cfg.precip_variable = cv.value("precipitation", cfg.precip_variable);
  }
  if (doc.contains("key_pad")) {
    detail::reject_unknown_keys(doc["key_pad"], {"bbl", "bin"}, "key_pad.");
    cfg.pad_bbl = doc["key_pad"].value("bbl", 0);
    cfg.pad_bin = doc["key_pad"].value("bin", 0);
  }
  if (doc.contains("vif_threshold")) cfg.vif_threshold = doc["vif_threshold"].get<double>();
  if (doc.contains("vif_prune")) cfg.vif_prune = doc["vif_prune"].get<bool>();
  if (doc.contains("regression_modes"))
    cfg.regression_modes = doc["regression_modes"].get<std::vector<std::string>>();
  if (doc.contains("targets")) cfg.targets = doc["targets"].get<std::vector<std::string>>();
  if (doc.contains("emc")) {
    const auto& e = doc["emc"];
    detail::reject_unknown_keys(e, {"k", "covariance", "exclude_columns"}, "emc.");
    if (e.contains("k")) cfg.emc_k = e["k"].get<int>();
    if (e.contains("covariance"))
      cfg.emc_covariance = emc::covariance_from_string(e["covariance"].get<std::string>());
    if (e.contains("exclude_columns"))
      cfg.emc_exclude = e["exclude_columns"].get<std::vector<std::string>>();
  }
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("threads")) cfg.threads = doc["threads"].get<int>();
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

inline void require_path(const std::filesystem::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError("config is missing the " + what + " path");
  if (!std::filesystem::exists(p))
    throw ConfigError(what + " path does not exist: " + p.string());
}

inline void validate_common(const RunConfig& cfg) {
  if (!(cfg.buffer_radius_m > 0.0))
    throw ConfigError("buffer_radius_m must be positive, got " +
                      format_full(cfg.buffer_radius_m));
  if (cfg.arc_segments < 8) throw ConfigError("arc_segments must be at least 8");
  if (!(cfg.vif_threshold > 1.0)) throw ConfigError("vif_threshold must exceed 1");
  if (cfg.emc_k < 1) throw ConfigError("emc.k must be at least 1");
  if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
  if (cfg.degree_day_min_valid_hours < 1 || cfg.degree_day_min_valid_hours > 24)
    throw ConfigError("degree_day_min_valid_hours must be within [1, 24]");
  for (const auto& t : cfg.targets)
    if (t != "electric" && t != "gas")
      throw ConfigError("unknown regression target '" + t + "'");
  for (const auto& m : cfg.regression_modes)
    if (m != "centered" && m != "centered_normalized")
      throw ConfigError("unknown regression mode '" + m + "'");
}

}  // namespace emclim::cli
