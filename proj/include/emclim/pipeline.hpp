#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emclim/climate.hpp"
#include "emclim/config.hpp"
#include "emclim/dataset.hpp"
#include "emclim/emc.hpp"
#include "emclim/footprints.hpp"
#include "emclim/regression.hpp"
#include "emclim/scenes.hpp"
#include "emclim/util.hpp"

namespace emclim::cli {

struct RunReport {
  std::string command;
  nlohmann::json attrition;  // null unless the command produces one
  nlohmann::json extras;     // command-specific counters
  std::vector<std::pair<std::string, double>> timings;   // stage, seconds
  std::vector<std::pair<std::string, std::string>> outputs;  // filename, digest

  nlohmann::json to_json() const {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& [stage, secs] : timings) t.push_back({{"stage", stage}, {"seconds", secs}});
    nlohmann::json o = nlohmann::json::array();
    for (const auto& [file, digest] : outputs) o.push_back({{"path", file}, {"digest", digest}});
    return {{"schema_version", 1},
            {"command", command},
            {"attrition", attrition},
            {"extras", extras},
            {"timings", t},
            {"outputs", o}};
  }
  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write run report: " + path.string());
    out << to_json().dump(2) << "\n";
  }
};

namespace detail {

class StageTimer {
 public:
  explicit StageTimer(RunReport& report) : report_(report) {}
  template <typename Fn>
  auto stage(const std::string& name, Fn&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      report_.timings.emplace_back(name, seconds_since(t0));
    } else {
      auto result = fn();
      report_.timings.emplace_back(name, seconds_since(t0));
      return result;
    }
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  RunReport& report_;
};

inline void record_output(RunReport& report, const std::filesystem::path& path) {
  report.outputs.emplace_back(path.filename().string(), file_digest(path));
}

inline std::string display_target(const std::string& target) {
  if (target == "electric") return "log( Electric / Area )";
  if (target == "gas") return "log( Gas / Area )";
  return target;
}

// ------------------------------------------------------------------
// climate sources

struct ClimateSource {
  bool presampled{};
  raster::Crs crs{raster::Crs::Wgs84};
  // presampled series per (cell_x, cell_y) per variable
  geo::LonLat origin;
  double cell_size_deg{};
  std::map<std::pair<long, long>, std::map<std::string, climate::HourlySeries>> cells;
  // grid-backed stacks per variable, sorted by timestamp
  std::map<std::string, std::vector<std::pair<Instant, std::filesystem::path>>> grids;
};

inline ClimateSource load_climate_source(const std::filesystem::path& index_path,
                                         raster::Crs default_crs) {
  std::ifstream in(index_path);
  if (!in) throw DataError("cannot open reanalysis index: " + index_path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(index_path.string() + ": " + e.what());
  }
  auto base = index_path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  ClimateSource src;
  std::string format = doc.value("format", "");
  if (doc.contains("crs")) src.crs = raster::crs_from_string(doc["crs"].get<std::string>());
  else src.crs = default_crs;

  if (format == "presampled-csv") {
    src.presampled = true;
    if (!doc.contains("origin") || !doc.contains("cell_size_deg"))
      throw DataError(index_path.string() + ": presampled-csv index needs origin and cell_size_deg");
    src.origin = {doc["origin"][0].get<double>(), doc["origin"][1].get<double>()};
    src.cell_size_deg = doc["cell_size_deg"].get<double>();
    if (!(src.cell_size_deg > 0.0))
      throw DataError(index_path.string() + ": cell_size_deg must be positive");

    csv::Table t = csv::read_table(resolve(doc.at("path").get<std::string>()));
    std::string ctx = "climate csv";
    int c_t = t.require_column("timestamp", ctx);
    int c_v = t.require_column("variable", ctx);
    int c_x = t.require_column("cell_x", ctx);
    int c_y = t.require_column("cell_y", ctx);
    int c_val = t.require_column("value", ctx);

    struct Sample {
      Instant t;
      std::optional<double> v;
    };
    std::map<std::pair<long, long>, std::map<std::string, std::vector<Sample>>> raw;
    for (size_t i = 0; i < t.rows.size(); ++i) {
      const auto& row = t.rows[i];
      std::string rctx = ctx + " row " + std::to_string(i + 2);
      std::pair<long, long> cell{csv::parse_long(row[c_x], rctx), csv::parse_long(row[c_y], rctx)};
      raw[cell][row[c_v]].push_back(
          {parse_instant(row[c_t]), csv::parse_optional_double(row[c_val], rctx)});
    }
    for (auto& [cell, vars] : raw) {
      for (auto& [var, samples] : vars) {
        std::sort(samples.begin(), samples.end(),
                  [](const Sample& a, const Sample& b) { return a.t < b.t; });
        climate::HourlySeries series;
        series.variable = var;
        series.cell_ref = std::to_string(cell.first) + "," + std::to_string(cell.second);
        for (const Sample& s : samples) series.push(s.t, s.v);
        src.cells[cell][var] = std::move(series);
      }
    }
  } else if (format == "grid-dir") {
    src.presampled = false;
    if (!doc.contains("grids") || !doc["grids"].is_array())
      throw DataError(index_path.string() + ": grid-dir index needs a grids array");
    for (const auto& g : doc["grids"]) {
      src.grids[g.at("variable").get<std::string>()].emplace_back(
          parse_instant(g.at("timestamp").get<std::string>()),
          resolve(g.at("path").get<std::string>()));
    }
    for (auto& [var, stack] : src.grids)
      std::sort(stack.begin(), stack.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
  } else {
    throw DataError(index_path.string() + ": unknown climate index format '" + format +
                    "' (expected presampled-csv or grid-dir)");
  }
  return src;
}

}  // namespace detail

// ------------------------------------------------------------------
// features

inline RunReport cmd_features(const RunConfig& cfg) {
  validate_common(cfg);
  require_path(cfg.footprints, "footprints");
  require_path(cfg.attributes, "attributes");
  require_path(cfg.energy, "energy");
  std::filesystem::create_directories(cfg.out_dir);

  RunReport report;
  report.command = "features";
  detail::StageTimer timer(report);

  dataset::KeyConfig keys{cfg.pad_bbl, cfg.pad_bin};

  auto footprint_set = timer.stage("ingest-footprints", [&] {
    auto set = geo::parse_footprints_file(cfg.footprints);
    for (auto& rec : set.records) {
      rec.bbl = dataset::normalize_key(rec.bbl, keys.pad_bbl);
      rec.bin = dataset::normalize_key(rec.bin, keys.pad_bin);
    }
    return set;
  });
  auto energy = timer.stage("ingest-energy", [&] { return dataset::parse_energy_csv(cfg.energy, keys); });
  auto attributes = timer.stage("ingest-attributes",
                                [&] { return dataset::parse_attributes_csv(cfg.attributes, keys); });

  // sorted building and month universes keep every downstream loop ordered
  std::set<YearMonth> months;
  std::set<std::pair<std::string, std::string>> energy_buildings;
  for (const auto& e : energy) {
    months.insert(e.month);
    energy_buildings.insert({e.bbl, e.bin});
  }

  struct Building {
    const geo::FootprintRecord* footprint;
    geo::CaptureRegion region;
  };
  std::vector<Building> buildings;
  std::vector<geo::CaptureRegion> all_regions;
  int degenerate_footprints = 0;
  timer.stage("capture-regions", [&] {
    std::map<std::pair<std::string, std::string>, const geo::FootprintRecord*> sorted;
    for (const auto& rec : footprint_set.records) sorted[{rec.bbl, rec.bin}] = &rec;
    for (const auto& [key, rec] : sorted) {
      geo::CaptureRegion region;
      try {
        region = geo::make_capture_region(rec->bbl, rec->footprint, cfg.buffer_radius_m,
                                          cfg.arc_segments);
      } catch (const Error&) {
        ++degenerate_footprints;
        continue;
      }
      all_regions.push_back(region);
      if (energy_buildings.count(key)) buildings.push_back({rec, std::move(region)});
    }
  });

  dataset::EnvFeatureTable env;
  nlohmann::json coverage = nlohmann::json::object();

  // satellite bands + NDVI
  if (!cfg.scenes.empty()) {
    require_path(cfg.scenes, "scenes");
    timer.stage("satellite", [&] {
      auto scenes = raster::load_scene_collection(cfg.scenes);
      std::sort(scenes.begin(), scenes.end(), [](const auto& a, const auto& b) {
        return a.timestamp < b.timestamp || (a.timestamp == b.timestamp && a.scene_id < b.scene_id);
      });

      // per (building, band) scene stats grouped by month
      std::map<std::pair<size_t, std::string>, std::map<YearMonth, std::vector<raster::SceneStat>>>
          stats;
      long scene_misses = 0;

      for (const auto& scene : scenes) {
        YearMonth month = month_of(scene.timestamp);
        if (!months.count(month)) continue;

        std::optional<raster::QualityMask> mask;
        if (scene.mask_file) {
          raster::MaskScheme scheme = raster::mask_scheme(
              scene.mask_scheme_name.empty() ? cfg.mask_scheme : scene.mask_scheme_name);
          mask = raster::QualityMask{raster::load_grid(*scene.mask_file, cfg.raster_crs),
                                     scheme.cloud_bit, scheme.cirrus_bit};
        }
        auto load_band = [&](const std::string& name) -> std::optional<raster::RasterGrid> {
          auto it = scene.band_files.find(name);
          if (it == scene.band_files.end()) return std::nullopt;
          raster::RasterGrid g = raster::load_grid(it->second, cfg.raster_crs);
          if (mask) g = raster::apply_bitmask(g, *mask);
          return g;
        };

        auto reduce_all = [&](const raster::RasterGrid& grid, const std::string& band) {
          std::vector<raster::ZonalStat> per_building(buildings.size());
          std::vector<char> missed(buildings.size(), 0);
          parallel_for(buildings.size(), cfg.threads, [&](size_t i) {
            try {
              per_building[i] =
                  grid.crs == raster::Crs::Wgs84
                      ? raster::zonal_reduce_geo(grid, buildings[i].region.buffered,
                                                 buildings[i].region.projection_origin)
                      : raster::zonal_reduce(grid, buildings[i].region.buffered);
            } catch (const Error&) {
              missed[i] = 1;  // scene does not cover this building
            }
          });
          for (size_t i = 0; i < buildings.size(); ++i) {
            if (missed[i]) {
              ++scene_misses;
              stats[{i, band}][month].push_back({scene.scene_id, scene.timestamp, {}});
            } else {
              stats[{i, band}][month].push_back(
                  {scene.scene_id, scene.timestamp, per_building[i]});
            }
          }
        };

        for (const std::string& band : cfg.band_features) {
          if (auto grid = load_band(band)) reduce_all(*grid, band);
        }
        auto nir = load_band(cfg.ndvi_nir);
        auto red = load_band(cfg.ndvi_red);
        if (nir && red) reduce_all(raster::ndvi(*nir, *red), "NDVI");
      }

      // composite scene stats into building-month values
      std::map<std::string, long> months_with_value, months_possible;
      for (const auto& [key, by_month] : stats) {
        const auto& [b_idx, band] = key;
        const Building& b = buildings[b_idx];
        for (const auto& [month, scene_stats] : by_month) {
          raster::CompositeStat c = raster::monthly_composite(scene_stats, month);
          ++months_possible[band];
          if (c.value) {
            ++months_with_value[band];
            env[{b.footprint->bbl, b.footprint->bin, month}][band] = *c.value;
          }
        }
      }
      nlohmann::json bands = nlohmann::json::object();
      for (const auto& [band, possible] : months_possible) {
        bands[band] = {{"building_months_recorded", months_with_value[band]},
                       {"building_months_with_scenes", possible}};
      }
      coverage["satellite"] = bands;
      coverage["scene_misses"] = scene_misses;
    });
  }

  // static elevation
  if (!cfg.elevation_raster.empty()) {
    require_path(cfg.elevation_raster, "elevation_raster");
    timer.stage("elevation", [&] {
      raster::RasterGrid dem = raster::load_grid(cfg.elevation_raster, cfg.raster_crs);
      std::vector<std::optional<double>> elev(buildings.size());
      parallel_for(buildings.size(), cfg.threads, [&](size_t i) {
        try {
          raster::ZonalStat s =
              dem.crs == raster::Crs::Wgs84
                  ? raster::zonal_reduce_geo(dem, buildings[i].region.buffered,
                                             buildings[i].region.projection_origin)
                  : raster::zonal_reduce(dem, buildings[i].region.buffered);
          elev[i] = s.value;
        } catch (const Error&) {
          elev[i] = std::nullopt;
        }
      });
      for (size_t i = 0; i < buildings.size(); ++i) {
        if (!elev[i]) continue;
        const auto& fp = *buildings[i].footprint;
        for (YearMonth month : months) env[{fp.bbl, fp.bin, month}]["elevation"] = *elev[i];
      }
    });
  }

  // reanalysis climate
  if (!cfg.reanalysis_index.empty()) {
    require_path(cfg.reanalysis_index, "reanalysis_index");
    timer.stage("climate", [&] {
      detail::ClimateSource src = detail::load_climate_source(cfg.reanalysis_index, cfg.raster_crs);
      climate::DegreeDayConfig dd_cfg{cfg.degree_day_base_c, cfg.degree_day_min_valid_hours,
                                      cfg.degree_day_per_day, 0};

      // per-building hourly series for the four variables
      std::vector<std::map<std::string, climate::HourlySeries>> series(buildings.size());
      if (src.presampled) {
        for (size_t i = 0; i < buildings.size(); ++i) {
          geo::LonLat c = buildings[i].region.projection_origin;
          std::pair<long, long> cell{
              long(std::floor((c.lon - src.origin.lon) / src.cell_size_deg)),
              long(std::floor((c.lat - src.origin.lat) / src.cell_size_deg))};
          auto it = src.cells.find(cell);
          if (it != src.cells.end()) series[i] = it->second;
        }
      } else {
        for (const auto& [var, stack] : src.grids) {
          for (const auto& [t, path] : stack) {
            raster::RasterGrid grid = raster::load_grid(path, src.crs);
            std::vector<std::optional<double>> vals(buildings.size());
            parallel_for(buildings.size(), cfg.threads, [&](size_t i) {
              try {
                raster::ZonalStat s =
                    grid.crs == raster::Crs::Wgs84
                        ? raster::zonal_reduce_geo(grid, buildings[i].region.buffered,
                                                   buildings[i].region.projection_origin)
                        : raster::zonal_reduce(grid, buildings[i].region.buffered);
                vals[i] = s.value;
              } catch (const Error&) {
                vals[i] = std::nullopt;
              }
            });
            for (size_t i = 0; i < buildings.size(); ++i) {
              auto& s = series[i][var];
              if (s.variable.empty()) s.variable = var;
              s.push(t, vals[i]);
            }
          }
        }
      }

      for (size_t i = 0; i < buildings.size(); ++i) {
        const auto& fp = *buildings[i].footprint;
        auto var = [&](const std::string& name) -> const climate::HourlySeries* {
          auto it = series[i].find(name);
          return it == series[i].end() ? nullptr : &it->second;
        };
        const auto* temps = var(cfg.temperature_variable);
        const auto* wind = var(cfg.wind_variable);
        const auto* cloud = var(cfg.cloud_variable);
        const auto* precip = var(cfg.precip_variable);
        for (YearMonth month : months) {
          auto& row = env[{fp.bbl, fp.bin, month}];
          if (temps) {
            climate::DegreeDays dd = climate::degree_days(*temps, month, dd_cfg);
            if (dd.hdd) row["hdd"] = *dd.hdd;
            if (dd.cdd) row["cdd"] = *dd.cdd;
          }
          if (wind) {
            auto s = climate::monthly_aggregate(*wind, month, climate::Reducer::Mean);
            if (s.value) row["WIND"] = *s.value;
          }
          if (cloud) {
            auto s = climate::monthly_aggregate(*cloud, month, climate::Reducer::Mean);
            if (s.value) row["TCDC"] = *s.value;
          }
          if (precip) {
            auto s = climate::monthly_aggregate(*precip, month, climate::Reducer::Sum);
            if (s.value) row["ACPC01"] = *s.value;
          }
        }
      }
    });
  }

  // drop env entries that ended up empty so assemble sees clean missingness
  for (auto it = env.begin(); it != env.end();) {
    it = it->second.empty() ? env.erase(it) : std::next(it);
  }

  auto assembled = timer.stage("assemble", [&] {
    return dataset::assemble(footprint_set.records, energy, attributes, env);
  });

  timer.stage("write", [&] {
    auto features_path = cfg.out_dir / "features.csv";
    dataset::write_feature_table(assembled.rows, features_path);
    detail::record_output(report, features_path);

    auto schema_path = cfg.out_dir / "features.schema.json";
    std::ofstream schema(schema_path);
    schema << dataset::feature_table_schema().dump(2) << "\n";
    schema.close();
    detail::record_output(report, schema_path);

    auto attrition_path = cfg.out_dir / "attrition.json";
    std::ofstream attr(attrition_path);
    attr << assembled.report.to_json().dump(2) << "\n";
    attr.close();
    detail::record_output(report, attrition_path);

    auto regions_path = cfg.out_dir / "capture_regions.geojson";
    std::ofstream regions(regions_path);
    regions << geo::capture_regions_geojson(all_regions).dump() << "\n";
    regions.close();
    detail::record_output(report, regions_path);
  });

  report.attrition = assembled.report.to_json();
  nlohmann::json ingest = {{"features_total", footprint_set.report.features_total},
                           {"records", footprint_set.report.records},
                           {"skipped", footprint_set.report.skipped.size()},
                           {"degenerate_footprints", degenerate_footprints}};
  report.extras = {{"ingest", ingest}, {"coverage", coverage},
                   {"months", months.size()}, {"buildings_with_energy", energy_buildings.size()}};
  report.write(cfg.out_dir / "report_features.json");
  return report;
}

// ------------------------------------------------------------------
// regress

namespace detail {

struct TargetRows {
  stats::DesignMatrix design;       // raw units
  Eigen::VectorXd y;
  std::vector<emc::RowKey> keys;
};

inline TargetRows select_rows(const std::vector<dataset::FeatureRow>& rows,
                              const std::string& target) {
  std::vector<const dataset::FeatureRow*> usable;
  for (const auto& r : rows) {
    const auto& y = target == "electric" ? r.y_electric : r.y_gas;
    if (!y) continue;
    bool complete = true;
    for (const auto& f : r.features) complete = complete && f.has_value();
    if (complete) usable.push_back(&r);
  }
  if (usable.empty()) throw DataError("no usable rows for target '" + target + "'");

  TargetRows out;
  out.design.names.assign(dataset::kFeatureColumns.begin(), dataset::kFeatureColumns.end());
  out.design.x.resize(long(usable.size()), long(dataset::kFeatureColumns.size()));
  out.y.resize(long(usable.size()));
  for (size_t i = 0; i < usable.size(); ++i) {
    const auto& r = *usable[i];
    for (size_t j = 0; j < r.features.size(); ++j) out.design.x(long(i), long(j)) = *r.features[j];
    out.y[long(i)] = target == "electric" ? *r.y_electric : *r.y_gas;
    out.keys.push_back({r.bbl, r.bin, r.month});
  }
  return out;
}

inline nlohmann::json vif_table_json(const stats::VifTable& t) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : t.history)
    history.push_back({{"column", h.column}, {"vif", h.vif_at_removal}, {"step", h.step}});
  return {{"final", t.final_vifs}, {"history", history}};
}

}  // namespace detail

inline RunReport cmd_regress(const RunConfig& cfg) {
  validate_common(cfg);
  require_path(cfg.features_csv(), "feature_table");
  std::filesystem::create_directories(cfg.out_dir);

  RunReport report;
  report.command = "regress";
  detail::StageTimer timer(report);

  auto rows = timer.stage("read-features",
                          [&] { return dataset::read_feature_table(cfg.features_csv()); });

  std::map<std::string, std::vector<stats::RegressionResult>> by_mode;
  nlohmann::json fits = nlohmann::json::object();
  for (const std::string& target : cfg.targets) {
    detail::TargetRows sel = detail::select_rows(rows, target);

    stats::VifTable vif_table;
    stats::DesignMatrix raw = sel.design;
    if (cfg.vif_prune) {
      auto pruned = stats::prune_by_vif(std::move(raw), cfg.vif_threshold);
      raw = std::move(pruned.design);
      vif_table = std::move(pruned.table);
    }

    for (const std::string& mode : cfg.regression_modes) {
      stats::RegressionResult fit = timer.stage("fit-" + target + "-" + mode, [&] {
        stats::DesignMatrix transformed =
            stats::transform_columns(raw, stats::transform_from_string(mode));
        return stats::fit_ols(transformed, sel.y, target);
      });
      by_mode[mode].push_back(fit);

      nlohmann::json doc = stats::to_json(fit);
      doc["vif"] = detail::vif_table_json(vif_table);
      auto path = cfg.out_dir / ("regression_" + target + "_" + mode + ".json");
      std::ofstream out(path);
      out << doc.dump(2) << "\n";
      out.close();
      detail::record_output(report, path);
      fits[target + "_" + mode] = {{"n", fit.n}, {"r2", fit.r2}, {"columns", fit.names.size()}};
    }
  }

  timer.stage("write-tables", [&] {
    auto path = cfg.out_dir / "regression_tables.txt";
    std::ofstream out(path);
    for (const std::string& mode : cfg.regression_modes) {
      std::vector<stats::RegressionResult> display = by_mode[mode];
      for (auto& r : display) r.target = detail::display_target(r.target);
      out << "Linear model - " << mode << "\n";
      out << stats::format_table(display) << "\n";
    }
    out.close();
    detail::record_output(report, path);
  });

  report.extras = {{"fits", fits}};
  report.write(cfg.out_dir / "report_regress.json");
  return report;
}

// ------------------------------------------------------------------
// cluster

inline RunReport cmd_cluster(const RunConfig& cfg) {
  validate_common(cfg);
  require_path(cfg.features_csv(), "feature_table");
  require_path(cfg.regression_json(), "regression");
  std::filesystem::create_directories(cfg.out_dir);

  RunReport report;
  report.command = "cluster";
  detail::StageTimer timer(report);

  auto rows = timer.stage("read-features",
                          [&] { return dataset::read_feature_table(cfg.features_csv()); });
  stats::RegressionResult fit = timer.stage("read-regression", [&] {
    std::ifstream in(cfg.regression_json());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(cfg.regression_json().string() + ": " + e.what());
    }
    return stats::result_from_json(doc);
  });
  if (fit.target != "electric" && fit.target != "gas")
    throw DataError("regression JSON has no recognizable target");

  detail::TargetRows sel = detail::select_rows(rows, fit.target);
  if (long(sel.keys.size()) <= cfg.emc_k)
    throw DataError("cluster: need more rows than components (N=" +
                    std::to_string(sel.keys.size()) + ", K=" + std::to_string(cfg.emc_k) + ")");
  if (sel.design.n() != fit.n)
    throw DataError("feature table rows (" + std::to_string(sel.design.n()) +
                    ") do not match the regression's N (" + std::to_string(fit.n) + ")");

  // rebuild the design in the regression's transformed units from its
  // recorded column statistics; never recompute them from this table
  stats::DesignMatrix design;
  design.names = fit.names;
  design.transform = fit.transform;
  design.col_means = fit.col_means;
  design.col_sds = fit.col_sds;
  design.x.resize(sel.design.n(), long(fit.names.size()));
  for (size_t j = 0; j < fit.names.size(); ++j) {
    int src = sel.design.column(fit.names[j]);
    if (src < 0) throw DataError("feature table lacks regression column '" + fit.names[j] + "'");
    design.x.col(long(j)) = sel.design.x.col(src);
    if (fit.transform != stats::ColumnTransform::None)
      design.x.col(long(j)).array() -= fit.col_means[long(j)];
    if (fit.transform == stats::ColumnTransform::CenteredNormalized)
      design.x.col(long(j)) /= fit.col_sds[long(j)];
  }

  emc::ContributionMatrix a = timer.stage("contribution", [&] {
    return emc::contribution_matrix(design, fit, cfg.emc_exclude, sel.keys);
  });

  emc::GmmConfig gmm_cfg;
  gmm_cfg.k = cfg.emc_k;
  gmm_cfg.seed = cfg.seed;
  gmm_cfg.covariance = cfg.emc_covariance;
  emc::EmcModel model = timer.stage("gmm-fit", [&] { return emc::gmm_fit(a, gmm_cfg); });
  emc::Assignment assignment = timer.stage("assign", [&] { return emc::assign(model, a); });
  auto counts = emc::unique_microclimate_count(assignment);
  emc::CentroidSummary summary = emc::centroid_summary(model);

  timer.stage("write", [&] {
    auto model_path = cfg.out_dir / ("emc_model_" + fit.target + ".json");
    std::ofstream mout(model_path);
    mout << emc::to_json(model).dump(2) << "\n";
    mout.close();
    detail::record_output(report, model_path);

    auto assign_path = cfg.out_dir / ("assignments_" + fit.target + ".csv");
    emc::write_assignments_csv(assignment, assign_path);
    detail::record_output(report, assign_path);

    auto centroid_path = cfg.out_dir / ("centroids_" + fit.target + ".csv");
    emc::write_centroid_csv(summary, centroid_path);
    detail::record_output(report, centroid_path);

    auto counts_path = cfg.out_dir / ("unique_counts_" + fit.target + ".csv");
    std::ofstream cout_(counts_path);
    cout_ << "bbl,bin,unique_microclimates\n";
    for (const auto& [key, count] : counts)
      cout_ << key.first << ',' << key.second << ',' << count << "\n";
    cout_.close();
    detail::record_output(report, counts_path);

    // per-row environmental deviation from the retained contribution columns
    auto dev_path = cfg.out_dir / ("deviations_" + fit.target + ".csv");
    std::ofstream dout(dev_path);
    dout << "bbl,bin,month,pct_deviation\n";
    for (long i = 0; i < a.a.rows(); ++i) {
      const emc::RowKey& k = a.keys[size_t(i)];
      double pct = 100.0 * (std::exp(a.a.row(i).sum()) - 1.0);
      dout << k.bbl << ',' << k.bin << ',' << to_string(k.month) << ',' << format_full(pct)
           << "\n";
    }
    dout.close();
    detail::record_output(report, dev_path);
  });

  // distribution of unique-microclimate counts (mapping-ready summary)
  std::map<int, int> count_histogram;
  for (const auto& [key, c] : counts) ++count_histogram[c];
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [c, n] : count_histogram) hist[std::to_string(c)] = n;

  report.extras = {{"target", fit.target},
                   {"k", cfg.emc_k},
                   {"seed", cfg.seed},
                   {"covariance", emc::to_string(cfg.emc_covariance)},
                   {"excluded", cfg.emc_exclude},
                   {"em_iterations", model.loglik.size()},
                   {"final_loglik", model.loglik.empty() ? 0.0 : model.loglik.back()},
                   {"unique_count_histogram", hist}};
  report.write(cfg.out_dir / "report_cluster.json");
  return report;
}

// ------------------------------------------------------------------
// map

struct MapOptions {
  std::filesystem::path input;       // assignments or deviations CSV
  std::filesystem::path output;      // GeoJSON path
  std::string month;                 // "", "all", or YYYY-MM
};

inline RunReport cmd_map(const RunConfig& cfg, const MapOptions& opts) {
  require_path(cfg.footprints, "footprints");
  require_path(opts.input, "map input");
  std::filesystem::create_directories(cfg.out_dir);

  RunReport report;
  report.command = "map";
  detail::StageTimer timer(report);

  dataset::KeyConfig keys{cfg.pad_bbl, cfg.pad_bin};
  auto footprint_set = geo::parse_footprints_file(cfg.footprints);
  std::map<std::pair<std::string, std::string>, const geo::FootprintRecord*> geometry;
  for (const auto& rec : footprint_set.records)
    geometry[{dataset::normalize_key(rec.bbl, keys.pad_bbl),
              dataset::normalize_key(rec.bin, keys.pad_bin)}] = &rec;

  csv::Table t = csv::read_table(opts.input);
  std::string ctx = opts.input.filename().string();
  int c_bbl = t.require_column("bbl", ctx);
  int c_bin = t.require_column("bin", ctx);
  int c_month = t.require_column("month", ctx);
  int c_label = t.column("label");
  int c_dev = t.column("pct_deviation");
  if (c_label < 0 && c_dev < 0)
    throw DataError(ctx + ": expected a 'label' or 'pct_deviation' column");
  bool labels = c_label >= 0;
  if (opts.month == "all" && labels)
    throw DataError("month=all aggregation is defined for deviations, not labels");

  struct Row {
    std::pair<std::string, std::string> key;
    std::string month;
    double value;
  };
  std::vector<Row> selected;
  for (size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::string month = row[c_month];
    if (!opts.month.empty() && opts.month != "all" && month != opts.month) continue;
    std::string rctx = ctx + " row " + std::to_string(i + 2);
    selected.push_back({{dataset::normalize_key(row[c_bbl], keys.pad_bbl),
                         dataset::normalize_key(row[c_bin], keys.pad_bin)},
                        month,
                        labels ? double(csv::parse_long(row[c_label], rctx))
                               : csv::parse_double(row[c_dev], rctx)});
  }

  if (opts.month == "all") {
    std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
    for (const Row& r : selected) {
      auto& a = acc[r.key];
      a.first += r.value;
      a.second += 1;
    }
    selected.clear();
    for (const auto& [key, a] : acc)
      selected.push_back({key, "all", a.first / a.second});
  }

  nlohmann::json features = nlohmann::json::array();
  std::vector<std::string> unmatched;
  for (const Row& r : selected) {
    auto it = geometry.find(r.key);
    if (it == geometry.end()) {
      unmatched.push_back(r.key.first + "/" + r.key.second);
      continue;
    }
    nlohmann::json f;
    f["type"] = "Feature";
    f["properties"] = {{"bbl", r.key.first}, {"bin", r.key.second}, {"month", r.month}};
    if (labels) f["properties"]["label"] = int(r.value);
    else f["properties"]["pct_deviation"] = r.value;
    f["geometry"] = {{"type", "Polygon"},
                     {"coordinates", geo::ring_to_coords(it->second->footprint)}};
    features.push_back(std::move(f));
  }

  auto out_path = opts.output.empty() ? cfg.out_dir / "map.geojson" : opts.output;
  timer.stage("write", [&] {
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write map: " + out_path.string());
    out << nlohmann::json{{"type", "FeatureCollection"}, {"features", features}}.dump() << "\n";
    out.close();
    detail::record_output(report, out_path);
  });

  report.extras = {{"features_written", features.size()},
                   {"unmatched_keys", unmatched},
                   {"value", labels ? "label" : "pct_deviation"}};
  report.write(cfg.out_dir / "report_map.json");
  return report;
}

// ------------------------------------------------------------------
// report verification

inline int cmd_report(const std::filesystem::path& report_path, std::ostream& out) {
  std::ifstream in(report_path);
  if (!in) throw DataError("cannot open run report: " + report_path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(report_path.string() + ": " + e.what());
  }
  auto dir = report_path.parent_path();
  out << "command: " << doc.value("command", "?") << "\n";
  for (const auto& t : doc.value("timings", nlohmann::json::array()))
    out << "  stage " << t.value("stage", "?") << ": " << t.value("seconds", 0.0) << " s\n";
  int mismatches = 0;
  for (const auto& o : doc.value("outputs", nlohmann::json::array())) {
    std::string file = o.value("path", "");
    std::string expected = o.value("digest", "");
    auto path = dir / file;
    if (!std::filesystem::exists(path)) {
      out << "MISSING   " << file << "\n";
      ++mismatches;
      continue;
    }
    std::string actual = file_digest(path);
    if (actual == expected) {
      out << "OK        " << file << "\n";
    } else {
      out << "MISMATCH  " << file << " (expected " << expected << ", got " << actual << ")\n";
      ++mismatches;
    }
  }
  if (mismatches > 0)
    throw DataError(std::to_string(mismatches) + " output(s) missing or modified");
  return 0;
}

}  // namespace emclim::cli
