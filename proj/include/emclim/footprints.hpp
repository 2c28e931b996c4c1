#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emclim/geometry.hpp"
#include "emclim/util.hpp"

namespace emclim::geo {

struct FootprintRecord {
  std::string bbl;
  std::string bin;
  GeoRing footprint;  // outer ring, WGS84 degrees
  // set after joining the attributes table
  std::optional<double> floor_area_m2;
  std::optional<double> assess_total;
  std::optional<double> year_built;
};

struct IngestReport {
  int features_total{};
  int records{};
  std::vector<std::pair<size_t, std::string>> skipped;  // feature index, reason
  double attrition_fraction() const {
    return features_total == 0 ? 0.0 : double(skipped.size()) / features_total;
  }
};

namespace detail {

inline GeoRing ring_from_coords(const nlohmann::json& coords) {
  GeoRing ring;
  for (const auto& pt : coords) {
    if (!pt.is_array() || pt.size() < 2) throw DataError("invalid coordinate pair");
    ring.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  if (ring.size() >= 2 && ring.front().lon == ring.back().lon &&
      ring.front().lat == ring.back().lat)
    ring.pop_back();
  if (ring.size() < 3) throw DataError("polygon ring has fewer than 3 distinct vertices");
  return ring;
}

// planar area in a locally scaled frame, good enough to rank parts
inline double approx_ring_area(const GeoRing& ring) {
  double lat0 = 0.0;
  for (const LonLat& p : ring) lat0 += p.lat;
  lat0 /= double(ring.size());
  double k = std::cos(lat0 * kDegToRad);
  double s = 0.0;
  size_t n = ring.size();
  for (size_t i = 0; i < n; ++i) {
    const LonLat& a = ring[i];
    const LonLat& b = ring[(i + 1) % n];
    s += (a.lon * k) * b.lat - (b.lon * k) * a.lat;
  }
  return std::abs(0.5 * s);
}

}  // namespace detail

struct FootprintSet {
  std::vector<FootprintRecord> records;
  IngestReport report;
};

// Reads an RFC 7946 FeatureCollection. Per-feature problems (missing bbl,
// bad geometry) are collected into the report and the feature is skipped;
// malformed JSON is fatal with the parser's byte offset.
inline FootprintSet parse_footprints(std::istream& in, const std::string& context = "footprints") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(context + ": " + e.what() + " (byte " + std::to_string(e.byte) + ")");
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array())
    throw DataError(context + ": not a GeoJSON FeatureCollection");

  FootprintSet out;
  const auto& features = doc["features"];
  out.report.features_total = int(features.size());
  for (size_t i = 0; i < features.size(); ++i) {
    const auto& feature = features[i];
    auto skip = [&](const std::string& why) { out.report.skipped.emplace_back(i, why); };
    try {
      if (!feature.contains("properties") || feature["properties"].is_null()) {
        skip("feature has no properties");
        continue;
      }
      const auto& props = feature["properties"];
      if (!props.contains("bbl") || props["bbl"].is_null()) {
        skip("missing property 'bbl'");
        continue;
      }
      if (!props.contains("bin") || props["bin"].is_null()) {
        skip("missing property 'bin'");
        continue;
      }
      auto id_string = [](const nlohmann::json& v) {
        return v.is_string() ? v.get<std::string>() : v.dump();
      };
      if (!feature.contains("geometry") || feature["geometry"].is_null()) {
        skip("missing geometry");
        continue;
      }
      const auto& geom = feature["geometry"];
      std::string type = geom.value("type", "");
      const auto& coords = geom["coordinates"];

      FootprintRecord rec;
      rec.bbl = id_string(props["bbl"]);
      rec.bin = id_string(props["bin"]);
      if (type == "Polygon") {
        rec.footprint = detail::ring_from_coords(coords.at(0));  // outer ring
      } else if (type == "MultiPolygon") {
        // keep the largest part; slivers distort the hull more than they inform it
        double best = -1.0;
        for (const auto& part : coords) {
          GeoRing ring = detail::ring_from_coords(part.at(0));
          double a = detail::approx_ring_area(ring);
          if (a > best) {
            best = a;
            rec.footprint = std::move(ring);
          }
        }
        if (best < 0.0) {
          skip("empty MultiPolygon");
          continue;
        }
      } else {
        skip("unsupported geometry type '" + type + "'");
        continue;
      }
      out.records.push_back(std::move(rec));
      ++out.report.records;
    } catch (const std::exception& e) {
      skip(e.what());
    }
  }
  return out;
}

inline FootprintSet parse_footprints_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open footprints: " + path.string());
  return parse_footprints(in, path.filename().string());
}

inline nlohmann::json ring_to_coords(const GeoRing& ring) {
  nlohmann::json coords = nlohmann::json::array();
  for (const LonLat& p : ring) coords.push_back({p.lon, p.lat});
  coords.push_back({ring.front().lon, ring.front().lat});  // close per RFC 7946
  return nlohmann::json::array({coords});
}

// Capture regions back to GeoJSON (WGS84) for inspection in external viewers.
inline nlohmann::json capture_regions_geojson(const std::vector<CaptureRegion>& regions) {
  nlohmann::json features = nlohmann::json::array();
  for (const CaptureRegion& r : regions) {
    nlohmann::json f;
    f["type"] = "Feature";
    f["properties"] = {{"bbl", r.building_ref}, {"buffer_radius_m", r.buffer_radius}};
    f["geometry"] = {{"type", "Polygon"},
                     {"coordinates", ring_to_coords(to_geographic(r.buffered, r.projection_origin))}};
    features.push_back(std::move(f));
  }
  return nlohmann::json{{"type", "FeatureCollection"}, {"features", features}};
}

}  // namespace emclim::geo
