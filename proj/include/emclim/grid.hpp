#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "emclim/util.hpp"

namespace emclim::raster {

enum class Crs { LocalMetric, Wgs84 };

inline std::string to_string(Crs crs) { return crs == Crs::Wgs84 ? "wgs84" : "local-metric"; }

inline Crs crs_from_string(const std::string& s) {
  if (s == "wgs84") return Crs::Wgs84;
  if (s == "local-metric") return Crs::LocalMetric;
  throw ConfigError("unknown CRS tag: '" + s + "' (expected wgs84 or local-metric)");
}

// One georeferenced band. Values are row-major with row 0 at the bottom
// (the lower-left origin convention); ESRI ASCII files store the top row
// first and are flipped on load.
struct RasterGrid {
  int ncols{};
  int nrows{};
  double cell_size{};
  double xll{};
  double yll{};
  double nodata{-9999.0};
  Crs crs{Crs::LocalMetric};
  std::vector<double> values;

  double at(int col, int row) const { return values[size_t(row) * ncols + col]; }
  double& at(int col, int row) { return values[size_t(row) * ncols + col]; }
  bool is_nodata(double v) const { return v == nodata || std::isnan(v); }
  bool same_shape(const RasterGrid& o) const {
    return ncols == o.ncols && nrows == o.nrows &&
           std::abs(cell_size - o.cell_size) <= 1e-9 * std::abs(cell_size) &&
           std::abs(xll - o.xll) <= 1e-6 && std::abs(yll - o.yll) <= 1e-6;
  }
};

inline RasterGrid load_grid(const std::filesystem::path& path, Crs crs = Crs::LocalMetric) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grid: " + path.string());

  std::map<std::string, double> header;
  std::string key;
  // six fixed header lines: key value
  for (int i = 0; i < 6; ++i) {
    double value;
    if (!(in >> key >> value)) throw DataError(path.string() + ": truncated header");
    for (char& c : key) c = char(std::tolower(static_cast<unsigned char>(c)));
    header[key] = value;
  }
  for (const char* k : {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"}) {
    if (!header.count(k))
      throw DataError(path.string() + ": missing header key '" + std::string(k) + "'");
  }

  RasterGrid g;
  g.ncols = int(header["ncols"]);
  g.nrows = int(header["nrows"]);
  g.cell_size = header["cellsize"];
  g.xll = header["xllcorner"];
  g.yll = header["yllcorner"];
  g.nodata = header["nodata_value"];
  g.crs = crs;
  if (g.ncols <= 0 || g.nrows <= 0 || g.cell_size <= 0)
    throw DataError(path.string() + ": non-positive grid dimensions");

  size_t expected = size_t(g.ncols) * size_t(g.nrows);
  g.values.assign(expected, g.nodata);
  size_t count = 0;
  double v;
  while (in >> v) {
    if (count < expected) {
      size_t file_row = count / g.ncols;       // 0 = top
      size_t col = count % g.ncols;
      size_t row = g.nrows - 1 - file_row;     // internal bottom-origin
      g.values[row * g.ncols + col] = v;
    }
    ++count;
  }
  if (count != expected)
    throw DataError(path.string() + ": value count mismatch, expected " + std::to_string(expected) +
                    ", got " + std::to_string(count));
  return g;
}

inline void write_grid(const RasterGrid& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write grid: " + path.string());
  out << "ncols " << g.ncols << "\n";
  out << "nrows " << g.nrows << "\n";
  out << "xllcorner " << format_full(g.xll) << "\n";
  out << "yllcorner " << format_full(g.yll) << "\n";
  out << "cellsize " << format_full(g.cell_size) << "\n";
  out << "NODATA_value " << format_full(g.nodata) << "\n";
  for (int file_row = 0; file_row < g.nrows; ++file_row) {
    int row = g.nrows - 1 - file_row;
    for (int col = 0; col < g.ncols; ++col) {
      if (col) out << ' ';
      out << format_full(g.at(col, row));
    }
    out << "\n";
  }
}

struct MaskScheme {
  std::string name;
  int cloud_bit{};
  int cirrus_bit{};
};

// Named bit layouts for quality bands; the shipped default matches the
// Sentinel-2 Level-1C QA60 convention.
inline MaskScheme mask_scheme(const std::string& name) {
  if (name == "S2-L1C-QA60") return {name, 10, 11};
  throw ConfigError("unknown mask scheme: '" + name + "'");
}

struct QualityMask {
  RasterGrid bits;
  int cloud_bit{10};
  int cirrus_bit{11};
};

// Cloud/cirrus-flagged cells become nodata; everything else passes through.
inline RasterGrid apply_bitmask(const RasterGrid& band, const QualityMask& mask) {
  if (band.ncols != mask.bits.ncols || band.nrows != mask.bits.nrows)
    throw DataError("mask alignment error: band is " + std::to_string(band.ncols) + "x" +
                    std::to_string(band.nrows) + ", mask is " + std::to_string(mask.bits.ncols) +
                    "x" + std::to_string(mask.bits.nrows));
  RasterGrid out = band;
  std::uint64_t flags = (1ull << mask.cloud_bit) | (1ull << mask.cirrus_bit);
  for (size_t i = 0; i < out.values.size(); ++i) {
    double mv = mask.bits.values[i];
    if (mask.bits.is_nodata(mv)) continue;
    auto bits = static_cast<std::uint64_t>(std::llround(mv));
    if (bits & flags) out.values[i] = out.nodata;
  }
  return out;
}

// (NIR - Red) / (NIR + Red); zero-sum and nodata cells propagate as nodata.
inline RasterGrid ndvi(const RasterGrid& nir, const RasterGrid& red) {
  if (nir.ncols != red.ncols || nir.nrows != red.nrows)
    throw DataError("ndvi alignment error: band shapes differ");
  RasterGrid out = nir;
  out.nodata = -9999.0;
  for (size_t i = 0; i < out.values.size(); ++i) {
    double n = nir.values[i];
    double r = red.values[i];
    if (nir.is_nodata(n) || red.is_nodata(r)) {
      out.values[i] = out.nodata;
      continue;
    }
    if (n < 0.0 || r < 0.0)
      throw DataError("ndvi: negative reflectance encountered");
    double sum = n + r;
    out.values[i] = sum == 0.0 ? out.nodata : (n - r) / sum;
  }
  return out;
}

}  // namespace emclim::raster
