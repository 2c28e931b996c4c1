#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "emclim/geometry.hpp"
#include "emclim/grid.hpp"

namespace emclim::raster {

struct ZonalStat {
  std::optional<double> value;
  double covered_area{};    // region area intersecting valid cells
  double valid_fraction{};  // covered_area / area(region)
};

namespace detail {

// Axis-aligned placement of the grid in the region's coordinate frame.
struct CellFrame {
  double x0{}, y0{};  // lower-left corner of cell (0,0)
  double dx{}, dy{};  // cell extents
};

inline void clip_halfplane(std::vector<geo::XY>& poly, std::vector<geo::XY>& tmp, int axis,
                           double bound, int keep_sign) {
  tmp.clear();
  size_t n = poly.size();
  if (n == 0) return;
  auto coord = [axis](const geo::XY& p) { return axis == 0 ? p.x : p.y; };
  for (size_t i = 0; i < n; ++i) {
    const geo::XY& cur = poly[i];
    const geo::XY& nxt = poly[(i + 1) % n];
    double dc = (coord(cur) - bound) * keep_sign;
    double dn = (coord(nxt) - bound) * keep_sign;
    if (dc >= 0) tmp.push_back(cur);
    if ((dc < 0) != (dn < 0)) {
      double t = dc / (dc - dn);
      tmp.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
    }
  }
  poly.swap(tmp);
}

// Sutherland-Hodgman against an axis-aligned rectangle; returns |area|.
inline double clipped_area(const geo::MetricRing& region, double rx0, double ry0, double rx1,
                           double ry1, std::vector<geo::XY>& work, std::vector<geo::XY>& tmp) {
  work.assign(region.begin(), region.end());
  clip_halfplane(work, tmp, 0, rx0, +1);
  clip_halfplane(work, tmp, 0, rx1, -1);
  clip_halfplane(work, tmp, 1, ry0, +1);
  clip_halfplane(work, tmp, 1, ry1, -1);
  if (work.size() < 3) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < work.size(); ++i) {
    const geo::XY& a = work[i];
    const geo::XY& b = work[(i + 1) % work.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return std::abs(0.5 * s);
}

inline ZonalStat zonal_reduce_frame(const RasterGrid& grid, const geo::MetricRing& region,
                                    const CellFrame& f) {
  if (region.size() < 3) throw DataError("zonal reduction needs a polygonal region");
  double region_area = geo::ring_area(region);
  if (region_area <= 0.0) throw DataError("zonal reduction region has zero area");

  std::vector<geo::XY> work, tmp;
  double extent_overlap =
      clipped_area(region, f.x0, f.y0, f.x0 + grid.ncols * f.dx, f.y0 + grid.nrows * f.dy, work,
                   tmp);
  if (extent_overlap <= 0.0) throw DataError("region lies entirely outside the grid extent");

  double bx0 = region[0].x, bx1 = region[0].x, by0 = region[0].y, by1 = region[0].y;
  for (const geo::XY& p : region) {
    bx0 = std::min(bx0, p.x);
    bx1 = std::max(bx1, p.x);
    by0 = std::min(by0, p.y);
    by1 = std::max(by1, p.y);
  }
  int c0 = std::max(0, int(std::floor((bx0 - f.x0) / f.dx)));
  int c1 = std::min(grid.ncols - 1, int(std::floor((bx1 - f.x0) / f.dx)));
  int r0 = std::max(0, int(std::floor((by0 - f.y0) / f.dy)));
  int r1 = std::min(grid.nrows - 1, int(std::floor((by1 - f.y0) / f.dy)));

  // fixed row-major accumulation order keeps results schedule independent
  double sum_vw = 0.0, sum_w = 0.0;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      double w = clipped_area(region, f.x0 + c * f.dx, f.y0 + r * f.dy, f.x0 + (c + 1) * f.dx,
                              f.y0 + (r + 1) * f.dy, work, tmp);
      if (w <= 0.0) continue;
      double v = grid.at(c, r);
      if (grid.is_nodata(v)) continue;
      sum_vw += v * w;
      sum_w += w;
    }
  }

  ZonalStat out;
  out.covered_area = sum_w;
  out.valid_fraction = sum_w / region_area;
  if (sum_w > 0.0) out.value = sum_vw / sum_w;
  return out;
}

}  // namespace detail

// Area-weighted mean of valid cells over a polygon in the grid's own
// local-metric frame.
inline ZonalStat zonal_reduce(const RasterGrid& grid, const geo::MetricRing& region) {
  if (grid.crs != Crs::LocalMetric)
    throw DataError("zonal_reduce requires a local-metric grid; use zonal_reduce_geo for wgs84");
  return detail::zonal_reduce_frame(grid, region,
                                    {grid.xll, grid.yll, grid.cell_size, grid.cell_size});
}

// Same reduction for a geographic (degrees) grid: cells are mapped through
// the equirectangular projection about `origin`, which keeps them
// axis-aligned rectangles in the region's metric frame.
inline ZonalStat zonal_reduce_geo(const RasterGrid& grid, const geo::MetricRing& region,
                                  geo::LonLat origin) {
  if (grid.crs != Crs::Wgs84) throw DataError("zonal_reduce_geo requires a wgs84 grid");
  double kx = geo::kEarthRadiusM * geo::kDegToRad * std::cos(origin.lat * geo::kDegToRad);
  double ky = geo::kEarthRadiusM * geo::kDegToRad;
  detail::CellFrame f;
  f.x0 = (grid.xll - origin.lon) * kx;
  f.y0 = (grid.yll - origin.lat) * ky;
  f.dx = grid.cell_size * kx;
  f.dy = grid.cell_size * ky;
  return detail::zonal_reduce_frame(grid, region, f);
}

}  // namespace emclim::raster
