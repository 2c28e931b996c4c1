#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "emclim/util.hpp"

namespace emclim::geo {

struct XY {
  double x{};
  double y{};
};

struct LonLat {
  double lon{};
  double lat{};
};

// Rings are stored open (first vertex not repeated), wound counter-clockwise.
using MetricRing = std::vector<XY>;
using GeoRing = std::vector<LonLat>;

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kDegToRad = std::numbers::pi / 180.0;

inline double cross(XY o, XY a, XY b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline double signed_area(const MetricRing& ring) {
  double s = 0.0;
  size_t n = ring.size();
  for (size_t i = 0; i < n; ++i) {
    const XY& a = ring[i];
    const XY& b = ring[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

inline double ring_area(const MetricRing& ring) { return std::abs(signed_area(ring)); }

inline double ring_perimeter(const MetricRing& ring) {
  double p = 0.0;
  size_t n = ring.size();
  for (size_t i = 0; i < n; ++i) {
    const XY& a = ring[i];
    const XY& b = ring[(i + 1) % n];
    p += std::hypot(b.x - a.x, b.y - a.y);
  }
  return p;
}

inline XY vertex_mean(const MetricRing& ring) {
  XY c{};
  for (const XY& v : ring) {
    c.x += v.x;
    c.y += v.y;
  }
  c.x /= double(ring.size());
  c.y /= double(ring.size());
  return c;
}

// Crossing-number test; points exactly on an edge count as inside.
inline bool point_in_ring(const MetricRing& ring, XY p) {
  size_t n = ring.size();
  bool inside = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const XY& a = ring[j];
    const XY& b = ring[i];
    double minx = std::min(a.x, b.x), maxx = std::max(a.x, b.x);
    double miny = std::min(a.y, b.y), maxy = std::max(a.y, b.y);
    if (p.x >= minx && p.x <= maxx && p.y >= miny && p.y <= maxy &&
        std::abs(cross(a, b, p)) < 1e-12 * (1.0 + maxx - minx + maxy - miny))
      return true;
    if ((b.y > p.y) != (a.y > p.y)) {
      double xint = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
      if (p.x < xint) inside = !inside;
    }
  }
  return inside;
}

inline bool is_convex_ccw(const MetricRing& ring) {
  size_t n = ring.size();
  if (n < 3) return false;
  for (size_t i = 0; i < n; ++i) {
    if (cross(ring[i], ring[(i + 1) % n], ring[(i + 2) % n]) <= 0.0) return false;
  }
  return true;
}

namespace detail {

inline bool segments_properly_intersect(XY a, XY b, XY c, XY d) {
  double d1 = cross(c, d, a);
  double d2 = cross(c, d, b);
  double d3 = cross(a, b, c);
  double d4 = cross(a, b, d);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

}  // namespace detail

// Drops duplicate consecutive vertices and enforces CCW winding.
// Self-intersecting rings are rejected, not repaired.
inline MetricRing clean_ring(MetricRing ring) {
  if (!ring.empty() && ring.front().x == ring.back().x && ring.front().y == ring.back().y)
    ring.pop_back();  // tolerate closed input
  MetricRing out;
  for (const XY& v : ring) {
    if (out.empty() || out.back().x != v.x || out.back().y != v.y) out.push_back(v);
  }
  if (out.size() >= 2 && out.front().x == out.back().x && out.front().y == out.back().y)
    out.pop_back();
  if (out.size() < 3) throw DataError("degenerate polygon: fewer than 3 distinct vertices");
  if (signed_area(out) < 0.0) std::reverse(out.begin(), out.end());
  size_t n = out.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (detail::segments_properly_intersect(out[i], out[(i + 1) % n], out[j], out[(j + 1) % n]))
        throw DataError("self-intersecting polygon rejected");
    }
  }
  return out;
}

// Monotone chain; output is strictly convex, CCW, starting at the
// lexicographically smallest vertex. Idempotent on its own output.
inline MetricRing convex_hull(std::vector<XY> points) {
  std::sort(points.begin(), points.end(), [](XY a, XY b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  points.erase(std::unique(points.begin(), points.end(),
                           [](XY a, XY b) { return a.x == b.x && a.y == b.y; }),
               points.end());
  size_t n = points.size();
  if (n < 3) throw DataError("degenerate geometry: convex hull needs 3 non-collinear points");
  std::vector<XY> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
    hull[k++] = points[i];
  }
  size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) throw DataError("degenerate geometry: all points collinear");
  return hull;
}

// Local equirectangular projection about a fixed origin. Sub-millimeter
// distortion at the <=1 km extents this pipeline works with.
struct LocalProjection {
  LonLat origin;

  XY to_metric(LonLat p) const {
    double kx = kEarthRadiusM * kDegToRad * std::cos(origin.lat * kDegToRad);
    double ky = kEarthRadiusM * kDegToRad;
    return {(p.lon - origin.lon) * kx, (p.lat - origin.lat) * ky};
  }
  LonLat to_geographic(XY p) const {
    double kx = kEarthRadiusM * kDegToRad * std::cos(origin.lat * kDegToRad);
    double ky = kEarthRadiusM * kDegToRad;
    return {origin.lon + p.x / kx, origin.lat + p.y / ky};
  }
};

inline MetricRing to_local_metric(const GeoRing& ring, LonLat origin) {
  LocalProjection proj{origin};
  MetricRing out;
  out.reserve(ring.size());
  for (const LonLat& p : ring) {
    if (std::abs(p.lon - origin.lon) > 1.0 || std::abs(p.lat - origin.lat) > 1.0)
      throw DataError("projection distortion: polygon spans more than 1 degree from origin");
    out.push_back(proj.to_metric(p));
  }
  return out;
}

inline GeoRing to_geographic(const MetricRing& ring, LonLat origin) {
  LocalProjection proj{origin};
  GeoRing out;
  out.reserve(ring.size());
  for (const XY& p : ring) out.push_back(proj.to_geographic(p));
  return out;
}

// Polygonal Minkowski sum of a convex hull and a radius-r disk. Corner arcs
// are sampled on the true circle, arc_segments points per full turn,
// proportioned to each corner's exterior angle.
inline MetricRing buffer_convex(const MetricRing& hull, double radius, int arc_segments) {
  if (radius <= 0.0) throw DataError("buffer radius must be positive");
  if (arc_segments < 8) throw DataError("arc_segments must be at least 8");
  if (!is_convex_ccw(hull)) throw DataError("buffering requires a convex CCW polygon");

  size_t n = hull.size();
  double step = 2.0 * std::numbers::pi / arc_segments;
  MetricRing out;
  out.reserve(n * 4);
  for (size_t i = 0; i < n; ++i) {
    const XY& prev = hull[(i + n - 1) % n];
    const XY& cur = hull[i];
    const XY& next = hull[(i + 1) % n];
    // outward normal angles of the incoming and outgoing edges (CCW ring:
    // edge (dx,dy) has outward normal (dy,-dx))
    double a_in = std::atan2(-(cur.x - prev.x), cur.y - prev.y);
    double a_out = std::atan2(-(next.x - cur.x), next.y - cur.y);
    double turn = a_out - a_in;
    while (turn < 0) turn += 2.0 * std::numbers::pi;
    while (turn >= 2.0 * std::numbers::pi) turn -= 2.0 * std::numbers::pi;
    int segs = std::max(1, int(std::ceil(turn / step - 1e-12)));
    for (int s = 0; s <= segs; ++s) {
      double a = a_in + turn * double(s) / double(segs);
      out.push_back({cur.x + radius * std::cos(a), cur.y + radius * std::sin(a)});
    }
  }
  return out;
}

struct CaptureRegion {
  std::string building_ref;
  MetricRing hull;
  MetricRing buffered;
  double buffer_radius{};
  LonLat projection_origin;
};

// hull + buffer in a per-building local metric frame centered on the footprint.
inline CaptureRegion make_capture_region(const std::string& ref, const GeoRing& footprint,
                                         double radius, int arc_segments) {
  LonLat origin{};
  for (const LonLat& p : footprint) {
    origin.lon += p.lon;
    origin.lat += p.lat;
  }
  origin.lon /= double(footprint.size());
  origin.lat /= double(footprint.size());

  MetricRing metric = clean_ring(to_local_metric(footprint, origin));
  MetricRing hull = convex_hull(metric);
  MetricRing buffered = buffer_convex(hull, radius, arc_segments);
  return {ref, std::move(hull), std::move(buffered), radius, origin};
}

}  // namespace emclim::geo
