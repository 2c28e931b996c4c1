#include <catch2/catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "emclim/geometry.hpp"
#include "support/oracles.hpp"

using namespace emclim;
using geo::MetricRing;
using geo::XY;

TEST_CASE("convex hull of a square is the square", "[geo]") {
  MetricRing hull = geo::convex_hull({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  REQUIRE(hull.size() == 4);
  CHECK(geo::signed_area(hull) == Catch::Approx(1.0));
  CHECK(geo::is_convex_ccw(hull));
}

TEST_CASE("interior points are eliminated from the hull", "[geo]") {
  MetricRing hull = geo::convex_hull({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}});
  REQUIRE(hull.size() == 4);
  for (const XY& v : hull) CHECK((v.x == 0.0 || v.x == 1.0));
}

TEST_CASE("hull validated by the half-plane oracle on seeded points", "[geo]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<XY> pts;
  for (int i = 0; i < 50; ++i) pts.push_back({u(rng), u(rng)});
  MetricRing hull = geo::convex_hull(pts);

  // every input point lies on the inner side of every hull edge
  for (size_t e = 0; e < hull.size(); ++e) {
    const XY& a = hull[e];
    const XY& b = hull[(e + 1) % hull.size()];
    for (const XY& p : pts) CHECK(geo::cross(a, b, p) >= -1e-9);
  }
}

TEST_CASE("hull is idempotent vertex-for-vertex", "[geo]") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    MetricRing hull = oracle::random_convex_hull(rng, 50.0);
    MetricRing again = geo::convex_hull(hull);
    REQUIRE(again.size() == hull.size());
    for (size_t i = 0; i < hull.size(); ++i) {
      CHECK(again[i].x == hull[i].x);
      CHECK(again[i].y == hull[i].y);
    }
  }
}

TEST_CASE("collinear points cannot form a hull", "[geo]") {
  CHECK_THROWS_AS(geo::convex_hull({{0, 0}, {1, 1}, {2, 2}, {3, 3}}), DataError);
}

TEST_CASE("projection maps the origin to (0,0)", "[geo]") {
  geo::LocalProjection proj{{-73.97, 40.78}};
  XY p = proj.to_metric({-73.97, 40.78});
  CHECK(p.x == 0.0);
  CHECK(p.y == 0.0);
}

TEST_CASE("a millidegree north matches the great-circle arc", "[geo]") {
  geo::LonLat origin{-73.97, 40.78};
  geo::LocalProjection proj{origin};
  XY p = proj.to_metric({origin.lon, origin.lat + 0.001});
  CHECK(p.x == Catch::Approx(0.0).margin(1e-12));
  // meridian arc on the sphere: R * dlat
  double arc = geo::kEarthRadiusM * 0.001 * geo::kDegToRad;
  CHECK(p.y == Catch::Approx(arc).epsilon(1e-12));
  CHECK(p.y == Catch::Approx(111.19).epsilon(1e-4));
}

TEST_CASE("project/unproject round-trips within 1e-9 degrees", "[geo]") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> dlon(-0.05, 0.05), dlat(-0.05, 0.05);
  geo::LonLat origin{-73.97, 40.78};
  geo::LocalProjection proj{origin};
  for (int i = 0; i < 100; ++i) {
    geo::LonLat p{origin.lon + dlon(rng), origin.lat + dlat(rng)};
    geo::LonLat back = proj.to_geographic(proj.to_metric(p));
    CHECK(std::abs(back.lon - p.lon) < 1e-9);
    CHECK(std::abs(back.lat - p.lat) < 1e-9);
  }
}

TEST_CASE("projection rejects polygons far from the origin", "[geo]") {
  geo::GeoRing far{{0.0, 0.0}, {2.5, 0.0}, {0.0, 1.0}};
  CHECK_THROWS_AS(geo::to_local_metric(far, {0.0, 0.0}), DataError);
}

TEST_CASE("buffered unit square area matches the offset formula", "[geo]") {
  MetricRing square = geo::convex_hull({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  MetricRing buf = geo::buffer_convex(square, 1.0, 1024);
  double expected = 1.0 + 4.0 * 1.0 + std::numbers::pi;  // A + P*r + pi*r^2
  CHECK(geo::ring_area(buf) == Catch::Approx(expected).epsilon(1e-3));
}

TEST_CASE("vanishing radius reproduces the hull area", "[geo]") {
  MetricRing tri = geo::convex_hull({{0, 0}, {3, 0}, {0, 4}});
  MetricRing buf = geo::buffer_convex(tri, 1e-9, 64);
  CHECK(geo::ring_area(buf) == Catch::Approx(6.0).epsilon(1e-6));
}

TEST_CASE("3-4-5 triangle buffered by 2", "[geo]") {
  MetricRing tri = geo::convex_hull({{0, 0}, {3, 0}, {0, 4}});
  MetricRing buf = geo::buffer_convex(tri, 2.0, 1024);
  double expected = 6.0 + 12.0 * 2.0 + 4.0 * std::numbers::pi;
  CHECK(expected == Catch::Approx(42.566).epsilon(1e-4));
  CHECK(geo::ring_area(buf) == Catch::Approx(expected).epsilon(1e-3));
}

TEST_CASE("buffer area error obeys the arc-chord bound", "[geo]") {
  std::mt19937_64 rng(31);
  for (int segs : {16, 64, 256}) {
    for (int trial = 0; trial < 10; ++trial) {
      MetricRing hull = oracle::random_convex_hull(rng, 80.0);
      double r = 10.0;
      MetricRing buf = geo::buffer_convex(hull, r, segs);
      double a = geo::ring_area(hull);
      double p = geo::ring_perimeter(hull);
      double exact = a + p * r + std::numbers::pi * r * r;
      double rel = std::abs(geo::ring_area(buf) - exact) / exact;
      CHECK(rel < 10.0 / (double(segs) * segs));
    }
  }
}

TEST_CASE("larger radii strictly contain smaller buffers", "[geo]") {
  std::mt19937_64 rng(8);
  MetricRing hull = oracle::random_convex_hull(rng, 20.0);
  MetricRing inner = geo::buffer_convex(hull, 5.0, 64);
  MetricRing outer = geo::buffer_convex(hull, 9.0, 64);
  CHECK(geo::ring_area(outer) > geo::ring_area(inner));
  for (const XY& v : inner) CHECK(geo::point_in_ring(outer, v));
}

TEST_CASE("buffer contains every original vertex", "[geo]") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  std::vector<XY> pts;
  for (int i = 0; i < 40; ++i) pts.push_back({u(rng), u(rng)});
  MetricRing hull = geo::convex_hull(pts);
  MetricRing buf = geo::buffer_convex(hull, 3.0, 64);
  for (const XY& p : pts) CHECK(geo::point_in_ring(buf, p));
}

TEST_CASE("non-convex rings cannot be buffered", "[geo]") {
  MetricRing notch{{0, 0}, {4, 0}, {4, 4}, {2, 1}, {0, 4}};
  CHECK_THROWS_AS(geo::buffer_convex(notch, 1.0, 64), DataError);
}

TEST_CASE("ring cleaning drops duplicates and fixes winding", "[geo]") {
  MetricRing dirty{{0, 0}, {0, 1}, {0, 1}, {1, 1}, {1, 0}, {0, 0}};  // CW + dup + closed
  MetricRing clean = geo::clean_ring(dirty);
  REQUIRE(clean.size() == 4);
  CHECK(geo::signed_area(clean) > 0.0);
}

TEST_CASE("self-intersecting rings are rejected, not repaired", "[geo]") {
  MetricRing bowtie{{0, 0}, {2, 2}, {2, 0}, {0, 2}};
  CHECK_THROWS_AS(geo::clean_ring(bowtie), DataError);
}

TEST_CASE("capture region buffers the hull around the footprint", "[geo]") {
  geo::GeoRing footprint{{-73.9701, 40.7801}, {-73.9699, 40.7801}, {-73.9699, 40.7803},
                         {-73.9701, 40.7803}};
  geo::CaptureRegion region = geo::make_capture_region("1000010001", footprint, 100.0, 64);
  CHECK(region.buffer_radius == 100.0);
  CHECK(geo::is_convex_ccw(region.hull));
  CHECK(geo::ring_area(region.buffered) > geo::ring_area(region.hull));
  for (const XY& v : region.hull) CHECK(geo::point_in_ring(region.buffered, v));
}
