#pragma once

// Independent reference implementations used to cross-check the library.
// These deliberately avoid the code paths they validate.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "emclim/geometry.hpp"
#include "emclim/grid.hpp"

namespace oracle {

// ----- extended-precision normal equations -------------------------------

struct OlsOracle {
  std::vector<double> beta;  // [0] = intercept
  std::vector<double> se;
  double r2{};
  double f_stat{};
  double sigma{};
};

// beta = (X'X)^-1 X'y computed in long double with hand-rolled Gauss-Jordan;
// no shared code with the QR path under test.
inline OlsOracle ols_normal_equations(const Eigen::MatrixXd& features, const Eigen::VectorXd& y) {
  const long n = features.rows();
  const long m = features.cols() + 1;  // + intercept
  std::vector<std::vector<long double>> x(n, std::vector<long double>(m));
  for (long i = 0; i < n; ++i) {
    x[i][0] = 1.0L;
    for (long j = 1; j < m; ++j) x[i][j] = static_cast<long double>(features(i, j - 1));
  }

  std::vector<std::vector<long double>> xtx(m, std::vector<long double>(m, 0.0L));
  std::vector<long double> xty(m, 0.0L);
  for (long i = 0; i < n; ++i) {
    for (long a = 0; a < m; ++a) {
      xty[a] += x[i][a] * static_cast<long double>(y[i]);
      for (long b = 0; b < m; ++b) xtx[a][b] += x[i][a] * x[i][b];
    }
  }

  // Gauss-Jordan inverse with partial pivoting
  std::vector<std::vector<long double>> inv(m, std::vector<long double>(m, 0.0L));
  for (long i = 0; i < m; ++i) inv[i][i] = 1.0L;
  auto a = xtx;
  for (long col = 0; col < m; ++col) {
    long pivot = col;
    for (long r = col + 1; r < m; ++r)
      if (std::abs((double)a[r][col]) > std::abs((double)a[pivot][col])) pivot = r;
    std::swap(a[pivot], a[col]);
    std::swap(inv[pivot], inv[col]);
    long double p = a[col][col];
    for (long c = 0; c < m; ++c) {
      a[col][c] /= p;
      inv[col][c] /= p;
    }
    for (long r = 0; r < m; ++r) {
      if (r == col) continue;
      long double f = a[r][col];
      for (long c = 0; c < m; ++c) {
        a[r][c] -= f * a[col][c];
        inv[r][c] -= f * inv[col][c];
      }
    }
  }

  OlsOracle out;
  out.beta.resize(m);
  for (long j = 0; j < m; ++j) {
    long double b = 0.0L;
    for (long k = 0; k < m; ++k) b += inv[j][k] * xty[k];
    out.beta[j] = double(b);
  }

  long double rss = 0.0L, ybar = 0.0L;
  for (long i = 0; i < n; ++i) ybar += y[i];
  ybar /= n;
  long double tss = 0.0L;
  for (long i = 0; i < n; ++i) {
    long double fit = 0.0L;
    for (long j = 0; j < m; ++j) fit += x[i][j] * static_cast<long double>(out.beta[j]);
    long double r = static_cast<long double>(y[i]) - fit;
    rss += r * r;
    tss += (static_cast<long double>(y[i]) - ybar) * (static_cast<long double>(y[i]) - ybar);
  }
  long df = n - m;
  long double sigma2 = rss / df;
  out.sigma = double(sqrtl(sigma2));
  out.se.resize(m);
  for (long j = 0; j < m; ++j) out.se[j] = double(sqrtl(sigma2 * inv[j][j]));
  out.r2 = double(1.0L - rss / tss);
  long double r2l = 1.0L - rss / tss;
  out.f_stat = double((r2l / (m - 1)) / ((1.0L - r2l) / df));
  return out;
}

// ----- adjusted Rand index ------------------------------------------------

inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const size_t n = a.size();
  std::map<std::pair<int, int>, long> joint;
  std::map<int, long> ca, cb;
  for (size_t i = 0; i < n; ++i) {
    ++joint[{a[i], b[i]}];
    ++ca[a[i]];
    ++cb[b[i]];
  }
  auto choose2 = [](long x) { return double(x) * double(x - 1) / 2.0; };
  double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [k, v] : joint) sum_joint += choose2(v);
  for (const auto& [k, v] : ca) sum_a += choose2(v);
  for (const auto& [k, v] : cb) sum_b += choose2(v);
  double total = choose2(long(n));
  double expected = sum_a * sum_b / total;
  double maximum = 0.5 * (sum_a + sum_b);
  if (maximum == expected) return 1.0;
  return (sum_joint - expected) / (maximum - expected);
}

// ----- Monte-Carlo zonal mean ---------------------------------------------

struct McZonal {
  double mean{};
  double standard_error{};
  long inside{};
};

// Uniform rejection sampling over the region's bounding box; cell lookup by
// point location, valid cells only.
inline McZonal mc_zonal_mean(const emclim::raster::RasterGrid& grid,
                             const emclim::geo::MetricRing& region, long samples,
                             std::uint64_t seed) {
  double bx0 = region[0].x, bx1 = region[0].x, by0 = region[0].y, by1 = region[0].y;
  for (const auto& p : region) {
    bx0 = std::min(bx0, p.x);
    bx1 = std::max(bx1, p.x);
    by0 = std::min(by0, p.y);
    by1 = std::max(by1, p.y);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(bx0, bx1), uy(by0, by1);
  double sum = 0.0, sumsq = 0.0;
  long inside = 0;
  for (long s = 0; s < samples; ++s) {
    emclim::geo::XY p{ux(rng), uy(rng)};
    if (!emclim::geo::point_in_ring(region, p)) continue;
    int c = int(std::floor((p.x - grid.xll) / grid.cell_size));
    int r = int(std::floor((p.y - grid.yll) / grid.cell_size));
    if (c < 0 || c >= grid.ncols || r < 0 || r >= grid.nrows) continue;
    double v = grid.at(c, r);
    if (grid.is_nodata(v)) continue;
    sum += v;
    sumsq += v * v;
    ++inside;
  }
  McZonal out;
  out.inside = inside;
  if (inside > 1) {
    out.mean = sum / inside;
    double var = (sumsq - sum * sum / inside) / (inside - 1);
    out.standard_error = std::sqrt(std::max(0.0, var) / inside);
  }
  return out;
}

// ----- misc generators ------------------------------------------------------

inline emclim::geo::MetricRing random_convex_hull(std::mt19937_64& rng, double scale,
                                                  int points = 24) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<emclim::geo::XY> pts;
  for (int i = 0; i < points; ++i) pts.push_back({u(rng), u(rng)});
  return emclim::geo::convex_hull(pts);
}

}  // namespace oracle
