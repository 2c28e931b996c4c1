#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "emclim/util.hpp"

namespace emclim::stats {

enum class ColumnTransform { None, Centered, CenteredNormalized };

inline std::string to_string(ColumnTransform t) {
  switch (t) {
    case ColumnTransform::Centered: return "centered";
    case ColumnTransform::CenteredNormalized: return "centered_normalized";
    default: return "none";
  }
}

inline ColumnTransform transform_from_string(const std::string& s) {
  if (s == "none") return ColumnTransform::None;
  if (s == "centered") return ColumnTransform::Centered;
  if (s == "centered_normalized") return ColumnTransform::CenteredNormalized;
  throw ConfigError("unknown column transform: '" + s + "'");
}

// Feature columns only; the intercept is appended at fit time.
struct DesignMatrix {
  Eigen::MatrixXd x;  // N x M
  std::vector<std::string> names;
  ColumnTransform transform{ColumnTransform::None};
  Eigen::VectorXd col_means;  // recorded when transformed
  Eigen::VectorXd col_sds;    // sample (N-1) standard deviations

  long n() const { return x.rows(); }
  long m() const { return x.cols(); }
  int column(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return int(i);
    return -1;
  }
};

inline DesignMatrix transform_columns(const DesignMatrix& in, ColumnTransform mode) {
  if (in.n() < 2) throw DataError("column transform needs at least 2 rows");
  if (in.transform != ColumnTransform::None)
    throw DataError("design matrix is already transformed");
  DesignMatrix out = in;
  out.transform = mode;
  out.col_means = in.x.colwise().mean();
  out.col_sds.resize(in.m());
  for (long j = 0; j < in.m(); ++j) {
    double var = (in.x.col(j).array() - out.col_means[j]).square().sum() / double(in.n() - 1);
    out.col_sds[j] = std::sqrt(var);
    if (!(out.col_sds[j] > 0.0))
      throw NumericError("zero-variance column: '" + in.names[j] + "'");
  }
  for (long j = 0; j < in.m(); ++j) {
    out.x.col(j).array() -= out.col_means[j];
    if (mode == ColumnTransform::CenteredNormalized) out.x.col(j) /= out.col_sds[j];
  }
  return out;
}

struct RegressionResult {
  std::string target;
  std::vector<std::string> names;  // features, excluding the intercept
  // index 0 holds the intercept, then one entry per feature
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::VectorXd t;
  Eigen::VectorXd p;
  double r2{};
  double adj_r2{};
  double f_stat{};
  double f_p{};
  long df_model{};
  long df_resid{};
  long n{};
  double sigma{};  // residual standard error
  ColumnTransform transform{ColumnTransform::None};
  Eigen::VectorXd col_means;
  Eigen::VectorXd col_sds;

  double intercept() const { return beta[0]; }
  double slope(int j) const { return beta[j + 1]; }
  double slope(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return beta[long(i) + 1];
    throw DataError("no coefficient for column '" + name + "'");
  }
};

// Least squares via column-pivoted Householder QR, classical standard
// errors from sigma^2 (X'X)^-1.
inline RegressionResult fit_ols(const DesignMatrix& design, const Eigen::VectorXd& y,
                                const std::string& target = "") {
  const long n = design.n();
  const long m = design.m();
  if (y.size() != n) throw DataError("endogenous vector length does not match design matrix");
  if (n <= m + 1)
    throw DataError("not enough observations: N=" + std::to_string(n) +
                    " needs to exceed M+1=" + std::to_string(m + 1));
  for (long i = 0; i < n; ++i)
    if (!std::isfinite(y[i])) throw DataError("endogenous vector has non-finite entries");

  Eigen::MatrixXd x(n, m + 1);
  x.col(0).setOnes();
  if (m > 0) x.rightCols(m) = design.x;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < m + 1) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (long k = qr.rank(); k < m + 1; ++k) {
      long orig = perm[k];
      if (!cols.empty()) cols += ", ";
      cols += orig == 0 ? "(intercept)" : design.names[orig - 1];
    }
    throw NumericError("rank-deficient design matrix; dependent columns: " + cols);
  }

  RegressionResult res;
  res.target = target;
  res.names = design.names;
  res.transform = design.transform;
  res.col_means = design.col_means;
  res.col_sds = design.col_sds;
  res.n = n;
  res.df_model = m;
  res.df_resid = n - m - 1;

  res.beta = qr.solve(y);
  Eigen::VectorXd fitted = x * res.beta;
  Eigen::VectorXd resid = y - fitted;
  double rss = resid.squaredNorm();
  double ybar = y.mean();
  double tss = (y.array() - ybar).square().sum();

  double sigma2 = rss / double(res.df_resid);
  res.sigma = std::sqrt(sigma2);
  res.r2 = tss > 0.0 ? 1.0 - rss / tss : 0.0;
  res.r2 = std::clamp(res.r2, 0.0, 1.0);
  res.adj_r2 = 1.0 - (1.0 - res.r2) * double(n - 1) / double(res.df_resid);

  // (X'X)^-1 from the R factor: X P = Q R  =>  (X'X)^-1 = P R^-1 R^-T P'
  Eigen::MatrixXd r = qr.matrixR().topLeftCorner(m + 1, m + 1).triangularView<Eigen::Upper>();
  Eigen::MatrixXd rinv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(m + 1, m + 1));
  Eigen::MatrixXd cov_pivoted = rinv * rinv.transpose();
  const auto& perm = qr.colsPermutation().indices();
  Eigen::VectorXd xtx_inv_diag(m + 1);
  for (long k = 0; k < m + 1; ++k) xtx_inv_diag[perm[k]] = cov_pivoted(k, k);

  res.se.resize(m + 1);
  res.t.resize(m + 1);
  res.p.resize(m + 1);
  boost::math::students_t t_dist(double(res.df_resid));
  for (long j = 0; j < m + 1; ++j) {
    res.se[j] = std::sqrt(sigma2 * xtx_inv_diag[j]);
    if (res.se[j] > 0.0) {
      res.t[j] = res.beta[j] / res.se[j];
      res.p[j] = 2.0 * boost::math::cdf(boost::math::complement(t_dist, std::abs(res.t[j])));
    } else {
      res.t[j] = res.beta[j] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      res.p[j] = res.beta[j] == 0.0 ? 1.0 : 0.0;
    }
  }

  if (m == 0) {
    res.f_stat = 0.0;
    res.f_p = 1.0;
  } else if (res.r2 >= 1.0) {
    res.f_stat = std::numeric_limits<double>::infinity();
    res.f_p = 0.0;
  } else {
    res.f_stat = (res.r2 / double(m)) / ((1.0 - res.r2) / double(res.df_resid));
    boost::math::fisher_f f_dist(double(m), double(res.df_resid));
    res.f_p = boost::math::cdf(boost::math::complement(f_dist, res.f_stat));
  }
  return res;
}

// Variance inflation: 1 / (1 - R^2) of column j regressed on the others
// (with intercept). Perfect collinearity reports +inf.
inline double vif(const DesignMatrix& design, int column) {
  const long m = design.m();
  if (m < 2) throw DataError("VIF needs at least 2 columns");
  if (column < 0 || column >= m) throw DataError("VIF column index out of range");

  Eigen::MatrixXd x(design.n(), m);  // intercept + the other columns
  x.col(0).setOnes();
  long k = 1;
  for (long j = 0; j < m; ++j) {
    if (j == column) continue;
    x.col(k++) = design.x.col(j);
  }
  Eigen::VectorXd target = design.x.col(column);
  Eigen::VectorXd beta = x.colPivHouseholderQr().solve(target);
  double rss = (target - x * beta).squaredNorm();
  double tss = (target.array() - target.mean()).square().sum();
  if (tss <= 0.0) return std::numeric_limits<double>::infinity();
  double r2 = 1.0 - rss / tss;
  if (r2 >= 1.0 - 1e-12) return std::numeric_limits<double>::infinity();
  return 1.0 / (1.0 - std::max(0.0, r2));
}

struct VifRemoval {
  std::string column;
  double vif_at_removal{};
  int step{};
};

struct VifTable {
  std::map<std::string, double> final_vifs;
  std::vector<VifRemoval> history;
};

struct PruneResult {
  DesignMatrix design;
  VifTable table;
};

// Remove the worst column until every VIF clears the threshold. Ties fall
// to the lexicographically smallest name so reruns are identical.
inline PruneResult prune_by_vif(DesignMatrix design, double threshold = 5.0) {
  if (design.m() < 2) throw DataError("VIF pruning needs at least 2 columns");
  VifTable table;
  int step = 0;
  while (true) {
    std::vector<double> vifs(design.m());
    for (long j = 0; j < design.m(); ++j) vifs[j] = vif(design, int(j));
    long worst = 0;
    for (long j = 1; j < design.m(); ++j) {
      if (vifs[j] > vifs[worst] ||
          (vifs[j] == vifs[worst] && design.names[j] < design.names[worst]))
        worst = j;
    }
    if (vifs[worst] < threshold) {
      for (long j = 0; j < design.m(); ++j) table.final_vifs[design.names[j]] = vifs[j];
      break;
    }
    if (design.m() <= 2)
      throw DataError("VIF pruning would drop below 2 columns (over-pruned); last VIF " +
                      format_full(vifs[worst]) + " on '" + design.names[worst] + "'");
    table.history.push_back({design.names[worst], vifs[worst], step++});
    // erase column `worst`
    Eigen::MatrixXd reduced(design.x.rows(), design.x.cols() - 1);
    long k = 0;
    for (long j = 0; j < design.x.cols(); ++j) {
      if (j == worst) continue;
      reduced.col(k++) = design.x.col(j);
    }
    design.x = std::move(reduced);
    design.names.erase(design.names.begin() + worst);
    if (design.col_means.size() > worst) {
      // keep any recorded transform metadata aligned
      Eigen::VectorXd means(design.col_means.size() - 1), sds(design.col_sds.size() - 1);
      long km = 0;
      for (long j = 0; j < design.col_means.size(); ++j) {
        if (j == worst) continue;
        means[km] = design.col_means[j];
        sds[km] = design.col_sds[j];
        ++km;
      }
      design.col_means = std::move(means);
      design.col_sds = std::move(sds);
    }
  }
  return {std::move(design), std::move(table)};
}

// Multiplicative effect of a feature deviation under the log-linear model.
inline double percent_deviation(double beta_k, double x) {
  return 100.0 * (std::exp(beta_k * x) - 1.0);
}

inline double aggregate_deviation(std::span<const double> betas, std::span<const double> xs) {
  if (betas.size() != xs.size())
    throw DataError("aggregate_deviation: coefficient/value length mismatch");
  double exponent = 0.0;
  for (size_t i = 0; i < betas.size(); ++i) exponent += betas[i] * xs[i];
  return 100.0 * (std::exp(exponent) - 1.0);
}

inline std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

// 3 decimals, widened until a significant digit shows (0.00004-style).
inline std::string format_coefficient(double v) {
  if (v == 0.0) return "0.000";
  for (int d = 3; d <= 8; ++d) {
    std::string s = format_fixed(v, d);
    bool nonzero = s.find_first_of("123456789") != std::string::npos;
    if (nonzero) return s;
  }
  return format_fixed(v, 8);
}

inline nlohmann::json to_json(const RegressionResult& r) {
  auto vec = [](const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
  };
  return {
      {"target", r.target},
      {"columns", r.names},
      {"transform", to_string(r.transform)},
      {"beta", vec(r.beta)},
      {"se", vec(r.se)},
      {"t", vec(r.t)},
      {"p", vec(r.p)},
      {"r2", r.r2},
      {"adj_r2", r.adj_r2},
      {"f_stat", r.f_stat},
      {"f_p", r.f_p},
      {"df_model", r.df_model},
      {"df_resid", r.df_resid},
      {"n", r.n},
      {"sigma", r.sigma},
      {"col_means", vec(r.col_means)},
      {"col_sds", vec(r.col_sds)},
  };
}

inline RegressionResult result_from_json(const nlohmann::json& j) {
  auto vec = [](const nlohmann::json& a) {
    Eigen::VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[long(i)] = a[i].get<double>();
    return v;
  };
  RegressionResult r;
  r.target = j.value("target", "");
  r.names = j.at("columns").get<std::vector<std::string>>();
  r.transform = transform_from_string(j.at("transform").get<std::string>());
  r.beta = vec(j.at("beta"));
  r.se = vec(j.at("se"));
  r.t = vec(j.at("t"));
  r.p = vec(j.at("p"));
  r.r2 = j.at("r2").get<double>();
  r.adj_r2 = j.at("adj_r2").get<double>();
  r.f_stat = j.at("f_stat").get<double>();
  r.f_p = j.at("f_p").get<double>();
  r.df_model = j.at("df_model").get<long>();
  r.df_resid = j.at("df_resid").get<long>();
  r.n = j.at("n").get<long>();
  r.sigma = j.at("sigma").get<double>();
  r.col_means = vec(j.at("col_means"));
  r.col_sds = vec(j.at("col_sds"));
  return r;
}

// Aligned text table, one column per result, stars and parenthesized
// standard errors in the journal style.
inline std::string format_table(std::span<const RegressionResult> results) {
  if (results.empty()) return "";
  const auto& names = results.front().names;
  for (const auto& r : results)
    if (r.names != names) throw DataError("format_table: results have differing columns");

  std::vector<std::string> row_labels;
  for (const auto& n : names) row_labels.push_back(n);
  row_labels.push_back("Constant");

  auto entry = [](const RegressionResult& r, long j) {
    return format_coefficient(r.beta[j]) + significance_stars(r.p[j]) + " (" +
           format_coefficient(r.se[j]) + ")";
  };

  size_t label_w = 22;
  for (const auto& l : row_labels) label_w = std::max(label_w, l.size() + 2);
  std::vector<size_t> col_w(results.size());
  for (size_t c = 0; c < results.size(); ++c) {
    col_w[c] = std::max<size_t>(24, results[c].target.size() + 2);
    for (long j = 0; j < results[c].beta.size(); ++j)
      col_w[c] = std::max(col_w[c], entry(results[c], j).size() + 2);
  }

  std::ostringstream out;
  auto pad = [&](const std::string& s, size_t w) {
    out << s;
    for (size_t i = s.size(); i < w; ++i) out << ' ';
  };
  pad("", label_w);
  for (size_t c = 0; c < results.size(); ++c) pad(results[c].target, col_w[c]);
  out << "\n";
  std::string rule(label_w + std::accumulate(col_w.begin(), col_w.end(), size_t(0)), '-');
  out << rule << "\n";
  for (size_t row = 0; row < row_labels.size(); ++row) {
    pad(row_labels[row], label_w);
    for (size_t c = 0; c < results.size(); ++c) {
      long j = row + 1 < row_labels.size() ? long(row) + 1 : 0;  // Constant is index 0
      pad(entry(results[c], j), col_w[c]);
    }
    out << "\n";
  }
  out << rule << "\n";
  auto stat_row = [&](const std::string& label, auto fmt) {
    pad(label, label_w);
    for (size_t c = 0; c < results.size(); ++c) pad(fmt(results[c]), col_w[c]);
    out << "\n";
  };
  stat_row("Observations",
           [](const RegressionResult& r) { return group_thousands(std::to_string(r.n)); });
  stat_row("R2", [](const RegressionResult& r) { return format_fixed(r.r2, 3); });
  stat_row("Adjusted R2", [](const RegressionResult& r) { return format_fixed(r.adj_r2, 3); });
  stat_row("Residual Std. Error", [](const RegressionResult& r) {
    return format_fixed(r.sigma, 3) + " (df = " + std::to_string(r.df_resid) + ")";
  });
  stat_row("F Statistic", [](const RegressionResult& r) {
    return group_thousands(format_fixed(r.f_stat, 3)) + significance_stars(r.f_p) +
           " (df = " + std::to_string(r.df_model) + "; " + std::to_string(r.df_resid) + ")";
  });
  out << rule << "\n";
  pad("Note:", label_w);
  out << "*p<0.1; **p<0.05; ***p<0.01\n";
  return out.str();
}

}  // namespace emclim::stats
