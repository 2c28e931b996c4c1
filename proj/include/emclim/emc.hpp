#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "emclim/regression.hpp"
#include "emclim/timeutil.hpp"
#include "emclim/util.hpp"

namespace emclim::emc {

struct RowKey {
  std::string bbl;
  std::string bin;
  YearMonth month;
  auto operator<=>(const RowKey&) const = default;
};

// Per-row additive decomposition of the regression prediction:
// a_ij = x_ij * beta_j, so intercept + row sum reproduces the fit.
struct ContributionMatrix {
  Eigen::MatrixXd a;  // N x M over retained columns
  std::vector<std::string> names;
  std::vector<std::string> excluded;
  std::vector<RowKey> keys;
  double intercept{};
};

inline ContributionMatrix contribution_matrix(const stats::DesignMatrix& design,
                                              const stats::RegressionResult& fit,
                                              const std::vector<std::string>& excluded,
                                              std::vector<RowKey> keys) {
  if (design.names != fit.names)
    throw DataError("contribution_matrix: design and fit columns differ");
  if (!keys.empty() && long(keys.size()) != design.n())
    throw DataError("contribution_matrix: row key count does not match matrix rows");
  for (const auto& name : excluded)
    if (design.column(name) < 0)
      throw DataError("contribution_matrix: excluded column '" + name + "' is not in the design");

  std::set<std::string> drop(excluded.begin(), excluded.end());
  ContributionMatrix out;
  out.excluded = excluded;
  out.keys = std::move(keys);
  out.intercept = fit.intercept();
  long kept = 0;
  for (const auto& name : design.names)
    if (!drop.count(name)) ++kept;
  out.a.resize(design.n(), kept);
  long k = 0;
  for (long j = 0; j < design.m(); ++j) {
    if (drop.count(design.names[j])) continue;
    out.names.push_back(design.names[j]);
    out.a.col(k++) = design.x.col(j) * fit.slope(int(j));
  }
  return out;
}

enum class Covariance { Diagonal, Full };

inline std::string to_string(Covariance c) {
  return c == Covariance::Full ? "full" : "diagonal";
}

inline Covariance covariance_from_string(const std::string& s) {
  if (s == "diagonal") return Covariance::Diagonal;
  if (s == "full") return Covariance::Full;
  throw ConfigError("unknown covariance type: '" + s + "'");
}

struct GmmConfig {
  int k{10};
  std::uint64_t seed{0};
  int max_iter{500};
  double tol{1e-6};  // relative log-likelihood improvement
  Covariance covariance{Covariance::Diagonal};
  double floor_scale{1e-6};  // of per-column variance
};

// Mixture fitted in an internally standardized space; means/covariances are
// reported back in contribution units.
struct EmcModel {
  int k{};
  Covariance covariance{Covariance::Diagonal};
  std::uint64_t seed{};
  std::vector<std::string> names;
  Eigen::VectorXd weights;                  // K
  Eigen::MatrixXd means_std;                // K x M, standardized space
  std::vector<Eigen::MatrixXd> covs_std;    // K of M x M
  Eigen::VectorXd std_means;                // standardizer
  Eigen::VectorXd std_sds;
  std::vector<double> loglik;               // per-iteration, standardized space

  long dims() const { return means_std.cols(); }

  // centroid in contribution units
  Eigen::MatrixXd means() const {
    Eigen::MatrixXd m = means_std;
    for (long j = 0; j < m.cols(); ++j)
      m.col(j) = (m.col(j).array() * std_sds[j] + std_means[j]).matrix();
    return m;
  }
  std::vector<Eigen::MatrixXd> covariances() const {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(covs_std.size());
    for (const auto& c : covs_std) {
      Eigen::MatrixXd s = c;
      for (long i = 0; i < s.rows(); ++i)
        for (long j = 0; j < s.cols(); ++j) s(i, j) *= std_sds[i] * std_sds[j];
      out.push_back(std::move(s));
    }
    return out;
  }
};

namespace detail {

// fully specified uniform in [0,1); avoids library-defined distributions
inline double next_uniform(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

inline Eigen::MatrixXd standardize(const Eigen::MatrixXd& a, Eigen::VectorXd& means,
                                   Eigen::VectorXd& sds) {
  means = a.colwise().mean();
  sds.resize(a.cols());
  for (long j = 0; j < a.cols(); ++j) {
    double var = (a.col(j).array() - means[j]).square().sum() / double(std::max<long>(1, a.rows() - 1));
    sds[j] = var > 0.0 ? std::sqrt(var) : 1.0;  // constant columns pass through unscaled
  }
  Eigen::MatrixXd z = a;
  for (long j = 0; j < a.cols(); ++j) z.col(j) = ((z.col(j).array() - means[j]) / sds[j]).matrix();
  return z;
}

inline std::vector<long> kmeanspp_centers(const Eigen::MatrixXd& z, int k, std::mt19937_64& rng) {
  const long n = z.rows();
  std::vector<long> centers;
  centers.push_back(long(rng() % std::uint64_t(n)));
  Eigen::VectorXd d2 = (z.rowwise() - z.row(centers[0])).rowwise().squaredNorm();
  while (int(centers.size()) < k) {
    double total = d2.sum();
    long pick;
    if (total <= 0.0) {
      pick = long(rng() % std::uint64_t(n));  // all remaining points coincide
    } else {
      double target = next_uniform(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (long i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(pick);
    Eigen::VectorXd nd = (z.rowwise() - z.row(pick)).rowwise().squaredNorm();
    d2 = d2.cwiseMin(nd);
  }
  return centers;
}

// log N(x; mu, Sigma) for one component over all rows
inline Eigen::VectorXd log_density(const Eigen::MatrixXd& z, const Eigen::VectorXd& mu,
                                   const Eigen::MatrixXd& cov, Covariance type) {
  const long n = z.rows();
  const long m = z.cols();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  if (type == Covariance::Diagonal) {
    Eigen::VectorXd var = cov.diagonal();
    double logdet = var.array().log().sum();
    Eigen::VectorXd out(n);
    for (long i = 0; i < n; ++i) {
      double q = 0.0;
      for (long j = 0; j < m; ++j) {
        double d = z(i, j) - mu[j];
        q += d * d / var[j];
      }
      out[i] = -0.5 * (q + logdet + m * log2pi);
    }
    return out;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("component covariance is not positive definite");
  double logdet = 0.0;
  for (long j = 0; j < m; ++j) logdet += 2.0 * std::log(llt.matrixL()(j, j));
  Eigen::VectorXd out(n);
  for (long i = 0; i < n; ++i) {
    Eigen::VectorXd d = z.row(i).transpose() - mu;
    Eigen::VectorXd w = llt.matrixL().solve(d);
    out[i] = -0.5 * (w.squaredNorm() + logdet + m * log2pi);
  }
  return out;
}

struct EmOutcome {
  bool collapsed{};
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;
  std::vector<Eigen::MatrixXd> covs;
  std::vector<double> loglik;
};

inline EmOutcome run_em(const Eigen::MatrixXd& z, const GmmConfig& cfg, std::uint64_t seed) {
  const long n = z.rows();
  const long m = z.cols();
  const int k = cfg.k;
  std::mt19937_64 rng(seed);

  EmOutcome st;
  std::vector<long> centers = kmeanspp_centers(z, k, rng);

  // hard assignment to the seeded centers bootstraps the parameters
  std::vector<int> label(n);
  for (long i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      double d = (z.row(i) - z.row(centers[c])).squaredNorm();
      if (d < best) {
        best = d;
        label[i] = c;
      }
    }
  }
  st.weights.resize(k);
  st.means.resize(k, m);
  st.covs.assign(k, Eigen::MatrixXd::Zero(m, m));
  const double floor = cfg.floor_scale;  // columns are unit variance here
  for (int c = 0; c < k; ++c) {
    long count = 0;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);
    for (long i = 0; i < n; ++i)
      if (label[i] == c) {
        mu += z.row(i).transpose();
        ++count;
      }
    if (count == 0) {
      st.weights[c] = 1.0 / double(n);
      st.means.row(c) = z.row(centers[c]);
      st.covs[c] = Eigen::MatrixXd::Identity(m, m);
      continue;
    }
    mu /= double(count);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
    for (long i = 0; i < n; ++i)
      if (label[i] == c) {
        Eigen::VectorXd d = z.row(i).transpose() - mu;
        if (cfg.covariance == Covariance::Full)
          cov += d * d.transpose();
        else
          cov.diagonal() += d.cwiseProduct(d);
      }
    cov /= double(count);
    cov.diagonal().array() += floor;
    st.weights[c] = double(count) / double(n);
    st.means.row(c) = mu.transpose();
    st.covs[c] = cov;
  }
  st.weights /= st.weights.sum();

  Eigen::MatrixXd logp(n, k);
  Eigen::MatrixXd resp(n, k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    // E step
    for (int c = 0; c < k; ++c)
      logp.col(c) = log_density(z, st.means.row(c).transpose(), st.covs[c], cfg.covariance)
                        .array() +
                    std::log(st.weights[c]);
    double ll = 0.0;
    for (long i = 0; i < n; ++i) {
      double mx = logp.row(i).maxCoeff();
      double sum = 0.0;
      for (int c = 0; c < k; ++c) sum += std::exp(logp(i, c) - mx);
      double lse = mx + std::log(sum);
      ll += lse;
      for (int c = 0; c < k; ++c) resp(i, c) = std::exp(logp(i, c) - lse);
    }
    if (!std::isfinite(ll)) {
      st.collapsed = true;
      return st;
    }
    if (!st.loglik.empty() && ll < prev_ll - 1e-9)
      throw NumericError("EM log-likelihood decreased: " + format_full(prev_ll) + " -> " +
                         format_full(ll));
    st.loglik.push_back(ll);
    bool converged = iter > 0 && (ll - prev_ll) < cfg.tol * std::abs(prev_ll);
    prev_ll = ll;
    if (converged) break;

    // M step
    for (int c = 0; c < k; ++c) {
      double nk = resp.col(c).sum();
      if (!(nk > 1e-10)) {
        st.collapsed = true;
        return st;
      }
      st.weights[c] = nk / double(n);
      Eigen::VectorXd mu = (resp.col(c).transpose() * z).transpose() / nk;
      st.means.row(c) = mu.transpose();
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
      for (long i = 0; i < n; ++i) {
        Eigen::VectorXd d = z.row(i).transpose() - mu;
        if (cfg.covariance == Covariance::Full)
          cov += resp(i, c) * (d * d.transpose());
        else
          cov.diagonal() += resp(i, c) * d.cwiseProduct(d);
      }
      cov /= nk;
      cov.diagonal().array() += floor;
      st.covs[c] = cov;
    }
  }
  return st;
}

}  // namespace detail

inline EmcModel gmm_fit(const ContributionMatrix& a, const GmmConfig& cfg) {
  if (a.a.rows() <= cfg.k)
    throw DataError("gmm_fit: need more rows than components (N=" + std::to_string(a.a.rows()) +
                    ", K=" + std::to_string(cfg.k) + ")");
  if (cfg.k < 1) throw ConfigError("gmm_fit: K must be at least 1");

  EmcModel model;
  model.k = cfg.k;
  model.covariance = cfg.covariance;
  model.seed = cfg.seed;
  model.names = a.names;
  Eigen::MatrixXd z = detail::standardize(a.a, model.std_means, model.std_sds);

  detail::EmOutcome st = detail::run_em(z, cfg, cfg.seed);
  if (st.collapsed) {
    st = detail::run_em(z, cfg, cfg.seed + 1);  // single re-seed
    if (st.collapsed)
      throw NumericError("gmm_fit: component collapsed twice; reduce K or change covariance");
  }
  model.weights = st.weights;
  model.means_std = st.means;
  model.covs_std = st.covs;
  model.loglik = st.loglik;
  return model;
}

struct Assignment {
  std::vector<RowKey> keys;
  std::vector<int> labels;   // argmax responsibility, ties to the lowest k
  Eigen::MatrixXd resp;      // N x K
};

inline Assignment assign(const EmcModel& model, const ContributionMatrix& a) {
  if (a.a.cols() != model.dims() || a.names != model.names)
    throw DataError("assign: contribution columns do not match the fitted model");
  const long n = a.a.rows();
  Eigen::MatrixXd z = a.a;
  for (long j = 0; j < z.cols(); ++j)
    z.col(j) = ((z.col(j).array() - model.std_means[j]) / model.std_sds[j]).matrix();

  Assignment out;
  out.keys = a.keys;
  out.labels.resize(n);
  out.resp.resize(n, model.k);
  Eigen::MatrixXd logp(n, model.k);
  for (int c = 0; c < model.k; ++c)
    logp.col(c) =
        detail::log_density(z, model.means_std.row(c).transpose(), model.covs_std[c],
                            model.covariance)
            .array() +
        std::log(model.weights[c]);
  for (long i = 0; i < n; ++i) {
    double mx = logp.row(i).maxCoeff();
    double sum = 0.0;
    for (int c = 0; c < model.k; ++c) sum += std::exp(logp(i, c) - mx);
    double lse = mx + std::log(sum);
    int best = 0;
    for (int c = 0; c < model.k; ++c) {
      out.resp(i, c) = std::exp(logp(i, c) - lse);
      if (out.resp(i, c) > out.resp(i, best)) best = c;
    }
    out.labels[i] = best;
  }
  return out;
}

// How many distinct microclimates each building occupies across its months.
inline std::map<std::pair<std::string, std::string>, int> unique_microclimate_count(
    const Assignment& assignment) {
  if (assignment.keys.size() != assignment.labels.size())
    throw DataError("unique_microclimate_count: assignment has no row keys");
  std::map<std::pair<std::string, std::string>, std::set<int>> seen;
  for (size_t i = 0; i < assignment.labels.size(); ++i) {
    const RowKey& k = assignment.keys[i];
    seen[{k.bbl, k.bin}].insert(assignment.labels[i]);
  }
  std::map<std::pair<std::string, std::string>, int> out;
  for (const auto& [key, labels] : seen) out[key] = int(labels.size());
  return out;
}

struct CentroidSummary {
  std::vector<std::string> feature_names;
  Eigen::MatrixXd centroids;    // features x K, contribution units
  Eigen::MatrixXd normalized;   // per-row min-max to [0,1]; constant rows 0.5
  Eigen::VectorXd deviation_pct;  // 100*(exp(sum_j mu_kj)-1) per cluster
};

inline CentroidSummary centroid_summary(const EmcModel& model) {
  CentroidSummary out;
  out.feature_names = model.names;
  Eigen::MatrixXd mu = model.means();  // K x M
  out.centroids = mu.transpose();
  out.normalized.resize(mu.cols(), mu.rows());
  for (long j = 0; j < mu.cols(); ++j) {
    double lo = mu.col(j).minCoeff();
    double hi = mu.col(j).maxCoeff();
    for (long c = 0; c < mu.rows(); ++c)
      out.normalized(j, c) = hi > lo ? (mu(c, j) - lo) / (hi - lo) : 0.5;
  }
  out.deviation_pct.resize(mu.rows());
  for (long c = 0; c < mu.rows(); ++c)
    out.deviation_pct[c] = 100.0 * (std::exp(mu.row(c).sum()) - 1.0);
  return out;
}

inline nlohmann::json to_json(const EmcModel& m) {
  auto vec = [](const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
  };
  auto mat = [](const Eigen::MatrixXd& x) {
    nlohmann::json rows = nlohmann::json::array();
    for (long i = 0; i < x.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (long j = 0; j < x.cols(); ++j) row.push_back(x(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  nlohmann::json covs = nlohmann::json::array();
  for (const auto& c : m.covs_std) covs.push_back(mat(c));
  return {
      {"k", m.k},
      {"covariance", to_string(m.covariance)},
      {"seed", m.seed},
      {"columns", m.names},
      {"weights", vec(m.weights)},
      {"means_std", mat(m.means_std)},
      {"covs_std", covs},
      {"std_means", vec(m.std_means)},
      {"std_sds", vec(m.std_sds)},
      {"loglik", m.loglik},
  };
}

inline EmcModel model_from_json(const nlohmann::json& j) {
  auto vec = [](const nlohmann::json& a) {
    Eigen::VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[long(i)] = a[i].get<double>();
    return v;
  };
  auto mat = [](const nlohmann::json& rows) {
    Eigen::MatrixXd x(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (size_t i = 0; i < rows.size(); ++i)
      for (size_t jj = 0; jj < rows[i].size(); ++jj) x(long(i), long(jj)) = rows[i][jj].get<double>();
    return x;
  };
  EmcModel m;
  m.k = j.at("k").get<int>();
  m.covariance = covariance_from_string(j.at("covariance").get<std::string>());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.names = j.at("columns").get<std::vector<std::string>>();
  m.weights = vec(j.at("weights"));
  m.means_std = mat(j.at("means_std"));
  for (const auto& c : j.at("covs_std")) m.covs_std.push_back(mat(c));
  m.std_means = vec(j.at("std_means"));
  m.std_sds = vec(j.at("std_sds"));
  m.loglik = j.at("loglik").get<std::vector<double>>();
  return m;
}

inline void write_assignments_csv(const Assignment& a, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write assignments: " + path.string());
  out << "bbl,bin,month,label";
  for (long c = 0; c < a.resp.cols(); ++c) out << ",resp_" << c;
  out << "\n";
  for (size_t i = 0; i < a.labels.size(); ++i) {
    const RowKey& k = a.keys[i];
    out << k.bbl << ',' << k.bin << ',' << to_string(k.month) << ',' << a.labels[i];
    for (long c = 0; c < a.resp.cols(); ++c) out << ',' << format_full(a.resp(long(i), c));
    out << "\n";
  }
}

// Heatmap-shaped CSV: one row per feature, one column per cluster, plus the
// per-cluster aggregate percent deviation as a footer row.
inline void write_centroid_csv(const CentroidSummary& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write centroid summary: " + path.string());
  out << "feature";
  for (long c = 0; c < s.normalized.cols(); ++c) out << ",cluster_" << c;
  out << "\n";
  for (size_t j = 0; j < s.feature_names.size(); ++j) {
    out << s.feature_names[j];
    for (long c = 0; c < s.normalized.cols(); ++c)
      out << ',' << format_full(s.normalized(long(j), c));
    out << "\n";
  }
  out << "pct_deviation";
  for (long c = 0; c < s.deviation_pct.size(); ++c) out << ',' << format_full(s.deviation_pct[c]);
  out << "\n";
}

}  // namespace emclim::emc
