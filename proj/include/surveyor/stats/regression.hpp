#pragma once

// Linear and logistic regression. Linear solves go through column-pivoted
// Householder QR; the pivoting also tells us which columns are linearly
// dependent when a design is rank deficient.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surveyor/error.hpp"
#include "surveyor/stats/descriptive.hpp"
#include "surveyor/stats/distributions.hpp"

namespace surveyor::stats {

// Relative pivot threshold below which a column counts as dependent.
inline constexpr double kRankTolerance = 1e-9;

struct Design {
  Eigen::MatrixXd x;
  std::vector<std::string> terms;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
};

/// Intercept column followed by the given predictors.
inline Design design_with_intercept(const std::vector<std::span<const double>>& predictors,
                                    const std::vector<std::string>& names) {
  if (predictors.size() != names.size()) throw ContractViolation("design: predictor/name count mismatch");
  const Eigen::Index n = predictors.empty() ? 0 : static_cast<Eigen::Index>(predictors.front().size());
  Design d;
  d.x.resize(n, static_cast<Eigen::Index>(predictors.size()) + 1);
  d.x.col(0).setOnes();
  d.terms.push_back("(Intercept)");
  for (std::size_t j = 0; j < predictors.size(); ++j) {
    if (static_cast<Eigen::Index>(predictors[j].size()) != n) throw ContractViolation("design: ragged predictors");
    for (Eigen::Index i = 0; i < n; ++i) d.x(i, static_cast<Eigen::Index>(j) + 1) = predictors[j][static_cast<std::size_t>(i)];
    d.terms.push_back(names[j]);
  }
  return d;
}

inline Design intercept_only(Eigen::Index n) {
  Design d;
  d.x = Eigen::MatrixXd::Ones(n, 1);
  d.terms = {"(Intercept)"};
  return d;
}

struct RegressionResult {
  std::vector<std::string> terms;
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  Eigen::VectorXd stat;  // t (OLS) or z (logistic); NaN where se == 0
  Eigen::VectorXd p;     // two-sided; NaN where stat is undefined
  std::size_t n = 0;
  long df_resid = 0;
  // OLS only
  std::optional<double> r_squared;
  std::optional<double> sigma;
  std::optional<double> f_statistic;  // all non-intercept terms jointly
  std::optional<double> f_df1;
  std::optional<double> f_df2;
  std::optional<double> f_p;
  // logistic only
  bool converged = true;
  int iterations = 0;
  std::vector<double> log_likelihood_trace;
  std::vector<std::string> warnings;

  Eigen::Index index_of(const std::string& term) const {
    auto it = std::find(terms.begin(), terms.end(), term);
    if (it == terms.end()) throw ContractViolation("regression: no term '" + term + "'");
    return static_cast<Eigen::Index>(it - terms.begin());
  }
  double coefficient(const std::string& term) const { return coef(index_of(term)); }
  double std_error(const std::string& term) const { return se(index_of(term)); }
  double statistic(const std::string& term) const { return stat(index_of(term)); }
  double p_value(const std::string& term) const { return p(index_of(term)); }
};

namespace detail {

inline bool has_intercept(const Eigen::MatrixXd& x) {
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    if (x.rows() > 0 && (x.col(j).array() == x(0, j)).all() && x(0, j) != 0) return true;
  return false;
}

inline std::string join_terms(const std::vector<std::string>& terms, const std::vector<Eigen::Index>& idx) {
  std::string out;
  for (auto i : idx) out += (out.empty() ? "" : ", ") + terms[static_cast<std::size_t>(i)];
  return out;
}

inline Eigen::ColPivHouseholderQR<Eigen::MatrixXd> checked_qr(const Eigen::MatrixXd& x,
                                                              const std::vector<std::string>& terms) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(kRankTolerance);
  const Eigen::Index rank = qr.rank();
  if (rank < x.cols()) {
    std::vector<Eigen::Index> dependent;
    for (Eigen::Index k = rank; k < x.cols(); ++k) dependent.push_back(qr.colsPermutation().indices()(k));
    std::sort(dependent.begin(), dependent.end());
    throw SingularDesignError("singular design: column(s) " + join_terms(terms, dependent) +
                              " are linearly dependent on the others");
  }
  return qr;
}

// (X'X)^-1 from a full-rank pivoted QR: P R^-1 R^-T P^T.
inline Eigen::MatrixXd unscaled_covariance(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
  const Eigen::Index p = qr.cols();
  Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  Eigen::MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd prinv = qr.colsPermutation() * rinv;
  return prinv * prinv.transpose();
}

inline void check_shapes(const Eigen::VectorXd& y, const Design& d) {
  if (y.size() != d.rows()) throw ContractViolation("regression: y and design row counts differ");
  if (static_cast<std::size_t>(d.cols()) != d.terms.size())
    throw ContractViolation("regression: design column/term count mismatch");
  if (!y.allFinite() || !d.x.allFinite()) throw ContractViolation("regression: inputs contain NA or infinite values");
  if (y.size() <= d.cols())
    throw InsufficientDataError("regression needs more observations (" + std::to_string(y.size()) +
                                ") than terms (" + std::to_string(d.cols()) + ")");
}

}  // namespace detail

/// Ordinary least squares with classical standard errors and t tests.
inline RegressionResult ols(const Eigen::VectorXd& y, const Design& d) {
  detail::check_shapes(y, d);
  auto qr = detail::checked_qr(d.x, d.terms);
  const auto n = y.size();
  const auto p = d.cols();

  RegressionResult res;
  res.terms = d.terms;
  res.n = static_cast<std::size_t>(n);
  res.df_resid = static_cast<long>(n - p);
  res.coef = qr.solve(y);
  const Eigen::VectorXd resid = y - d.x * res.coef;
  const double rss = resid.squaredNorm();
  const double sigma2 = rss / static_cast<double>(res.df_resid);
  res.sigma = std::sqrt(sigma2);
  const Eigen::MatrixXd cov = detail::unscaled_covariance(qr) * sigma2;
  res.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  res.stat.resize(p);
  res.p.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (res.se(j) > 0) {
      res.stat(j) = res.coef(j) / res.se(j);
      res.p(j) = student_t_two_sided(res.stat(j), static_cast<double>(res.df_resid));
    } else {
      res.stat(j) = kNA;
      res.p(j) = kNA;
    }
  }

  const bool intercept = detail::has_intercept(d.x);
  const double ybar = intercept ? y.mean() : 0.0;
  const double tss = (y.array() - ybar).square().sum();
  if (tss > 0) res.r_squared = 1.0 - rss / tss;
  const long df_model = static_cast<long>(p) - (intercept ? 1 : 0);
  if (df_model > 0 && rss > 0) {
    res.f_df1 = static_cast<double>(df_model);
    res.f_df2 = static_cast<double>(res.df_resid);
    res.f_statistic = ((tss - rss) / *res.f_df1) / sigma2;
    res.f_p = f_sf(*res.f_statistic, *res.f_df1, *res.f_df2);
  }
  return res;
}

struct LogisticOptions {
  int max_iterations = 50;
  double tolerance = 1e-8;     // on max |delta beta|
  double divergence = 30.0;    // |beta| past this signals separation
  double weight_floor = 1e-10; // all-but-vanishing IRLS weights signal separation
};

namespace detail {

inline double log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double ll = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // log(1 + exp(eta)) evaluated without overflow.
    const double softplus = eta(i) > 0 ? eta(i) + std::log1p(std::exp(-eta(i))) : std::log1p(std::exp(eta(i)));
    ll += y(i) * eta(i) - softplus;
  }
  return ll;
}

inline Eigen::VectorXd inverse_logit(const Eigen::VectorXd& eta) {
  Eigen::VectorXd mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    mu(i) = eta(i) >= 0 ? 1.0 / (1.0 + std::exp(-eta(i))) : std::exp(eta(i)) / (1.0 + std::exp(eta(i)));
  return mu;
}

}  // namespace detail

/// Logistic regression by iteratively reweighted least squares.
///
/// Each step solves the weighted least-squares problem with QR and halves the
/// step while the log-likelihood would decrease. Separation (diverging
/// coefficients or collapsing weights) is reported via `converged == false`
/// and a warning rather than an exception.
inline RegressionResult logistic(const Eigen::VectorXd& y, const Design& d, const LogisticOptions& opt = {}) {
  detail::check_shapes(y, d);
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) != 0.0 && y(i) != 1.0) throw ContractViolation("logistic: response must be 0/1");
  detail::checked_qr(d.x, d.terms);

  const auto n = y.size();
  const auto p = d.cols();
  RegressionResult res;
  res.terms = d.terms;
  res.n = static_cast<std::size_t>(n);
  res.df_resid = static_cast<long>(n - p);
  res.converged = false;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = d.x * beta;
  double ll = detail::log_likelihood(y, eta);
  res.log_likelihood_trace.push_back(ll);
  bool separated = false;

  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    res.iterations = iter;
    const Eigen::VectorXd mu = detail::inverse_logit(eta);
    Eigen::VectorXd sw(n);
    Eigen::Index collapsed = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = mu(i) * (1.0 - mu(i));
      if (w < opt.weight_floor) ++collapsed;
      sw(i) = std::sqrt(std::max(w, opt.weight_floor));
    }
    if (collapsed == n) {
      separated = true;
      break;
    }
    const Eigen::MatrixXd wx = sw.asDiagonal() * d.x;
    const Eigen::VectorXd rhs = (y - mu).cwiseQuotient(sw);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wx);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < p) {
      separated = true;
      break;
    }
    Eigen::VectorXd step = qr.solve(rhs);

    // Step halving keeps the log-likelihood monotone.
    Eigen::VectorXd candidate = beta + step;
    Eigen::VectorXd cand_eta = d.x * candidate;
    double cand_ll = detail::log_likelihood(y, cand_eta);
    for (int h = 0; h < 30 && !(cand_ll >= ll); ++h) {
      step *= 0.5;
      candidate = beta + step;
      cand_eta = d.x * candidate;
      cand_ll = detail::log_likelihood(y, cand_eta);
    }
    if (!(cand_ll >= ll)) {
      // No ascent direction left at machine precision: we are at the optimum.
      res.converged = true;
      break;
    }
    beta = candidate;
    eta = cand_eta;
    ll = cand_ll;
    res.log_likelihood_trace.push_back(ll);
    if (beta.cwiseAbs().maxCoeff() > opt.divergence) {
      separated = true;
      break;
    }
    if (step.cwiseAbs().maxCoeff() < opt.tolerance) {
      res.converged = true;
      break;
    }
  }
  if (separated) {
    res.converged = false;
    res.warnings.push_back("complete or quasi-complete separation: coefficients diverge, estimates unreliable");
  } else if (!res.converged) {
    res.warnings.push_back("IRLS did not converge in " + std::to_string(opt.max_iterations) + " iterations");
  }

  res.coef = beta;
  const Eigen::VectorXd mu = detail::inverse_logit(eta);
  Eigen::VectorXd sw(n);
  for (Eigen::Index i = 0; i < n; ++i) sw(i) = std::sqrt(std::max(mu(i) * (1.0 - mu(i)), 0.0));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sw.asDiagonal() * d.x);
  qr.setThreshold(kRankTolerance);
  res.se.resize(p);
  res.stat.resize(p);
  res.p.resize(p);
  if (qr.rank() == p) {
    res.se = detail::unscaled_covariance(qr).diagonal().cwiseMax(0.0).cwiseSqrt();
  } else {
    res.se.setConstant(kNA);
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    if (res.se(j) > 0) {
      res.stat(j) = res.coef(j) / res.se(j);
      res.p(j) = normal_two_sided(res.stat(j));
    } else {
      res.stat(j) = kNA;
      res.p(j) = kNA;
    }
  }
  return res;
}

}  // namespace surveyor::stats
