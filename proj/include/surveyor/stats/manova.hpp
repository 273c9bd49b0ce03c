#pragma once

// One-way multivariate linear model test: Y = XB + E, testing a subset of the
// columns of X (for the temperature sweep, the single slope column).

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "surveyor/error.hpp"
#include "surveyor/stats/distributions.hpp"
#include "surveyor/stats/regression.hpp"

namespace surveyor::stats {

struct ManovaResult {
  double wilks_lambda = 1;
  double pillai = 0;
  // Rao's F approximation for Wilks' lambda.
  double f_approx = 0;
  double df1 = 0;
  double df2 = 0;
  double p = 1;
  // Pillai's trace F approximation.
  double pillai_f = 0;
  double pillai_df1 = 0;
  double pillai_df2 = 0;
  double pillai_p = 1;
  std::size_t n = 0;          // complete-case rows used
  std::size_t dependents = 0; // columns of Y after dropping constants
  std::vector<std::string> dropped_columns;
  std::vector<std::string> warnings;
};

namespace detail {

inline Eigen::MatrixXd residual_sscp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                     const std::vector<std::string>& terms) {
  auto qr = checked_qr(x, terms);
  const Eigen::MatrixXd resid = y - x * qr.solve(y);
  return resid.transpose() * resid;
}

inline double log_det_spd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  bool singular = llt.info() != Eigen::Success;
  // pivot^2 relative to the column's own sum of squares; near-zero means a
  // dependent column is (numerically) a linear combination of the others
  for (Eigen::Index j = 0; j < m.rows() && !singular; ++j) {
    const double l = llt.matrixLLT()(j, j);
    singular = !(l > 0) || l * l <= kRankTolerance * m(j, j);
  }
  if (singular) throw DegenerateDataError(std::string("manova: ") + what + " SSCP matrix is singular");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

/// Tests the design columns listed in `tested` jointly across all columns of
/// `y`. Rows of `y` with any NA are dropped (complete cases); constant
/// columns are dropped with a warning.
inline ManovaResult manova(const Eigen::MatrixXd& y, const std::vector<std::string>& labels, const Design& design,
                           const std::vector<Eigen::Index>& tested) {
  if (y.rows() != design.rows()) throw ContractViolation("manova: Y and design row counts differ");
  if (static_cast<std::size_t>(y.cols()) != labels.size()) throw ContractViolation("manova: label count mismatch");
  if (tested.empty()) throw ContractViolation("manova: no tested columns");

  ManovaResult res;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    if (y.row(i).allFinite() && design.x.row(i).allFinite()) rows.push_back(i);
  if (rows.size() < static_cast<std::size_t>(y.rows()))
    res.warnings.push_back(std::to_string(static_cast<std::size_t>(y.rows()) - rows.size()) +
                           " incomplete row(s) dropped");

  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    bool constant = true;
    for (std::size_t k = 1; k < rows.size() && constant; ++k) constant = y(rows[k], j) == y(rows[0], j);
    if (constant) {
      res.dropped_columns.push_back(labels[static_cast<std::size_t>(j)]);
      res.warnings.push_back("constant column '" + labels[static_cast<std::size_t>(j)] + "' dropped");
    } else {
      cols.push_back(j);
    }
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(cols.size());
  if (m == 0) throw DegenerateDataError("manova: every dependent column is constant");
  if (n <= m + 1 || n <= design.cols())
    throw InsufficientDataError("manova: " + std::to_string(n) + " complete rows for " + std::to_string(m) +
                                " dependent columns");

  Eigen::MatrixXd yy(n, m);
  Eigen::MatrixXd xf(n, design.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) yy(i, j) = y(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    xf.row(i) = design.x.row(rows[static_cast<std::size_t>(i)]);
  }
  std::vector<Eigen::Index> kept;
  std::vector<std::string> kept_terms;
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    if (std::find(tested.begin(), tested.end(), j) == tested.end()) {
      kept.push_back(j);
      kept_terms.push_back(design.terms[static_cast<std::size_t>(j)]);
    }
  }
  Eigen::MatrixXd xr(n, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) xr.col(static_cast<Eigen::Index>(k)) = xf.col(kept[k]);

  const Eigen::MatrixXd e = detail::residual_sscp(xf, yy, design.terms);
  const Eigen::MatrixXd total = kept.empty() ? Eigen::MatrixXd(yy.transpose() * yy)
                                             : detail::residual_sscp(xr, yy, kept_terms);
  const Eigen::MatrixXd h = total - e;

  const double log_det_e = detail::log_det_spd(e, "error");
  const double log_det_t = detail::log_det_spd(total, "hypothesis + error");
  res.n = static_cast<std::size_t>(n);
  res.dependents = static_cast<std::size_t>(m);
  res.wilks_lambda = std::exp(log_det_e - log_det_t);

  Eigen::LLT<Eigen::MatrixXd> llt(total);
  res.pillai = llt.solve(h).trace();

  const double pp = static_cast<double>(m);
  const double q = static_cast<double>(tested.size());
  const double ve = static_cast<double>(n - design.cols());

  // Rao's F for Wilks' lambda.
  const double a = pp * pp + q * q - 5.0;
  const double t = a > 0 ? std::sqrt((pp * pp * q * q - 4.0) / a) : 1.0;
  const double mm = ve - (pp - q + 1.0) / 2.0;
  res.df1 = pp * q;
  res.df2 = mm * t - pp * q / 2.0 + 1.0;
  const double root = std::pow(res.wilks_lambda, 1.0 / t);
  res.f_approx = (1.0 - root) / root * res.df2 / res.df1;
  res.p = res.df2 > 0 ? f_sf(res.f_approx, res.df1, res.df2) : kNA;

  // Pillai's trace F.
  const double s = std::min(pp, q);
  const double mp = (std::fabs(pp - q) - 1.0) / 2.0;
  const double np = (ve - pp - 1.0) / 2.0;
  res.pillai_df1 = s * (2.0 * mp + s + 1.0);
  res.pillai_df2 = s * (2.0 * np + s + 1.0);
  res.pillai_f = res.pillai_df2 / res.pillai_df1 * res.pillai / (s - res.pillai);
  res.pillai_p = res.pillai_df2 > 0 ? f_sf(res.pillai_f, res.pillai_df1, res.pillai_df2) : kNA;
  return res;
}

/// MANOVA of Y on a single continuous predictor (intercept + slope; slope tested).
inline ManovaResult manova(const Eigen::MatrixXd& y, const std::vector<std::string>& labels,
                           std::span<const double> predictor, const std::string& predictor_name = "x") {
  const Design d = design_with_intercept({predictor}, {predictor_name});
  return manova(y, labels, d, {1});
}

}  // namespace surveyor::stats
