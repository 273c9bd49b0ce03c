#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "surveyor/error.hpp"
#include "surveyor/stats/descriptive.hpp"
#include "surveyor/stats/distributions.hpp"

namespace surveyor::stats {

// Pearson correlations with pairwise deletion. The diagonal of `r` holds each
// column's sample variance rather than 1; entries that cannot be computed are
// NaN.
struct CorrelationMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd r;
  Eigen::MatrixXd p;                                       // diagonal NaN
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> n;   // pairwise complete counts
};

inline std::string_view significance_stars(double p) {
  if (std::isnan(p)) return "";
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

/// Two-sided p-value of a Pearson r over n pairs.
inline double correlation_p_value(double r, long n) {
  if (std::isnan(r) || n < 3) return kNA;
  if (std::fabs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = r * std::sqrt(df / (1.0 - r * r));
  return student_t_two_sided(t, df);
}

inline CorrelationMatrix pearson_matrix(const Eigen::MatrixXd& y, std::vector<std::string> labels) {
  if (static_cast<std::size_t>(y.cols()) != labels.size()) throw ContractViolation("pearson_matrix: label count mismatch");
  const Eigen::Index k = y.cols();
  CorrelationMatrix cm;
  cm.labels = std::move(labels);
  cm.r = Eigen::MatrixXd::Constant(k, k, kNA);
  cm.p = Eigen::MatrixXd::Constant(k, k, kNA);
  cm.n.setZero(k, k);

  for (Eigen::Index a = 0; a < k; ++a) {
    std::vector<double> col;
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      if (!is_na(y(i, a))) col.push_back(y(i, a));
    cm.n(a, a) = static_cast<long>(col.size());
    if (col.size() >= 2) cm.r(a, a) = variance_of(col, mean_of(col));
  }

  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a + 1; b < k; ++b) {
      std::vector<double> xa, xb;
      for (Eigen::Index i = 0; i < y.rows(); ++i) {
        if (is_na(y(i, a)) || is_na(y(i, b))) continue;
        xa.push_back(y(i, a));
        xb.push_back(y(i, b));
      }
      const long n = static_cast<long>(xa.size());
      cm.n(a, b) = cm.n(b, a) = n;
      if (n < 3) continue;
      const double ma = mean_of(xa), mb = mean_of(xb);
      double sab = 0, saa = 0, sbb = 0;
      for (std::size_t i = 0; i < xa.size(); ++i) {
        const double da = xa[i] - ma, db = xb[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
      }
      if (saa <= 0 || sbb <= 0) continue;
      const double r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
      cm.r(a, b) = cm.r(b, a) = r;
      cm.p(a, b) = cm.p(b, a) = correlation_p_value(r, n);
    }
  }
  return cm;
}

}  // namespace surveyor::stats
