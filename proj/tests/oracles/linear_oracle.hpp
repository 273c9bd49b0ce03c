#pragma once

// Test-only reference implementations. Deliberately plain: nested vectors,
// normal equations, Gauss-Jordan elimination with partial pivoting, and a
// Newton solver with Armijo backtracking for logistic regression. Nothing here
// shares code with the library's QR-based paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;
using Vector = std::vector<double>;

inline Vector solve(Matrix a, Vector b) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-300) throw std::runtime_error("oracle: singular system");
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return x;
}

inline Matrix inverse(const Matrix& a) {
  const std::size_t n = a.size();
  Matrix inv(n, Vector(n));
  for (std::size_t j = 0; j < n; ++j) {
    Vector e(n, 0.0);
    e[j] = 1.0;
    auto col = solve(a, e);
    for (std::size_t i = 0; i < n; ++i) inv[i][j] = col[i];
  }
  return inv;
}

// X^T W X and X^T v with optional weights.
inline Matrix gram(const Matrix& x, const Vector* w = nullptr) {
  const std::size_t n = x.size(), p = x[0].size();
  Matrix g(p, Vector(p, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b) g[a][b] += (w ? (*w)[i] : 1.0) * x[i][a] * x[i][b];
  return g;
}

inline Vector xt_v(const Matrix& x, const Vector& v) {
  Vector out(x[0].size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t a = 0; a < out.size(); ++a) out[a] += x[i][a] * v[i];
  return out;
}

struct OlsFit {
  Vector coef;
  Vector se;
  double rss = 0;
};

inline OlsFit ols_normal_equations(const Matrix& x, const Vector& y) {
  OlsFit fit;
  const auto g = gram(x);
  fit.coef = solve(g, xt_v(x, y));
  for (std::size_t i = 0; i < x.size(); ++i) {
    double fitted = 0;
    for (std::size_t a = 0; a < fit.coef.size(); ++a) fitted += x[i][a] * fit.coef[a];
    fit.rss += (y[i] - fitted) * (y[i] - fitted);
  }
  const double sigma2 = fit.rss / static_cast<double>(x.size() - x[0].size());
  const auto inv = inverse(g);
  for (std::size_t a = 0; a < fit.coef.size(); ++a) fit.se.push_back(std::sqrt(sigma2 * inv[a][a]));
  return fit;
}

inline double logistic_loglik(const Matrix& x, const Vector& y, const Vector& beta) {
  double ll = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double eta = 0;
    for (std::size_t a = 0; a < beta.size(); ++a) eta += x[i][a] * beta[a];
    ll += y[i] * eta - std::log1p(std::exp(eta));
  }
  return ll;
}

struct LogitFit {
  Vector coef;
  Vector se;
  int iterations = 0;
};

// Newton-Raphson on the log-likelihood with Armijo backtracking.
inline LogitFit logistic_newton(const Matrix& x, const Vector& y) {
  const std::size_t p = x[0].size();
  Vector beta(p, 0.0);
  LogitFit fit;
  for (int iter = 0; iter < 200; ++iter) {
    Vector mu(x.size()), w(x.size()), resid(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      double eta = 0;
      for (std::size_t a = 0; a < p; ++a) eta += x[i][a] * beta[a];
      mu[i] = 1.0 / (1.0 + std::exp(-eta));
      w[i] = mu[i] * (1.0 - mu[i]);
      resid[i] = y[i] - mu[i];
    }
    const Vector grad = xt_v(x, resid);
    const Vector dir = solve(gram(x, &w), grad);
    const double ll0 = logistic_loglik(x, y, beta);
    double slope = 0;
    for (std::size_t a = 0; a < p; ++a) slope += grad[a] * dir[a];
    double step = 1.0;
    Vector next(p);
    for (int k = 0; k < 60; ++k) {
      for (std::size_t a = 0; a < p; ++a) next[a] = beta[a] + step * dir[a];
      if (logistic_loglik(x, y, next) >= ll0 + 1e-4 * step * slope) break;
      step *= 0.5;
    }
    double change = 0;
    for (std::size_t a = 0; a < p; ++a) change = std::max(change, std::fabs(next[a] - beta[a]));
    beta = next;
    fit.iterations = iter + 1;
    if (change < 1e-12) break;
  }
  Vector w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double eta = 0;
    for (std::size_t a = 0; a < p; ++a) eta += x[i][a] * beta[a];
    const double mu = 1.0 / (1.0 + std::exp(-eta));
    w[i] = mu * (1.0 - mu);
  }
  const auto inv = inverse(gram(x, &w));
  for (std::size_t a = 0; a < p; ++a) fit.se.push_back(std::sqrt(inv[a][a]));
  fit.coef = beta;
  return fit;
}

}  // namespace oracle
