// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "scramflow/core/error.hpp"
#include "scramflow/opflow/opflow.hpp"

namespace scramflow::harness {

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased; 0 for n < 2
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Non-finite entries are ignored.
inline Moments moments(std::span<const double> xs) {
  std::vector<double> v;
  v.reserve(xs.size());
  for (double x : xs)
    if (std::isfinite(x)) v.push_back(x);
  Moments m;
  m.n = v.size();
  if (v.empty()) {
    m.mean = m.median = m.min = m.max = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  long double s = 0.0L;
  for (double x : v) s += x;
  m.mean = static_cast<double>(s / v.size());
  if (v.size() > 1) {
    long double q = 0.0L;
    for (double x : v) q += (x - m.mean) * (x - m.mean);
    m.variance = static_cast<double>(q / (v.size() - 1));
  }
  std::sort(v.begin(), v.end());
  m.min = v.front();
  m.max = v.back();
  const std::size_t h = v.size() / 2;
  m.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return m;
}

inline double median(std::span<const double> xs) { return moments(xs).median; }

/// Arithmetic mean of c over the grid points with t in [t_lo, t_hi].
inline double time_average(std::span<const double> t, std::span<const double> c, double t_lo = 50.0,
                           double t_hi = 1e3) {
  if (t.size() != c.size()) throw DimensionError("time and value arrays differ in length");
  if (!(t_hi > t_lo)) throw ConfigError("empty averaging window");
  long double s = 0.0L;
  std::size_t n = 0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] >= t_lo && t[k] <= t_hi) {
      s += c[k];
      ++n;
    }
  if (n == 0) throw ConfigError("averaging window lies outside the time grid");
  return static_cast<double>(s / n);
}

struct SizePoint {
  int L = 0;
  double value = 0.0;
  double sigma = 0.0;  // standard error; the fit is unweighted unless every point has sigma > 0
};

struct SizeFit {
  double intercept = 0.0;  // extrapolation to 1/L = 0
  double intercept_error = 0.0;
  double slope = 0.0;
  double slope_error = 0.0;
  double chi2 = 0.0;
  bool weighted = false;
};

/// Linear least squares of value against 1/L. With per-point sigmas the covariance is (XᵀWX)^-1;
/// without, it is scaled by the residual variance.
inline SizeFit finite_size_fit(std::span<const SizePoint> pts) {
  if (pts.size() < 3) throw FitError("finite-size fit needs at least 3 sizes");
  const auto n = static_cast<Eigen::Index>(pts.size());
  bool weighted = true;
  for (const auto& p : pts) {
    if (p.L <= 0) throw FitError("sizes must be positive");
    weighted = weighted && p.sigma > 0.0;
  }
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    X(k, 0) = 1.0;
    X(k, 1) = 1.0 / pts[k].L;
    y(k) = pts[k].value;
    w(k) = weighted ? 1.0 / (pts[k].sigma * pts[k].sigma) : 1.0;
  }
  const Eigen::Matrix2d a = X.transpose() * w.asDiagonal() * X;
  const double det = a.determinant();
  if (!(std::abs(det) > 1e-14 * std::max(1.0, a.cwiseAbs().maxCoeff() * a.cwiseAbs().maxCoeff())))
    throw FitError("finite-size fit has degenerate abscissae");
  const Eigen::Matrix2d cov0 = a.inverse();
  const Eigen::Vector2d beta = cov0 * (X.transpose() * w.asDiagonal() * y);
  const Eigen::VectorXd r = y - X * beta;
  SizeFit f;
  f.weighted = weighted;
  f.intercept = beta(0);
  f.slope = beta(1);
  f.chi2 = r.cwiseProduct(w).dot(r);
  const double scale = weighted ? 1.0 : (n > 2 ? f.chi2 / static_cast<double>(n - 2) : 0.0);
  f.intercept_error = std::sqrt(cov0(0, 0) * scale);
  f.slope_error = std::sqrt(cov0(1, 1) * scale);
  return f;
}

/// Returned by fit_localization_length when the interaction matrix carries no decay information.
inline constexpr double kUndefinedLength = std::numeric_limits<double>::quiet_NaN();

/// ξ from log|Δ_ij| ~ -|i-j|/ξ using the median |Δ| of each distance bin; entries below `floor` are
/// left out before taking the median.
inline double fit_localization_length(const Eigen::MatrixXd& delta, double floor = 1e-14) {
  const auto n = delta.rows();
  if (delta.cols() != n) throw DimensionError("interaction matrix must be square");
  std::vector<std::vector<double>> bins(static_cast<std::size_t>(std::max<Eigen::Index>(n, 1)));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double x = std::abs(delta(i, j));
      if (x >= floor) bins[static_cast<std::size_t>(j - i)].push_back(x);
    }
  std::vector<double> env(bins.size(), 0.0);
  for (std::size_t r = 1; r < bins.size(); ++r)
    if (!bins[r].empty()) env[r] = median(bins[r]);
  const double xi = fit_decay_length(env, floor);
  return std::isfinite(xi) ? xi : kUndefinedLength;
}

/// Least-squares slope of log y against log x.
inline double log_log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw FitError("log-log fit needs two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw FitError("log-log fit needs positive data");
    const double a = std::log(x[k]), b = std::log(y[k]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  const double m = static_cast<double>(x.size());
  const double den = m * sxx - sx * sx;
  if (den == 0.0) throw FitError("log-log fit has degenerate abscissae");
  return (m * sxy - sx * sy) / den;
}

}  // namespace scramflow::harness
