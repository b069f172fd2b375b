// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Dormand-Prince 5(4) embedded pair with first-same-as-last reuse, the
// standard mixed absolute/relative RMS error norm, a PI step controller and an
// optional integrating-factor (Lawson) form for stiff linear decay.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <array>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "scramflow/core/error.hpp"

namespace scramflow {

struct Rk45Options {
  double rtol = 1e-6;
  double atol = 1e-8;
  double initial_step = 1e-3;
  double min_step = 1e-14;
  double max_step = std::numeric_limits<double>::infinity();
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;
  double pi_beta = 0.04;  // error-history weight of the PI controller; 0 gives the plain controller
};

template <class T>
class DormandPrince {
 public:
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using Rhs = std::function<void(double l, const Vec& y, Vec& dy)>;

  struct Step {
    bool accepted = false;
    double h = 0.0;          // step attempted
    double error_norm = 0.0;  // scaled RMS error estimate
  };

  DormandPrince(Rhs f, Rk45Options opt) : f_(std::move(f)), opt_(opt), h_(opt.initial_step) {}

  /// Start (or restart) from (l, y); discards the cached derivative.
  void reset(double l, const Vec& y) {
    l_ = l;
    y_ = y;
    have_k1_ = false;
    err_old_ = 1e-4;
  }

  /// The right-hand side changed between steps; the cached first stage is recomputed.
  void invalidate_derivative() { have_k1_ = false; }

  double l() const { return l_; }
  const Vec& y() const { return y_; }
  double step_size() const { return h_; }
  void set_step_size(double h) { h_ = std::clamp(h, opt_.min_step, opt_.max_step); }
  const Rk45Options& options() const { return opt_; }

  /// Attempt one step, never crossing `l_limit`. Updates the state only on acceptance.
  /// Non-finite trial states count as rejections; a step below min_step raises.
  ///
  /// With `rates` (one non-negative ω per component, frozen over the step) the step is taken in
  /// integrating-factor form: the tableau is applied to v = e^{ωτ} y, which removes the stiffness
  /// of y' = -ω y + N(y) while solving the same equation.
  Step attempt(double l_limit, const Vec* rates = nullptr) {
    static constexpr double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
    static constexpr double a[7][6] = {
        {},
        {1.0 / 5},
        {3.0 / 40, 9.0 / 40},
        {44.0 / 45, -56.0 / 15, 32.0 / 9},
        {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
        {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
        {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
    };
    static constexpr double e[7] = {71.0 / 57600, 0.0, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200, 22.0 / 525,
                                    -1.0 / 40};

    if (!have_k1_) {
      k_[0].resize(y_.size());
      f_(l_, y_, k_[0]);
      have_k1_ = true;
    }
    const double h = std::min(h_, l_limit - l_);
    if (!(h > 0.0))
      throw ConfigError("integration interval is empty (l = " + std::to_string(l_) + ", limit = " + std::to_string(l_limit) + ", h = " + std::to_string(h_) + ")");
    const T th = static_cast<T>(h);
    const bool lawson = rates != nullptr;
    if (lawson && rates->size() != y_.size()) throw DimensionError("rate vector size differs from the state");

    // decay(x) = e^{-ω x h}, cached per distinct offset.
    auto decay = [&](double x) -> const Vec& {
      for (auto& [key, v] : decay_cache_)
        if (key == x) return v;
      decay_cache_.emplace_back(x, (-(*rates) * static_cast<T>(x * h)).array().exp().matrix());
      return decay_cache_.back().second;
    };
    decay_cache_.clear();
    // Integrating-factor stage derivative N = f + ω y.
    auto n_of = [&](int m) -> const Vec& {
      if (!lawson) return k_[m];
      nk_[m] = k_[m] + rates->cwiseProduct(stage_y_[m]);
      return nk_[m];
    };
    if (lawson) stage_y_[0] = y_;

    for (int j = 1; j < 7; ++j) {
      if (lawson) {
        tmp_ = decay(c[j]).cwiseProduct(y_);
        for (int m = 0; m < j; ++m)
          if (a[j][m] != 0.0)
            tmp_ += (th * static_cast<T>(a[j][m])) * decay(c[j] - c[m]).cwiseProduct(n_of(m));
      } else {
        tmp_ = y_;
        for (int m = 0; m < j; ++m)
          if (a[j][m] != 0.0) tmp_ += (th * static_cast<T>(a[j][m])) * k_[m];
      }
      if (j == 6) ynew_ = tmp_;
      if (lawson) stage_y_[j] = tmp_;
      k_[j].resize(y_.size());
      f_(l_ + c[j] * h, j == 6 ? ynew_ : tmp_, k_[j]);
    }
    err_ = Vec::Zero(y_.size());
    for (int m = 0; m < 7; ++m) {
      if (e[m] == 0.0) continue;
      if (lawson)
        err_ += (th * static_cast<T>(e[m])) * decay(1.0 - c[m]).cwiseProduct(n_of(m));
      else
        err_ += (th * static_cast<T>(e[m])) * k_[m];
    }

    long double acc = 0.0L;
    bool finite = true;
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      const double yi = static_cast<double>(y_(i)), yn = static_cast<double>(ynew_(i));
      if (!std::isfinite(yn)) {
        finite = false;
        break;
      }
      const double sc = opt_.atol + opt_.rtol * std::max(std::abs(yi), std::abs(yn));
      const double r = static_cast<double>(err_(i)) / sc;
      acc += static_cast<long double>(r) * r;
    }
    const double err = finite ? std::sqrt(static_cast<double>(acc / std::max<Eigen::Index>(1, y_.size())))
                              : std::numeric_limits<double>::infinity();

    Step s;
    s.h = h;
    s.error_norm = err;
    if (err <= 1.0) {
      s.accepted = true;
      l_ += h;
      y_.swap(ynew_);
      k_[0].swap(k_[6]);
      const double fac =
          err == 0.0 ? opt_.max_factor
                     : std::clamp(opt_.safety * std::pow(err, -(0.2 - 0.75 * opt_.pi_beta)) *
                                      std::pow(err_old_, opt_.pi_beta),
                                  opt_.min_factor, rejected_last_ ? 1.0 : opt_.max_factor);
      err_old_ = std::max(err, 1e-4);
      // A step clipped by l_limit does not shrink the proposal.
      const double proposal = h < h_ ? std::max(h_, h * fac) : h * fac;
      h_ = std::clamp(proposal, opt_.min_step, opt_.max_step);
      rejected_last_ = false;
    } else {
      const double fac = std::isfinite(err) ? std::max(opt_.min_factor, opt_.safety * std::pow(err, -0.2))
                                            : opt_.min_factor;
      h_ = h * fac;
      rejected_last_ = true;
      if (h_ < opt_.min_step) throw Error("step size underflow at l = " + std::to_string(l_));
    }
    return s;
  }

 private:
  Rhs f_;
  Rk45Options opt_;
  double h_;
  double l_ = 0.0;
  bool have_k1_ = false;
  bool rejected_last_ = false;
  double err_old_ = 1e-4;
  Vec y_, ynew_, tmp_, err_;
  std::array<Vec, 7> k_, nk_, stage_y_;
  std::vector<std::pair<double, Vec>> decay_cache_;
};

}  // namespace scramflow
