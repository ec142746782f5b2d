// Scaling-law fits of performance against model size.
//
//   POWER        perf = a * N^b        (least squares in log-log space)
//   SATURATING   perf = c - a * N^b    (nonlinear least squares)
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iclprobe/common.hpp"

namespace iclprobe::stats {

enum class ScalingForm { Power, Saturating };

inline std::string_view scaling_form_name(ScalingForm f) { return f == ScalingForm::Power ? "power" : "saturating"; }

struct ScalingFit {
  ScalingForm form = ScalingForm::Power;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;  // SATURATING only
  double r_squared = 0.0;
  int iterations = 0;

  double predict(double n) const {
    return form == ScalingForm::Power ? a * std::pow(n, b) : c - a * std::pow(n, b);
  }
};

struct SaturatingOptions {
  int max_iterations = 200;
  double b_min = -4.0;
  double b_max = 4.0;
  double tolerance = 1e-14;
};

namespace detail {

inline void check_scaling_input(std::span<const double> sizes, std::span<const double> perf) {
  if (sizes.size() != perf.size()) fail(ErrorCode::DimensionMismatch, "sizes and performance differ in length");
  if (sizes.size() < 3) fail(ErrorCode::InsufficientData, "scaling fit needs at least 3 points");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (!std::isfinite(sizes[i]) || !std::isfinite(perf[i])) fail(ErrorCode::NonFinite, "scaling input is not finite");
    if (sizes[i] <= 0.0) fail(ErrorCode::NonPositiveInput, "model sizes must be positive");
  }
}

inline double r_squared(std::span<const double> y, std::span<const double> fitted) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - fitted[i]) * (y[i] - fitted[i]);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
}

struct Projection {
  double c = 0.0;
  double a = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

/// Best (c, a) for a fixed exponent, by linear least squares.
inline Projection project(std::span<const double> x, std::span<const double> y, double b) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = -std::pow(x[static_cast<std::size_t>(i)], b);
    rhs(i) = y[static_cast<std::size_t>(i)];
  }
  auto qr = design.colPivHouseholderQr();
  if (qr.rank() < 2) return {};
  const Eigen::Vector2d coef = qr.solve(rhs);
  return {coef(0), coef(1), (design * coef - rhs).squaredNorm()};
}

}  // namespace detail

inline ScalingFit fit_power(std::span<const double> sizes, std::span<const double> perf) {
  detail::check_scaling_input(sizes, perf);
  const std::size_t n = sizes.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (perf[i] <= 0.0) fail(ErrorCode::NonPositiveInput, "power form needs positive performance");
    lx[i] = std::log(sizes[i]);
    ly[i] = std::log(perf[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) fail(ErrorCode::DegenerateVariance, "all model sizes are equal");
  ScalingFit fit;
  fit.form = ScalingForm::Power;
  fit.b = sxy / sxx;
  fit.a = std::exp(my - fit.b * mx);
  std::vector<double> fitted(n);
  for (std::size_t i = 0; i < n; ++i) fitted[i] = my + fit.b * (lx[i] - mx);
  fit.r_squared = detail::r_squared(ly, fitted);
  return fit;
}

/// Sizes are rescaled by their geometric mean so N^b stays well conditioned.
/// A grid over b seeds Gauss-Newton with backtracking on (c, a, b).
inline ScalingFit fit_saturating(std::span<const double> sizes, std::span<const double> perf,
                                 const SaturatingOptions& opt = {}) {
  detail::check_scaling_input(sizes, perf);
  const std::size_t n = sizes.size();
  double log_scale = 0.0;
  for (double s : sizes) log_scale += std::log(s);
  log_scale /= static_cast<double>(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(std::log(sizes[i]) - log_scale);

  ScalingFit fit;
  fit.form = ScalingForm::Saturating;
  const double first = perf[0];
  if (std::all_of(perf.begin(), perf.end(), [&](double v) { return v == first; })) {
    fit.c = first;
    fit.r_squared = 1.0;
    return fit;
  }

  double best_b = 0.0;
  detail::Projection best;
  constexpr int kGrid = 400;
  for (int g = 0; g <= kGrid; ++g) {
    const double b = opt.b_min + (opt.b_max - opt.b_min) * g / kGrid;
    if (b == 0.0) continue;
    const auto p = detail::project(x, perf, b);
    if (p.sse < best.sse) {
      best = p;
      best_b = b;
    }
  }
  if (!std::isfinite(best.sse)) fail(ErrorCode::Divergence, "no exponent gives a well-posed fit");

  Eigen::Vector3d theta(best.c, best.a, best_b);
  auto residuals = [&](const Eigen::Vector3d& th) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) r(static_cast<Eigen::Index>(i)) = th(0) - th(1) * std::pow(x[i], th(2)) - perf[i];
    return r;
  };
  Eigen::VectorXd r = residuals(theta);
  double sse = r.squaredNorm();
  double scale2 = 0.0;
  for (double v : perf) scale2 += v * v;
  bool converged = sse <= opt.tolerance * opt.tolerance * std::max(scale2, 1.0);
  int it = 0;
  while (!converged && it < opt.max_iterations) {
    ++it;
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::pow(x[i], theta(2));
      const auto row = static_cast<Eigen::Index>(i);
      jac(row, 0) = 1.0;
      jac(row, 1) = -p;
      jac(row, 2) = -theta(1) * p * std::log(x[i]);
    }
    const Eigen::Vector3d step = jac.colPivHouseholderQr().solve(-r);
    double lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      Eigen::Vector3d cand = theta + lambda * step;
      cand(2) = std::clamp(cand(2), opt.b_min, opt.b_max);
      const Eigen::VectorXd rc = residuals(cand);
      const double sc = rc.squaredNorm();
      if (std::isfinite(sc) && sc <= sse) {
        const double rel = (cand - theta).norm() / std::max(1.0, theta.norm());
        theta = cand;
        r = rc;
        const double drop = sse - sc;
        sse = sc;
        accepted = true;
        if (rel < 1e-15 || drop <= 1e-30 * std::max(scale2, 1.0) ||
            sse <= opt.tolerance * opt.tolerance * std::max(scale2, 1.0)) {
          converged = true;
        }
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) converged = true;  // no descent direction left: stationary point
  }
  if (!converged) {
    fail(ErrorCode::Divergence, "saturating fit did not converge in " + std::to_string(opt.max_iterations) +
                                    " iterations");
  }
  fit.c = theta(0);
  fit.a = theta(1) * std::exp(-theta(2) * log_scale);
  fit.b = theta(2);
  fit.iterations = it;
  std::vector<double> fitted(n);
  for (std::size_t i = 0; i < n; ++i) fitted[i] = theta(0) - theta(1) * std::pow(x[i], theta(2));
  fit.r_squared = detail::r_squared(perf, fitted);
  return fit;
}

inline ScalingFit fit_power_law(std::span<const double> sizes, std::span<const double> perf, ScalingForm form) {
  return form == ScalingForm::Power ? fit_power(sizes, perf) : fit_saturating(sizes, perf);
}

}  // namespace iclprobe::stats
