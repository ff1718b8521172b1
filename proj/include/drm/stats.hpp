#pragma once

#include <Eigen/Core>
#include <functional>

namespace drm {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

double norm_pdf(double x);
double norm_cdf(double x);
// Inverse standard normal CDF, |error| < 1e-13 over (0,1).
double norm_quantile(double p);

// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
double gamma_cdf(double x, double shape, double scale);
double gamma_quantile(double p, double shape, double scale);

// Sample standard deviation with divisor n-1.
double sample_sd(const Eigen::ArrayXd& x);

// Type-7 quantile (linear interpolation at position 1 + (n-1)p) on an
// ascending-sorted vector.
double quantile_type7(const Eigen::ArrayXd& sorted, double p);

// Type-1 quantile: inf{t : F_n(t) >= tau}.
double quantile_type1(const Eigen::ArrayXd& sorted, double tau);

// Weighted analogues on an ascending-sorted support. Weights must be
// positive; they are normalized internally. Both reduce to their
// unweighted counterparts at uniform weights.
double weighted_mean(const Eigen::ArrayXd& points, const Eigen::ArrayXd& weights);
// Frequency-corrected spread: sum w (x-mu)^2 / (1 - sum w^2).
double weighted_sd(const Eigen::ArrayXd& points, const Eigen::ArrayXd& weights);
double weighted_quantile_type7(const Eigen::ArrayXd& sorted,
                               const Eigen::ArrayXd& weights, double p);

// Adaptive Simpson quadrature to absolute tolerance `tol`.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol);

// Solves f(x) = target for increasing f on [lo, hi], bisected to
// interval width `tol`.
double bisect_increasing(const std::function<double(double)>& f, double lo,
                         double hi, double target, double tol = 1e-10);

}  // namespace drm
