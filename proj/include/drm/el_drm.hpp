#pragma once

#include <Eigen/Core>
#include <vector>

#include "drm/multisample.hpp"

namespace drm {

// Free DRM parameters; population 0 is pinned at (0, 0).
struct DrmParams {
  Eigen::VectorXd alpha;  // length m
  Eigen::MatrixXd beta;   // m x d

  int m() const { return static_cast<int>(alpha.size()); }
  int d() const { return static_cast<int>(beta.cols()); }
};

// Profile log empirical likelihood
//   l(a, b) = -sum_i log{ sum_r n_r exp(a_r + b_r . q(x_i)) }
//             + sum_i (a_{k(i)} + b_{k(i)} . q(x_i)),
// where k(i) is the population that contributed point i. `basis` holds
// q(x_i) by rows; `pop` labels each row. The grouped overloads assume the
// rows are ordered population by population (n_0 rows, then n_1, ...).
double profile_loglik(const DrmParams& params, const Eigen::MatrixXd& basis,
                      const std::vector<int>& pop, const Eigen::VectorXd& counts);
double profile_loglik(const DrmParams& params, const Eigen::MatrixXd& basis_grouped,
                      const Eigen::VectorXd& counts);

// Exact gradient, laid out as m blocks of (alpha_r, beta_r1..beta_rd).
Eigen::VectorXd profile_grad(const DrmParams& params, const Eigen::MatrixXd& basis,
                             const std::vector<int>& pop, const Eigen::VectorXd& counts);
Eigen::VectorXd profile_grad(const DrmParams& params, const Eigen::MatrixXd& basis_grouped,
                             const Eigen::VectorXd& counts);

// A maximized DRM fit on the pooled support.
struct DrmFit {
  DrmParams params;
  Eigen::ArrayXd pooled_points;   // sorted, length N
  std::vector<int> pop;           // population per pooled point
  Eigen::VectorXd counts;         // n_0..n_m
  Eigen::MatrixXd basis_values;   // N x d at the pooled points
  Eigen::ArrayXd weights;         // fitted p_i, one per pooled point
  Eigen::MatrixXd tilt;           // N x (m+1): exp(alpha_r + beta_r . q(x_i))
  Eigen::MatrixXd cdf_steps;      // N x (m+1): prefix sums of p_i * tilt

  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;            // sup-norm at the reported optimum
  double constraint_residual = 0.0;  // max_r |sum_i p_i tilt_{r,i} - 1|

  int num_populations() const { return static_cast<int>(counts.size()); }

  // Fitted distribution G_r evaluated at x (right-continuous step fn).
  double cdf(int r, double x) const;
};

// Maximizes the profile log-EL by damped Newton ascent with Armijo
// backtracking from the zero start. The basis is standardized internally
// for conditioning; reported parameters and diagnostics refer to the
// basis as given.
DrmFit fit_drm(const MultiSample& ms, const PooledEmpirical& pooled,
               const Eigen::MatrixXd& basis_at_pooled);

double fitted_cdf(const DrmFit& fit, int r, double x);

}  // namespace drm
