#include "drm/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "drm/errors.hpp"
#include "drm/kde.hpp"
#include "drm/stats.hpp"

namespace drm {

namespace {

void check_level(double tau, const char* op) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw UsageError(op, "quantile level must lie in (0,1)");
  }
}

void check_pop(const DrmFit& fit, int r, const char* op) {
  if (r < 0 || r >= fit.num_populations()) {
    throw UsageError(op, "population index out of range");
  }
}

Eigen::ArrayXd fitted_point_weights(const DrmFit& fit, int r) {
  return fit.weights * fit.tilt.col(r).array();
}

}  // namespace

double drm_quantile(const DrmFit& fit, int r, double tau) {
  check_level(tau, "estimators.drm_quantile");
  check_pop(fit, r, "estimators.drm_quantile");
  const auto n = fit.pooled_points.size();
  const double* col = fit.cdf_steps.col(r).data();
  const double* it = std::lower_bound(col, col + n, tau);
  const Eigen::Index idx = std::min<Eigen::Index>(it - col, n - 1);
  return fit.pooled_points[idx];
}

double empirical_quantile(const Eigen::ArrayXd& sample, double tau) {
  check_level(tau, "estimators.empirical_quantile");
  Eigen::ArrayXd sorted = sample;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  return quantile_type1(sorted, tau);
}

double drm_density_bandwidth(const DrmFit& fit, int r) {
  check_pop(fit, r, "estimators.drm_density");
  const Eigen::ArrayXd w = fitted_point_weights(fit, r);
  return weighted_silverman_bandwidth(fit.pooled_points, w,
                                      static_cast<Eigen::Index>(fit.counts[r]));
}

double drm_density(const DrmFit& fit, int r, double x) {
  const double h = drm_density_bandwidth(fit, r);
  return weighted_gauss_mixture(fit.pooled_points, fitted_point_weights(fit, r), h, x);
}

Eigen::ArrayXd drm_density_curve(const DrmFit& fit, int r, const Eigen::ArrayXd& xs) {
  const double h = drm_density_bandwidth(fit, r);
  return weighted_gauss_mixture(fit.pooled_points, fitted_point_weights(fit, r), h, xs);
}

}  // namespace drm
