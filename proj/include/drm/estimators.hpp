#pragma once

#include <Eigen/Core>

#include "drm/el_drm.hpp"

namespace drm {

// EL-DRM quantile: smallest pooled point t with G_r(t) >= tau.
double drm_quantile(const DrmFit& fit, int r, double tau);

// Type-1 empirical quantile of a single sample.
double empirical_quantile(const Eigen::ArrayXd& sample, double tau);

// Silverman bandwidth of the fitted distribution G_r, computed from the
// weighted support {(x_i, p_i exp(alpha_r + beta_r . q(x_i)))}.
double drm_density_bandwidth(const DrmFit& fit, int r);

// DRM-updated density: the fitted weights smoothed by a Gaussian kernel.
double drm_density(const DrmFit& fit, int r, double x);
Eigen::ArrayXd drm_density_curve(const DrmFit& fit, int r, const Eigen::ArrayXd& xs);

}  // namespace drm
