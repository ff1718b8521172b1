#pragma once

#include <Eigen/Core>

#include "drm/multisample.hpp"

namespace drm {

// Low-dimensional FPCA representation of the kernel density estimates
// themselves (Kneip-Utikal style), discretized on a uniform grid.
// Reconstructed densities may be negative; they are kept as-is.
struct KuModel {
  Eigen::ArrayXd grid;
  double dx = 0.0;
  Eigen::VectorXd mean_density;      // grid length
  Eigen::MatrixXd phi;               // grid x L, grid-orthonormal
  Eigen::MatrixXd theta;             // (m+1) x L scores
  Eigen::MatrixXd reconstructed;     // (m+1) x grid
  Eigen::VectorXd gram_eigenvalues;  // all, descending
  int num_components = 0;
};

KuModel ku_fit(const MultiSample& ms, int num_components, int grid_size = 512);

// Quantile from the reconstructed density: trapezoid CDF, monotone
// envelope by running maximum, inverted by the inf rule.
double ku_quantile(const KuModel& model, int r, double tau);

}  // namespace drm
