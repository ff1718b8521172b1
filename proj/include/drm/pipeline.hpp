#pragma once

#include <memory>
#include <optional>

#include "drm/fpca_basis.hpp"
#include "drm/kde.hpp"
#include "drm/multisample.hpp"

namespace drm {

enum class BandwidthPolicy { kSilverman, kAdaptive, kFixed };

struct BasisPipelineOptions {
  BandwidthPolicy bandwidth = BandwidthPolicy::kAdaptive;
  double fixed_bandwidth = 0.0;
  ReferenceFamily family = ReferenceFamily::kNormal;
  Eigen::ArrayXd k_grid;  // empty -> default_k_grid()
  std::optional<double> kde_floor;
  int fixed_d = 0;  // 0 means auto (threshold + BIC)
  double threshold = 0.95;
  int bic_max = 4;
};

struct BasisPipelineResult {
  std::vector<double> bandwidths;
  std::optional<double> chosen_k;
  std::shared_ptr<const LogRatioSet> ratios;
  EigenSystem eig;
  DSelection selection;
  AdaptiveBasis basis;
};

// Full adaptive-basis pipeline: bandwidths -> KDEs -> centered log
// ratios -> M-hat eigensystem -> d selection -> basis.
BasisPipelineResult build_adaptive_basis(const MultiSample& ms,
                                         const PooledEmpirical& pooled,
                                         const BasisPipelineOptions& opt);

// Rebuild a basis from stored provenance (bandwidths + eigenvectors +
// eigenvalues); used when loading a serialized basis against the same data.
AdaptiveBasis rebuild_basis(const MultiSample& ms, const PooledEmpirical& pooled,
                            const std::vector<double>& bandwidths,
                            std::optional<double> kde_floor,
                            const Eigen::VectorXd& lambdas,
                            const Eigen::MatrixXd& eigvecs);

}  // namespace drm
