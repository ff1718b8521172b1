#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drm/multisample.hpp"

namespace drm {

// Batch density evaluator; must return strictly positive values at every
// query point. Kernel estimates and exact parametric densities both fit.
using BatchDensityFn = std::function<Eigen::ArrayXd(const Eigen::ArrayXd&)>;

// Relative cutoff below which an eigenvalue of M-hat counts as zero.
inline constexpr double kEigenvalueCutoff = 1e-12;

// Centered estimated log density ratios.
//
// For densities g_0..g_m and pooled empirical measure Fn:
//   Q_k(x)  = log(g_k(x)/g_0(x)) - integral of the same under Fn,
//   Qc_k(x) = Q_k(x) - (m+1)^{-1} sum_k Q_k(x).
// Values at the pooled points are cached; evaluation elsewhere reuses the
// centering constants frozen at construction.
class LogRatioSet {
 public:
  LogRatioSet(std::vector<BatchDensityFn> densities, const PooledEmpirical& pooled);

  int num_populations() const { return static_cast<int>(densities_.size()); }

  // (m+1) x N cache of Qc_k at the pooled points.
  const Eigen::MatrixXd& centered_at_pooled() const { return cached_; }

  // Centering constants c_k = integral of log(g_k/g_0) under Fn.
  const Eigen::VectorXd& centering_constants() const { return constants_; }

  // Qc_k at arbitrary points, one row per population.
  Eigen::MatrixXd centered_at(const Eigen::ArrayXd& xs) const;

  Eigen::Index pooled_size() const { return cached_.cols(); }

 private:
  std::vector<BatchDensityFn> densities_;
  Eigen::VectorXd constants_;
  Eigen::MatrixXd cached_;
};

LogRatioSet log_ratios(std::vector<BatchDensityFn> densities,
                       const PooledEmpirical& pooled);

// Empirical M matrix: entry (i,j) is the pooled average of Qc_i * Qc_j,
// stored exactly symmetric.
Eigen::MatrixXd m_hat(const LogRatioSet& lr, const PooledEmpirical& pooled);

struct EigenSystem {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns, unit norm, sign-fixed
};

// All eigenpairs of a symmetric matrix, eigenvalues descending, each
// eigenvector's largest-magnitude entry made positive (ties broken by
// lowest index) so output is reproducible.
EigenSystem eigensystem(const Eigen::MatrixXd& m);

// The fitted adaptive basis: psi_j(x) = lambda_j^{-1/2} sum_k p_{k,j} Qc_k(x).
class AdaptiveBasis {
 public:
  struct Provenance {
    std::vector<double> bandwidths;
    std::optional<double> chosen_k;
    std::optional<double> kde_floor;
    int j1 = 0;
    int j2 = 0;
  };

  AdaptiveBasis(std::shared_ptr<const LogRatioSet> ratios,
                Eigen::VectorXd lambdas, Eigen::MatrixXd eigvecs);

  int dim() const { return static_cast<int>(lambdas_.size()); }
  const Eigen::VectorXd& lambdas() const { return lambdas_; }
  const Eigen::MatrixXd& eigvecs() const { return eigvecs_; }
  const LogRatioSet& ratios() const { return *ratios_; }

  // N x d values at the pooled points.
  const Eigen::MatrixXd& values_at_pooled() const { return pooled_values_; }

  // Basis values at arbitrary points (rows) for the d components (cols).
  Eigen::MatrixXd evaluate(const Eigen::ArrayXd& xs) const;

  Provenance provenance;

 private:
  std::shared_ptr<const LogRatioSet> ratios_;
  Eigen::VectorXd lambdas_;
  Eigen::MatrixXd eigvecs_;   // (m+1) x d
  Eigen::MatrixXd combo_;     // (m+1) x d: eigvecs * diag(lambda^{-1/2})
  Eigen::MatrixXd pooled_values_;
};

AdaptiveBasis build_basis(std::shared_ptr<const LogRatioSet> ratios,
                          const EigenSystem& eig, int d);

// Smallest J whose leading eigenvalues explain at least `threshold` of the
// total (denominator includes every eigenvalue, zeros included).
int threshold_rank(const Eigen::VectorXd& lambdas_desc, double threshold);

double bic_value(double loglik, int m, int j, Eigen::Index n_total);

struct DSelection {
  int d = 0;
  int j1 = 0;
  int j2 = 0;
  std::vector<double> bic;  // BIC per candidate J = 1..bic_max (NaN if failed)
  Eigen::VectorXd variance_explained;  // cumulative fraction per J
  std::vector<std::string> warnings;
};

// Combined threshold + BIC choice: d = max{J1, J2}.
DSelection select_d(const std::shared_ptr<const LogRatioSet>& ratios,
                    const MultiSample& ms, const PooledEmpirical& pooled,
                    const EigenSystem& eig, double threshold = 0.95,
                    int bic_max = 4);

}  // namespace drm
