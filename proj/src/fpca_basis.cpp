#include "drm/fpca_basis.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "drm/el_drm.hpp"
#include "drm/errors.hpp"

namespace drm {

namespace {

// Log densities for all populations at the given points, one row each.
// Throws if any density degenerates to zero or NaN.
Eigen::MatrixXd log_density_rows(const std::vector<BatchDensityFn>& densities,
                                 const Eigen::ArrayXd& xs, const char* op) {
  const int pops = static_cast<int>(densities.size());
  Eigen::MatrixXd logs(pops, xs.size());
  for (int k = 0; k < pops; ++k) {
    const Eigen::ArrayXd vals = densities[static_cast<std::size_t>(k)](xs);
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
      // Values at the bottom of the double range count as zero; the
      // vectorized exp clamps its argument near -708 instead of
      // underflowing, and a log ratio that large is equally unusable.
      if (!(vals[i] >= 1e-300) || !std::isfinite(vals[i])) {
        throw NumericError(
            op, "density for population " + std::to_string(k) +
                    " is zero or NaN at x = " + std::to_string(xs[i]) +
                    " (enable a KDE floor or widen the bandwidth)");
      }
    }
    logs.row(k) = vals.log().matrix().transpose();
  }
  return logs;
}

}  // namespace

LogRatioSet::LogRatioSet(std::vector<BatchDensityFn> densities,
                         const PooledEmpirical& pooled)
    : densities_(std::move(densities)) {
  if (densities_.size() < 2) {
    throw UsageError("fpca_basis.log_ratios", "need at least two densities");
  }
  const Eigen::MatrixXd logs =
      log_density_rows(densities_, pooled.points, "fpca_basis.log_ratios");
  const int pops = num_populations();
  const Eigen::Index n = pooled.size();

  Eigen::MatrixXd q(pops, n);
  constants_.resize(pops);
  for (int k = 0; k < pops; ++k) {
    const Eigen::RowVectorXd ratio = logs.row(k) - logs.row(0);
    constants_[k] = ratio.mean();
    q.row(k) = ratio.array() - constants_[k];
  }
  // Across-population centering, Qc_k = Q_k - mean_k Q_k.
  const Eigen::RowVectorXd col_mean = q.colwise().mean();
  cached_ = q.rowwise() - col_mean;
}

Eigen::MatrixXd LogRatioSet::centered_at(const Eigen::ArrayXd& xs) const {
  const Eigen::MatrixXd logs =
      log_density_rows(densities_, xs, "fpca_basis.centered_at");
  const int pops = num_populations();
  Eigen::MatrixXd q(pops, xs.size());
  for (int k = 0; k < pops; ++k) {
    q.row(k) = (logs.row(k) - logs.row(0)).array() - constants_[k];
  }
  const Eigen::RowVectorXd col_mean = q.colwise().mean();
  return q.rowwise() - col_mean;
}

LogRatioSet log_ratios(std::vector<BatchDensityFn> densities,
                       const PooledEmpirical& pooled) {
  return LogRatioSet(std::move(densities), pooled);
}

Eigen::MatrixXd m_hat(const LogRatioSet& lr, const PooledEmpirical& pooled) {
  const Eigen::MatrixXd& qc = lr.centered_at_pooled();
  if (qc.cols() != pooled.size()) {
    throw UsageError("fpca_basis.m_hat", "pooled measure does not match the cache");
  }
  Eigen::MatrixXd m = (qc * qc.transpose()) / static_cast<double>(pooled.size());
  return 0.5 * (m + m.transpose());
}

EigenSystem eigensystem(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw UsageError("fpca_basis.eigensystem", "matrix must be square");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw NumericError("fpca_basis.eigensystem", "eigendecomposition failed");
  }
  const auto n = m.rows();
  EigenSystem out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out.values[j] = solver.eigenvalues()[n - 1 - j];
    Eigen::VectorXd v = solver.eigenvectors().col(n - 1 - j);
    Eigen::Index at = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::fabs(v[i]) > best) {
        best = std::fabs(v[i]);
        at = i;
      }
    }
    if (v[at] < 0.0) v = -v;
    out.vectors.col(j) = v;
  }
  return out;
}

AdaptiveBasis::AdaptiveBasis(std::shared_ptr<const LogRatioSet> ratios,
                             Eigen::VectorXd lambdas, Eigen::MatrixXd eigvecs)
    : ratios_(std::move(ratios)),
      lambdas_(std::move(lambdas)),
      eigvecs_(std::move(eigvecs)) {
  combo_ = eigvecs_;
  for (int j = 0; j < dim(); ++j) {
    combo_.col(j) /= std::sqrt(lambdas_[j]);
  }
  pooled_values_ = ratios_->centered_at_pooled().transpose() * combo_;
}

Eigen::MatrixXd AdaptiveBasis::evaluate(const Eigen::ArrayXd& xs) const {
  return ratios_->centered_at(xs).transpose() * combo_;
}

AdaptiveBasis build_basis(std::shared_ptr<const LogRatioSet> ratios,
                          const EigenSystem& eig, int d) {
  const int pops = ratios->num_populations();
  if (d < 1 || d > pops - 1) {
    throw UsageError("fpca_basis.build_basis",
                     "d must lie in [1, m]; got " + std::to_string(d));
  }
  if (eig.values.size() < d) {
    throw UsageError("fpca_basis.build_basis", "eigensystem smaller than d");
  }
  if (!(eig.values[d - 1] > kEigenvalueCutoff * eig.values[0])) {
    throw NumericError("fpca_basis.build_basis",
                       "rank deficiency: eigenvalue " + std::to_string(d - 1) +
                           " is numerically zero; use a smaller d");
  }
  return AdaptiveBasis(std::move(ratios), eig.values.head(d),
                       eig.vectors.leftCols(d));
}

int threshold_rank(const Eigen::VectorXd& lambdas_desc, double threshold) {
  const double total = lambdas_desc.sum();
  if (!(total > 0.0)) {
    throw NumericError("fpca_basis.threshold_rank", "eigenvalue total is not positive");
  }
  double cum = 0.0;
  for (Eigen::Index j = 0; j < lambdas_desc.size(); ++j) {
    cum += lambdas_desc[j];
    if (cum / total >= threshold) return static_cast<int>(j) + 1;
  }
  return static_cast<int>(lambdas_desc.size());
}

double bic_value(double loglik, int m, int j, Eigen::Index n_total) {
  return -2.0 * loglik +
         static_cast<double>(m) * static_cast<double>(j) *
             std::log(static_cast<double>(n_total));
}

DSelection select_d(const std::shared_ptr<const LogRatioSet>& ratios,
                    const MultiSample& ms, const PooledEmpirical& pooled,
                    const EigenSystem& eig, double threshold, int bic_max) {
  const int m = ratios->num_populations() - 1;
  DSelection sel;

  sel.j1 = threshold_rank(eig.values, threshold);
  const int usable = [&] {
    int r = 0;
    while (r < m && eig.values[r] > kEigenvalueCutoff * eig.values[0]) ++r;
    return r;
  }();
  if (sel.j1 > usable) {
    sel.warnings.push_back("threshold rank " + std::to_string(sel.j1) +
                           " exceeds numerical rank " + std::to_string(usable));
    sel.j1 = usable;
  }

  sel.variance_explained.resize(eig.values.size());
  const double total = eig.values.sum();
  double cum = 0.0;
  for (Eigen::Index j = 0; j < eig.values.size(); ++j) {
    cum += eig.values[j];
    sel.variance_explained[j] = cum / total;
  }

  sel.bic.assign(static_cast<std::size_t>(bic_max),
                 std::numeric_limits<double>::quiet_NaN());
  double best = std::numeric_limits<double>::infinity();
  int best_j = 0;
  for (int j = 1; j <= bic_max; ++j) {
    if (j > usable) {
      sel.warnings.push_back("BIC candidate J=" + std::to_string(j) +
                             " skipped: exceeds numerical rank");
      continue;
    }
    try {
      const AdaptiveBasis basis = build_basis(ratios, eig, j);
      const DrmFit fit = fit_drm(ms, pooled, basis.values_at_pooled());
      const double bic = bic_value(fit.loglik, m, j, ms.total());
      sel.bic[static_cast<std::size_t>(j - 1)] = bic;
      if (bic < best) {
        best = bic;
        best_j = j;
      }
    } catch (const Error& e) {
      sel.warnings.push_back("BIC candidate J=" + std::to_string(j) +
                             " failed: " + e.what());
    }
  }
  if (best_j == 0) {
    throw NumericError("fpca_basis.select_d", "every BIC candidate failed");
  }
  sel.j2 = best_j;
  sel.d = std::max(sel.j1, sel.j2);
  return sel;
}

}  // namespace drm
