#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "drm/fpca_basis.hpp"
#include "drm/multisample.hpp"

namespace drm {

// Weighted Gaussian kernel mixture, f(x) = h^{-1} sum_i w_i phi((x-p_i)/h).
// The plain KDE and the DRM-updated density both evaluate through here.
double weighted_gauss_mixture(const Eigen::ArrayXd& points,
                              const Eigen::ArrayXd& weights, double h, double x);
Eigen::ArrayXd weighted_gauss_mixture(const Eigen::ArrayXd& points,
                                      const Eigen::ArrayXd& weights, double h,
                                      const Eigen::ArrayXd& xs);

// Standard-normal-kernel density estimate for one sample, optionally
// clamped below at a fixed floor value.
class KdeEstimate {
 public:
  KdeEstimate(Eigen::ArrayXd sample, double bandwidth,
              std::optional<double> floor_value = std::nullopt);

  double operator()(double x) const;
  Eigen::ArrayXd operator()(const Eigen::ArrayXd& xs) const;

  double bandwidth() const { return h_; }
  std::optional<double> floor_value() const { return floor_; }
  const Eigen::ArrayXd& sample() const { return sample_; }

  BatchDensityFn as_density_fn() const;

 private:
  Eigen::ArrayXd sample_;
  Eigen::ArrayXd weights_;  // uniform 1/n
  double h_;
  std::optional<double> floor_;
};

// Silverman's rule 0.9 n^{-1/5} min{sd, IQR/1.34} with the n-1 divisor
// standard deviation and type-7 IQR.
double silverman_bandwidth(const Eigen::ArrayXd& sample);

// Weighted version on an ascending-sorted support; reduces to the plain
// rule at uniform weights. `n_eff` enters only through the n^{-1/5} factor.
double weighted_silverman_bandwidth(const Eigen::ArrayXd& sorted,
                                    const Eigen::ArrayXd& weights,
                                    Eigen::Index n_eff);

// h = k n^{-1/5} sd.
double scaled_bandwidth(const Eigen::ArrayXd& sample, double k);

// When `floor_constant` is present the estimate is clamped below at
// floor_constant * (log N / N)^{2/5} with N the total pooled size.
KdeEstimate kde_fit(const Eigen::ArrayXd& sample, double h,
                    std::optional<double> floor_constant = std::nullopt,
                    Eigen::Index n_total = 0);

enum class ReferenceFamily { kNormal, kGamma };

// normal: (mean, variance); gamma: (shape, scale), both by moments.
struct ReferenceParams {
  double a = 0.0;
  double b = 0.0;
};

std::vector<ReferenceParams> fit_reference(const MultiSample& ms,
                                           ReferenceFamily family);

Eigen::ArrayXd reference_log_density(const Eigen::ArrayXd& xs,
                                     const ReferenceParams& p, ReferenceFamily family);

// Eigensystem of the M matrix built from closed-form parametric log
// density ratios, integrated against the pooled empirical measure.
struct ReferenceEigensystem {
  Eigen::MatrixXd m;
  Eigen::VectorXd lambdas;  // all, descending
  Eigen::MatrixXd eigvecs;  // all, sign-fixed
  Eigen::MatrixXd psi;      // N x d_ref eigenfunction values at pooled points
  int d_ref = 2;
};

ReferenceEigensystem reference_eigensystem(const MultiSample& ms,
                                           const PooledEmpirical& pooled,
                                           const std::vector<ReferenceParams>& params,
                                           ReferenceFamily family, int d_ref = 2);

struct BandwidthSelection {
  double k = 0.0;
  std::vector<double> bandwidths;  // per population at the chosen k
  Eigen::ArrayXd k_grid;
  Eigen::ArrayXd objectives;  // NaN where a candidate failed
  std::vector<std::string> failures;
  // Number of reference components the final ranking used. Less than
  // d_ref when the full objective saturated at its shrink-to-zero bound
  // (the trailing components carried no matching signal).
  int matched_components = 0;
};

// Grid search for the scale k in h_r = k n_r^{-1/5} sd_r, minimizing the
// eigensystem-matching objective against the parametric reference (each
// term evaluated at the better of the two eigenfunction signs). Ties go
// to the smaller k.
BandwidthSelection select_bandwidth(const MultiSample& ms,
                                    const PooledEmpirical& pooled,
                                    ReferenceFamily family,
                                    const Eigen::ArrayXd& k_grid, int d_ref = 2,
                                    std::optional<double> floor_constant = std::nullopt);

// 0.3 to 3.0 in steps of 0.1.
Eigen::ArrayXd default_k_grid();

// Index of the smallest non-NaN value; ties break toward the lowest index.
// -1 when every value is NaN.
Eigen::Index lowest_argmin(const Eigen::ArrayXd& values);

}  // namespace drm
