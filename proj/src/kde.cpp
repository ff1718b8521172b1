#include "drm/kde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drm/errors.hpp"
#include "drm/stats.hpp"

namespace drm {

double weighted_gauss_mixture(const Eigen::ArrayXd& points,
                              const Eigen::ArrayXd& weights, double h, double x) {
  const double inv_h = 1.0 / h;
  const double s = ((((x - points) * inv_h).square() * (-0.5)).exp() * weights).sum();
  return kInvSqrt2Pi * inv_h * s;
}

Eigen::ArrayXd weighted_gauss_mixture(const Eigen::ArrayXd& points,
                                      const Eigen::ArrayXd& weights, double h,
                                      const Eigen::ArrayXd& xs) {
  Eigen::ArrayXd out(xs.size());
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    out[i] = weighted_gauss_mixture(points, weights, h, xs[i]);
  }
  return out;
}

KdeEstimate::KdeEstimate(Eigen::ArrayXd sample, double bandwidth,
                         std::optional<double> floor_value)
    : sample_(std::move(sample)), h_(bandwidth), floor_(floor_value) {
  if (sample_.size() == 0 || !sample_.isFinite().all()) {
    throw DataError("kde", "sample must be nonempty and finite");
  }
  if (!(h_ > 0.0)) {
    throw UsageError("kde", "bandwidth must be positive");
  }
  if (floor_ && !(*floor_ > 0.0)) {
    throw UsageError("kde", "floor value must be positive");
  }
  weights_ = Eigen::ArrayXd::Constant(sample_.size(),
                                      1.0 / static_cast<double>(sample_.size()));
}

double KdeEstimate::operator()(double x) const {
  const double v = weighted_gauss_mixture(sample_, weights_, h_, x);
  return floor_ ? std::max(v, *floor_) : v;
}

Eigen::ArrayXd KdeEstimate::operator()(const Eigen::ArrayXd& xs) const {
  Eigen::ArrayXd v = weighted_gauss_mixture(sample_, weights_, h_, xs);
  if (floor_) v = v.max(*floor_);
  return v;
}

BatchDensityFn KdeEstimate::as_density_fn() const {
  return [copy = *this](const Eigen::ArrayXd& xs) { return copy(xs); };
}

double weighted_silverman_bandwidth(const Eigen::ArrayXd& sorted,
                                    const Eigen::ArrayXd& weights,
                                    Eigen::Index n_eff) {
  if (sorted.size() < 2 || n_eff < 2) {
    throw DataError("kde.silverman_bandwidth", "need at least two observations");
  }
  const double sd = weighted_sd(sorted, weights);
  const double iqr = weighted_quantile_type7(sorted, weights, 0.75) -
                     weighted_quantile_type7(sorted, weights, 0.25);
  const double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) {
    throw DataError("kde.silverman_bandwidth", "degenerate sample: zero spread");
  }
  return 0.9 * std::pow(static_cast<double>(n_eff), -0.2) * spread;
}

double silverman_bandwidth(const Eigen::ArrayXd& sample) {
  Eigen::ArrayXd sorted = sample;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  const Eigen::ArrayXd w = Eigen::ArrayXd::Constant(
      sorted.size(), 1.0 / static_cast<double>(sorted.size()));
  return weighted_silverman_bandwidth(sorted, w, sorted.size());
}

double scaled_bandwidth(const Eigen::ArrayXd& sample, double k) {
  if (!(k > 0.0)) {
    throw UsageError("kde.scaled_bandwidth", "scale factor k must be positive");
  }
  const double sd = sample_sd(sample);
  if (!(sd > 0.0)) {
    throw DataError("kde.scaled_bandwidth", "degenerate sample: zero spread");
  }
  return k * std::pow(static_cast<double>(sample.size()), -0.2) * sd;
}

KdeEstimate kde_fit(const Eigen::ArrayXd& sample, double h,
                    std::optional<double> floor_constant, Eigen::Index n_total) {
  if (!(h > 0.0)) {
    throw UsageError("kde.kde_fit", "bandwidth must be positive");
  }
  std::optional<double> floor;
  if (floor_constant) {
    if (!(*floor_constant > 0.0)) {
      throw UsageError("kde.kde_fit", "floor constant must be positive");
    }
    if (n_total < 2) {
      throw UsageError("kde.kde_fit", "floor needs the total pooled size N");
    }
    const double n = static_cast<double>(n_total);
    floor = *floor_constant * std::pow(std::log(n) / n, 0.4);
  }
  return KdeEstimate(sample, h, floor);
}

std::vector<ReferenceParams> fit_reference(const MultiSample& ms,
                                           ReferenceFamily family) {
  std::vector<ReferenceParams> out;
  out.reserve(static_cast<std::size_t>(ms.num_populations()));
  for (int k = 0; k < ms.num_populations(); ++k) {
    const Eigen::ArrayXd& x = ms.sample(k);
    const double mean = x.mean();
    const double var = (x - mean).square().mean();
    if (family == ReferenceFamily::kNormal) {
      if (!(var > 0.0)) {
        throw DataError("kde.fit_reference",
                        "population " + std::to_string(k) + " has zero variance");
      }
      out.push_back({mean, var});
    } else {
      if ((x <= 0.0).any()) {
        throw DataError("kde.fit_reference",
                        "gamma family requires positive data; population " +
                            std::to_string(k) + " violates this");
      }
      if (!(var > 0.0)) {
        throw DataError("kde.fit_reference",
                        "population " + std::to_string(k) + " has zero variance");
      }
      out.push_back({mean * mean / var, var / mean});
    }
  }
  return out;
}

Eigen::ArrayXd reference_log_density(const Eigen::ArrayXd& xs,
                                     const ReferenceParams& p,
                                     ReferenceFamily family) {
  if (family == ReferenceFamily::kNormal) {
    const double mean = p.a;
    const double var = p.b;
    return -0.5 * std::log(2.0 * M_PI * var) - (xs - mean).square() / (2.0 * var);
  }
  const double shape = p.a;
  const double scale = p.b;
  const double norm = shape * std::log(scale) + std::lgamma(shape);
  return (shape - 1.0) * xs.log() - xs / scale - norm;
}

ReferenceEigensystem reference_eigensystem(const MultiSample& ms,
                                           const PooledEmpirical& pooled,
                                           const std::vector<ReferenceParams>& params,
                                           ReferenceFamily family, int d_ref) {
  if (params.size() != static_cast<std::size_t>(ms.num_populations())) {
    throw UsageError("kde.reference_eigensystem",
                     "one parameter set per population required");
  }
  if (family == ReferenceFamily::kGamma && (pooled.points <= 0.0).any()) {
    throw DataError("kde.reference_eigensystem",
                    "gamma reference requires positive pooled data");
  }
  std::vector<BatchDensityFn> densities;
  densities.reserve(params.size());
  for (const auto& p : params) {
    densities.push_back([p, family](const Eigen::ArrayXd& xs) {
      return reference_log_density(xs, p, family).exp().eval();
    });
  }
  const LogRatioSet lr(std::move(densities), pooled);
  ReferenceEigensystem out;
  out.m = m_hat(lr, pooled);
  const EigenSystem eig = eigensystem(out.m);
  out.lambdas = eig.values;
  out.eigvecs = eig.vectors;
  out.d_ref = d_ref;
  if (d_ref < 1 || d_ref > ms.m() + 1) {
    throw UsageError("kde.reference_eigensystem", "d_ref out of range");
  }
  if (!(eig.values[0] > 0.0) ||
      !(eig.values[d_ref - 1] > kEigenvalueCutoff * eig.values[0])) {
    throw NumericError("kde.reference_eigensystem",
                       "rank deficiency: fewer than " + std::to_string(d_ref) +
                           " numerically nonzero eigenvalues");
  }
  Eigen::MatrixXd combo = eig.vectors.leftCols(d_ref);
  for (int j = 0; j < d_ref; ++j) {
    combo.col(j) /= std::sqrt(eig.values[j]);
  }
  out.psi = lr.centered_at_pooled().transpose() * combo;
  return out;
}

Eigen::ArrayXd default_k_grid() {
  Eigen::ArrayXd grid(28);
  for (int i = 0; i < 28; ++i) grid[i] = 0.3 + 0.1 * i;
  return grid;
}

Eigen::Index lowest_argmin(const Eigen::ArrayXd& values) {
  Eigen::Index best = -1;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) continue;
    if (best < 0 || values[i] < values[best]) best = i;
  }
  return best;
}

BandwidthSelection select_bandwidth(const MultiSample& ms,
                                    const PooledEmpirical& pooled,
                                    ReferenceFamily family,
                                    const Eigen::ArrayXd& k_grid, int d_ref,
                                    std::optional<double> floor_constant) {
  if (k_grid.size() == 0) {
    throw UsageError("kde.select_bandwidth", "empty bandwidth grid");
  }
  for (Eigen::Index i = 0; i < k_grid.size(); ++i) {
    if (!(k_grid[i] > 0.0) || (i > 0 && !(k_grid[i] > k_grid[i - 1]))) {
      throw UsageError("kde.select_bandwidth",
                       "grid must be strictly positive and strictly increasing");
    }
  }

  const auto params = fit_reference(ms, family);
  const ReferenceEigensystem ref =
      reference_eigensystem(ms, pooled, params, family, d_ref);
  // lambda^{-1/2} psi_j at the pooled points, per the matching objective.
  Eigen::MatrixXd ref_scaled = ref.psi;
  for (int j = 0; j < d_ref; ++j) {
    ref_scaled.col(j) /= std::sqrt(ref.lambdas[j]);
  }

  const int pops = ms.num_populations();
  std::vector<double> sds(static_cast<std::size_t>(pops));
  std::vector<double> nfac(static_cast<std::size_t>(pops));
  for (int r = 0; r < pops; ++r) {
    sds[static_cast<std::size_t>(r)] = sample_sd(ms.sample(r));
    nfac[static_cast<std::size_t>(r)] =
        std::pow(static_cast<double>(ms.count(r)), -0.2);
  }

  BandwidthSelection sel;
  sel.k_grid = k_grid;
  sel.objectives =
      Eigen::ArrayXd::Constant(k_grid.size(), std::numeric_limits<double>::quiet_NaN());

  const double n_points = static_cast<double>(pooled.size());
  // Per-component matching errors for every candidate; the objective is
  // their sum over j < d_ref.
  Eigen::MatrixXd terms = Eigen::MatrixXd::Constant(
      k_grid.size(), d_ref, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index gi = 0; gi < k_grid.size(); ++gi) {
    const double k = k_grid[gi];
    try {
      std::vector<BatchDensityFn> densities;
      densities.reserve(static_cast<std::size_t>(pops));
      for (int r = 0; r < pops; ++r) {
        const double h = k * nfac[static_cast<std::size_t>(r)] *
                         sds[static_cast<std::size_t>(r)];
        densities.push_back(
            kde_fit(ms.sample(r), h, floor_constant, ms.total()).as_density_fn());
      }
      const LogRatioSet lr(std::move(densities), pooled);
      const Eigen::MatrixXd m = m_hat(lr, pooled);
      const EigenSystem eig = eigensystem(m);
      if (!(eig.values[0] > 0.0) ||
          !(eig.values[d_ref - 1] > kEigenvalueCutoff * eig.values[0])) {
        throw NumericError("kde.select_bandwidth", "rank deficiency at this k");
      }
      double obj = 0.0;
      for (int j = 0; j < d_ref; ++j) {
        // lambda-hat^{-1/2} psi-hat_j = lambda-hat^{-1} Qc^T p_j.
        const Eigen::VectorXd est =
            lr.centered_at_pooled().transpose() * eig.vectors.col(j) / eig.values[j];
        const double plus = (est - ref_scaled.col(j)).squaredNorm() / n_points;
        const double minus = (est + ref_scaled.col(j)).squaredNorm() / n_points;
        terms(gi, j) = std::min(plus, minus);
        obj += terms(gi, j);
      }
      sel.objectives[gi] = obj;
    } catch (const Error& e) {
      sel.failures.push_back("k=" + std::to_string(k) + ": " + e.what());
    }
  }

  Eigen::Index best = lowest_argmin(sel.objectives);
  if (best < 0) {
    std::string detail;
    for (const auto& f : sel.failures) detail += "\n  " + f;
    throw NumericError("kde.select_bandwidth",
                       "every grid candidate failed:" + detail);
  }
  sel.matched_components = d_ref;

  // The objective saturates at sum_j 1/lambda_j when the estimated
  // eigensystem shrinks to zero relative to the reference; a minimum near
  // that bound means the trailing components carried no matching signal.
  // Re-rank on the leading components that do discriminate.
  const double saturation =
      ref.lambdas.head(d_ref).array().inverse().sum();
  if (sel.objectives[best] > 0.9 * saturation) {
    for (int keep = d_ref - 1; keep >= 1; --keep) {
      Eigen::ArrayXd partial(k_grid.size());
      for (Eigen::Index gi = 0; gi < k_grid.size(); ++gi) {
        partial[gi] = terms.row(gi).head(keep).sum();
      }
      const double partial_sat = ref.lambdas.head(keep).array().inverse().sum();
      const Eigen::Index cand = lowest_argmin(partial);
      if (cand >= 0 && partial[cand] <= 0.9 * partial_sat) {
        best = cand;
        sel.matched_components = keep;
        break;
      }
    }
  }
  sel.k = k_grid[best];
  sel.bandwidths.resize(static_cast<std::size_t>(pops));
  for (int r = 0; r < pops; ++r) {
    sel.bandwidths[static_cast<std::size_t>(r)] =
        sel.k * nfac[static_cast<std::size_t>(r)] * sds[static_cast<std::size_t>(r)];
  }
  return sel;
}

}  // namespace drm
