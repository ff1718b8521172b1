#include "drm/el_drm.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "drm/errors.hpp"

namespace drm {

namespace {

std::vector<int> grouped_labels(const Eigen::VectorXd& counts) {
  std::vector<int> pop;
  for (int k = 0; k < counts.size(); ++k) {
    const auto nk = static_cast<Eigen::Index>(counts[k]);
    pop.insert(pop.end(), static_cast<std::size_t>(nk), k);
  }
  return pop;
}

// Shared evaluation state for the profile log-EL and its derivatives.
struct Objective {
  const Eigen::MatrixXd& basis;  // N x d
  const std::vector<int>& pop;
  const Eigen::VectorXd& counts;  // m+1
  int m;
  int d;
  Eigen::Index n_points;
  Eigen::VectorXd log_counts;
  Eigen::MatrixXd pop_sums;  // m x d: sum of basis rows per population r>=1

  Objective(const Eigen::MatrixXd& basis_in, const std::vector<int>& pop_in,
            const Eigen::VectorXd& counts_in)
      : basis(basis_in), pop(pop_in), counts(counts_in) {
    m = static_cast<int>(counts.size()) - 1;
    d = static_cast<int>(basis.cols());
    n_points = basis.rows();
    if (static_cast<Eigen::Index>(pop.size()) != n_points) {
      throw UsageError("el_drm", "population labels do not match basis rows");
    }
    log_counts = counts.array().log().matrix();
    pop_sums = Eigen::MatrixXd::Zero(m, d);
    for (Eigen::Index i = 0; i < n_points; ++i) {
      const int k = pop[static_cast<std::size_t>(i)];
      if (k > 0) pop_sums.row(k - 1) += basis.row(i);
    }
  }

  // eta_{i,r} = alpha_r + beta_r . q(x_i) with column 0 identically zero.
  Eigen::MatrixXd eta(const DrmParams& p) const {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n_points, m + 1);
    for (int r = 1; r <= m; ++r) {
      e.col(r) = (basis * p.beta.row(r - 1).transpose()).array() + p.alpha[r - 1];
    }
    return e;
  }

  // log S_i = log sum_r n_r exp(eta_{i,r}), stabilized.
  Eigen::VectorXd log_inner(const Eigen::MatrixXd& e) const {
    const Eigen::MatrixXd z = e.rowwise() + log_counts.transpose();
    const Eigen::VectorXd zmax = z.rowwise().maxCoeff();
    const Eigen::VectorXd lse =
        ((z.colwise() - zmax).array().exp().rowwise().sum()).log().matrix() + zmax;
    return lse;
  }

  double value_from(const DrmParams& p, const Eigen::VectorXd& log_s) const {
    double ll = -log_s.sum();
    for (int r = 1; r <= m; ++r) {
      ll += counts[r] * p.alpha[r - 1] + p.beta.row(r - 1).dot(pop_sums.row(r - 1));
    }
    return ll;
  }

  double value(const DrmParams& p) const {
    const double ll = value_from(p, log_inner(eta(p)));
    if (!std::isfinite(ll)) {
      throw NumericError("el_drm.profile_loglik", "objective is not finite");
    }
    return ll;
  }

  // Membership weights w_{i,r} = n_r exp(eta_{i,r}) / S_i.
  Eigen::MatrixXd membership(const Eigen::MatrixXd& e,
                             const Eigen::VectorXd& log_s) const {
    return ((e.rowwise() + log_counts.transpose()).colwise() - log_s)
        .array()
        .exp()
        .matrix();
  }

  // Gradient in m blocks of (alpha_r, beta_r).
  Eigen::VectorXd gradient(const Eigen::MatrixXd& w) const {
    Eigen::VectorXd g(m * (1 + d));
    for (int r = 1; r <= m; ++r) {
      const double wsum = w.col(r).sum();
      g[(r - 1) * (1 + d)] = counts[r] - wsum;
      g.segment((r - 1) * (1 + d) + 1, d) =
          pop_sums.row(r - 1).transpose() - basis.transpose() * w.col(r);
    }
    return g;
  }

  // Negated Hessian (positive semidefinite by concavity).
  Eigen::MatrixXd neg_hessian(const Eigen::MatrixXd& w) const {
    const int block = 1 + d;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m * block, m * block);
    for (int r = 1; r <= m; ++r) {
      for (int s = r; s <= m; ++s) {
        Eigen::ArrayXd c = -(w.col(r).array() * w.col(s).array());
        if (r == s) c += w.col(r).array();
        const double t0 = c.sum();
        const Eigen::VectorXd t1 = basis.transpose() * c.matrix();
        const Eigen::MatrixXd t2 =
            basis.transpose() * (basis.array().colwise() * c).matrix();
        Eigen::MatrixXd blk(block, block);
        blk(0, 0) = t0;
        blk.block(0, 1, 1, d) = t1.transpose();
        blk.block(1, 0, d, 1) = t1;
        blk.block(1, 1, d, d) = t2;
        p.block((r - 1) * block, (s - 1) * block, block, block) = blk;
        if (s != r) {
          p.block((s - 1) * block, (r - 1) * block, block, block) = blk.transpose();
        }
      }
    }
    return p;
  }

  DrmParams unpack(const Eigen::VectorXd& theta) const {
    DrmParams p;
    p.alpha.resize(m);
    p.beta.resize(m, d);
    for (int r = 1; r <= m; ++r) {
      p.alpha[r - 1] = theta[(r - 1) * (1 + d)];
      p.beta.row(r - 1) = theta.segment((r - 1) * (1 + d) + 1, d).transpose();
    }
    return p;
  }
};

void check_params(const DrmParams& params, const Eigen::MatrixXd& basis,
                  const Eigen::VectorXd& counts, const char* op) {
  if (params.alpha.size() != counts.size() - 1 ||
      params.beta.rows() != counts.size() - 1 ||
      params.beta.cols() != basis.cols()) {
    throw UsageError(op, "parameter dimensions do not match data");
  }
  if (!params.alpha.allFinite() || !params.beta.allFinite()) {
    throw UsageError(op, "parameters must be finite");
  }
}

}  // namespace

double profile_loglik(const DrmParams& params, const Eigen::MatrixXd& basis,
                      const std::vector<int>& pop, const Eigen::VectorXd& counts) {
  check_params(params, basis, counts, "el_drm.profile_loglik");
  Objective obj(basis, pop, counts);
  return obj.value(params);
}

double profile_loglik(const DrmParams& params, const Eigen::MatrixXd& basis_grouped,
                      const Eigen::VectorXd& counts) {
  return profile_loglik(params, basis_grouped, grouped_labels(counts), counts);
}

Eigen::VectorXd profile_grad(const DrmParams& params, const Eigen::MatrixXd& basis,
                             const std::vector<int>& pop,
                             const Eigen::VectorXd& counts) {
  check_params(params, basis, counts, "el_drm.profile_grad");
  Objective obj(basis, pop, counts);
  const Eigen::MatrixXd e = obj.eta(params);
  const Eigen::VectorXd log_s = obj.log_inner(e);
  return obj.gradient(obj.membership(e, log_s));
}

Eigen::VectorXd profile_grad(const DrmParams& params,
                             const Eigen::MatrixXd& basis_grouped,
                             const Eigen::VectorXd& counts) {
  return profile_grad(params, basis_grouped, grouped_labels(counts), counts);
}

namespace {

DrmFit trivial_fit(const MultiSample& ms, const PooledEmpirical& pooled,
                   const Eigen::MatrixXd& basis) {
  const auto n = pooled.size();
  DrmFit fit;
  fit.params.alpha.resize(0);
  fit.params.beta.resize(0, basis.cols());
  fit.pooled_points = pooled.points;
  fit.pop = pooled.population;
  fit.counts = ms.counts();
  fit.basis_values = basis;
  fit.weights = Eigen::ArrayXd::Constant(n, 1.0 / static_cast<double>(n));
  fit.tilt = Eigen::MatrixXd::Ones(n, 1);
  fit.cdf_steps.resize(n, 1);
  double cum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cum += fit.weights[i];
    fit.cdf_steps(i, 0) = cum;
  }
  fit.loglik = -static_cast<double>(n) * std::log(static_cast<double>(n));
  fit.converged = true;
  fit.iterations = 0;
  fit.grad_norm = 0.0;
  fit.constraint_residual = std::fabs(fit.weights.sum() - 1.0);
  return fit;
}

}  // namespace

DrmFit fit_drm(const MultiSample& ms, const PooledEmpirical& pooled,
               const Eigen::MatrixXd& basis_at_pooled) {
  if (basis_at_pooled.rows() != pooled.size()) {
    throw UsageError("el_drm.fit_drm", "basis rows do not match pooled points");
  }
  if (ms.m() == 0) {
    return trivial_fit(ms, pooled, basis_at_pooled);
  }
  if (basis_at_pooled.cols() < 1) {
    throw UsageError("el_drm.fit_drm", "basis must have at least one component");
  }

  const int m = ms.m();
  const int d = static_cast<int>(basis_at_pooled.cols());
  const Eigen::Index n = pooled.size();
  const Eigen::VectorXd counts = ms.counts();

  // Standardize each basis coordinate for conditioning; the fit is
  // reported in the original coordinates via the inverse affine map.
  Eigen::VectorXd mu(d);
  Eigen::VectorXd scale(d);
  Eigen::MatrixXd u(n, d);
  for (int j = 0; j < d; ++j) {
    mu[j] = basis_at_pooled.col(j).mean();
    const double var =
        (basis_at_pooled.col(j).array() - mu[j]).square().sum() / static_cast<double>(n);
    double sd = std::sqrt(var);
    if (!(sd > 1e-14 * (1.0 + std::fabs(mu[j])))) sd = 1.0;
    scale[j] = sd;
    u.col(j) = (basis_at_pooled.col(j).array() - mu[j]) / sd;
  }

  Objective obj(u, pooled.population, counts);
  const int dim = m * (1 + d);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);

  // Raw-coordinate gradient via the exact chain rule of the affine map.
  const auto certified_grad = [&](const Eigen::VectorXd& g_std) {
    Eigen::VectorXd g_raw(dim);
    for (int r = 0; r < m; ++r) {
      const int off = r * (1 + d);
      g_raw[off] = g_std[off];
      for (int j = 0; j < d; ++j) {
        g_raw[off + 1 + j] = mu[j] * g_std[off] + scale[j] * g_std[off + 1 + j];
      }
    }
    return g_raw;
  };

  constexpr double kTolStd = 3e-11;
  constexpr double kTolRaw = 1e-8;
  constexpr int kMaxIter = 200;
  constexpr double kArmijo = 1e-4;

  double ll = 0.0;
  double sup_std = std::numeric_limits<double>::infinity();
  double sup_raw = std::numeric_limits<double>::infinity();
  int iter = 0;

  const auto value_at = [&](const Eigen::VectorXd& t) {
    const DrmParams p = obj.unpack(t);
    return obj.value_from(p, obj.log_inner(obj.eta(p)));
  };
  const auto grad_norm_at = [&](const Eigen::VectorXd& t) {
    const DrmParams p = obj.unpack(t);
    const Eigen::MatrixXd e = obj.eta(p);
    const Eigen::VectorXd g = obj.gradient(obj.membership(e, obj.log_inner(e)));
    return g.lpNorm<Eigen::Infinity>();
  };

  for (iter = 0; iter < kMaxIter; ++iter) {
    const DrmParams p = obj.unpack(theta);
    const Eigen::MatrixXd e = obj.eta(p);
    const Eigen::VectorXd log_s = obj.log_inner(e);
    ll = obj.value_from(p, log_s);
    if (!std::isfinite(ll)) {
      throw NumericError("el_drm.fit_drm", "objective became nonfinite");
    }
    const Eigen::MatrixXd w = obj.membership(e, log_s);
    const Eigen::VectorXd g = obj.gradient(w);
    sup_std = g.lpNorm<Eigen::Infinity>();
    sup_raw = certified_grad(g).lpNorm<Eigen::Infinity>();
    if (sup_std < kTolStd && sup_raw < kTolRaw) break;

    const Eigen::MatrixXd neg_h = obj.neg_hessian(w);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neg_h);
    if (es.info() != Eigen::Success) {
      throw NumericError("el_drm.fit_drm", "Hessian eigendecomposition failed");
    }
    const double ev_max = std::max(es.eigenvalues().maxCoeff(), 1e-300);
    const double ev_min = es.eigenvalues().minCoeff();

    double damp = 0.0;
    if (ev_min < 1e-10 * ev_max) damp = 1e-10 * ev_max - ev_min;

    bool stepped = false;
    for (int attempt = 0; attempt < 40 && !stepped; ++attempt) {
      Eigen::VectorXd dir;
      if (attempt < 30) {
        const Eigen::VectorXd inv =
            (es.eigenvalues().array() + damp).inverse().matrix();
        dir = es.eigenvectors() * inv.asDiagonal() *
              (es.eigenvectors().transpose() * g);
      } else {
        // Gradient-ascent fallback once damping is exhausted.
        dir = g / std::max(g.norm(), 1e-300);
      }
      const double slope = g.dot(dir);
      if (slope > 0.0) {
        double t = 1.0;
        for (int h = 0; h < 60; ++h) {
          const double cand_ll = value_at(theta + t * dir);
          if (std::isfinite(cand_ll) && cand_ll >= ll + kArmijo * t * slope &&
              cand_ll > ll) {
            theta += t * dir;
            stepped = true;
            break;
          }
          t *= 0.5;
        }
        // Near the optimum the Newton gain drops below the objective's
        // floating-point resolution while the gradient is still well above
        // tolerance. Concavity makes the damped Newton step safe, so fall
        // back to accepting steps that contract the gradient norm.
        if (!stepped && attempt < 30) {
          for (double t2 : {1.0, 0.5, 0.25}) {
            const Eigen::VectorXd cand = theta + t2 * dir;
            if (std::isfinite(value_at(cand)) &&
                grad_norm_at(cand) < 0.9 * sup_std) {
              theta = cand;
              stepped = true;
              break;
            }
          }
        }
      }
      if (!stepped) damp = std::max(damp * 10.0, 1e-8 * ev_max);
    }
    if (!stepped) {
      ++iter;
      break;  // neither the objective nor the gradient can improve
    }
  }

  // Final state at the accepted iterate.
  const DrmParams p_std = obj.unpack(theta);
  const Eigen::MatrixXd e = obj.eta(p_std);
  const Eigen::VectorXd log_s = obj.log_inner(e);
  ll = obj.value_from(p_std, log_s);
  const Eigen::MatrixXd w = obj.membership(e, log_s);
  const Eigen::VectorXd g = obj.gradient(w);
  sup_std = g.lpNorm<Eigen::Infinity>();
  sup_raw = certified_grad(g).lpNorm<Eigen::Infinity>();

  const bool converged = sup_std < 1e-8 && sup_raw < 1e-8;
  if (!converged) {
    throw NumericError("el_drm.fit_drm",
                       "did not converge after " + std::to_string(iter) +
                           " iterations (gradient sup-norm " +
                           std::to_string(std::max(sup_std, sup_raw)) + ")");
  }

  DrmFit fit;
  fit.params.alpha.resize(m);
  fit.params.beta.resize(m, d);
  for (int r = 0; r < m; ++r) {
    double a = p_std.alpha[r];
    for (int j = 0; j < d; ++j) {
      const double braw = p_std.beta(r, j) / scale[j];
      fit.params.beta(r, j) = braw;
      a -= braw * mu[j];
    }
    fit.params.alpha[r] = a;
  }
  fit.pooled_points = pooled.points;
  fit.pop = pooled.population;
  fit.counts = counts;
  fit.basis_values = basis_at_pooled;
  fit.weights = (-log_s).array().exp();
  fit.tilt = e.array().exp().matrix();
  fit.cdf_steps.resize(n, m + 1);
  double residual = 0.0;
  for (int r = 0; r <= m; ++r) {
    double cum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      cum += fit.weights[i] * fit.tilt(i, r);
      fit.cdf_steps(i, r) = cum;
    }
    residual = std::max(residual, std::fabs(cum - 1.0));
  }
  fit.loglik = ll;
  fit.converged = converged;
  fit.iterations = iter;
  fit.grad_norm = std::max(sup_std, sup_raw);
  fit.constraint_residual = residual;
  return fit;
}

double DrmFit::cdf(int r, double x) const {
  if (r < 0 || r >= num_populations()) {
    throw UsageError("el_drm.fitted_cdf", "population index out of range");
  }
  const auto n = pooled_points.size();
  const double* begin = pooled_points.data();
  const auto idx = std::upper_bound(begin, begin + n, x) - begin;
  if (idx == 0) return 0.0;
  return cdf_steps(idx - 1, r);
}

double fitted_cdf(const DrmFit& fit, int r, double x) { return fit.cdf(r, x); }

}  // namespace drm
