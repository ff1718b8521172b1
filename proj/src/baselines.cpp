#include "drm/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "drm/errors.hpp"
#include "drm/fpca_basis.hpp"
#include "drm/kde.hpp"

namespace drm {

KuModel ku_fit(const MultiSample& ms, int num_components, int grid_size) {
  if (num_components < 1) {
    throw UsageError("baselines.ku_fit", "L must be at least 1");
  }
  if (grid_size < 16) {
    throw UsageError("baselines.ku_fit", "grid size too small");
  }
  const int pops = ms.num_populations();
  if (num_components > ms.m()) {
    throw NumericError("baselines.ku_fit",
                       "L=" + std::to_string(num_components) +
                           " exceeds the numerical rank of the centered densities");
  }

  double lo = ms.sample(0).minCoeff();
  double hi = ms.sample(0).maxCoeff();
  double h_max = 0.0;
  std::vector<KdeEstimate> kdes;
  kdes.reserve(static_cast<std::size_t>(pops));
  for (int r = 0; r < pops; ++r) {
    lo = std::min(lo, ms.sample(r).minCoeff());
    hi = std::max(hi, ms.sample(r).maxCoeff());
    const double h = silverman_bandwidth(ms.sample(r));
    h_max = std::max(h_max, h);
    kdes.emplace_back(ms.sample(r), h);
  }

  KuModel model;
  model.num_components = num_components;
  model.grid.setLinSpaced(grid_size, lo - 3.0 * h_max, hi + 3.0 * h_max);
  model.dx = (model.grid[grid_size - 1] - model.grid[0]) /
             static_cast<double>(grid_size - 1);

  Eigen::MatrixXd densities(pops, grid_size);
  for (int r = 0; r < pops; ++r) {
    densities.row(r) = kdes[static_cast<std::size_t>(r)](model.grid).matrix().transpose();
  }
  model.mean_density = densities.colwise().mean().transpose();
  const Eigen::MatrixXd centered =
      densities.rowwise() - model.mean_density.transpose();

  // Gram matrix under grid quadrature, then the Karhunen-Loeve step.
  const Eigen::MatrixXd gram = model.dx * (centered * centered.transpose());
  const EigenSystem eig = eigensystem(gram);
  model.gram_eigenvalues = eig.values;
  if (!(eig.values[0] > 0.0) ||
      !(eig.values[num_components - 1] > kEigenvalueCutoff * eig.values[0])) {
    throw NumericError("baselines.ku_fit",
                       "L=" + std::to_string(num_components) +
                           " exceeds the numerical rank of the centered densities");
  }

  model.phi.resize(grid_size, num_components);
  for (int j = 0; j < num_components; ++j) {
    model.phi.col(j) =
        centered.transpose() * eig.vectors.col(j) / std::sqrt(eig.values[j]);
  }
  model.theta = model.dx * (centered * model.phi);
  model.reconstructed =
      (model.theta * model.phi.transpose()).rowwise() + model.mean_density.transpose();
  return model;
}

double ku_quantile(const KuModel& model, int r, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw UsageError("baselines.ku_quantile", "quantile level must lie in (0,1)");
  }
  if (r < 0 || r >= model.reconstructed.rows()) {
    throw UsageError("baselines.ku_quantile", "population index out of range");
  }
  const auto g = model.grid.size();
  Eigen::ArrayXd cdf(g);
  cdf[0] = 0.0;
  for (Eigen::Index i = 1; i < g; ++i) {
    cdf[i] = cdf[i - 1] + 0.5 * model.dx * (model.reconstructed(r, i - 1) +
                                            model.reconstructed(r, i));
  }
  // Monotone envelope: negative density stretches cannot lower the CDF.
  double run = 0.0;
  for (Eigen::Index i = 0; i < g; ++i) {
    run = std::max(run, cdf[i]);
    cdf[i] = run;
  }
  const double total = cdf[g - 1];
  if (total < 0.99) {
    throw NumericError("baselines.ku_quantile",
                       "reconstructed mass " + std::to_string(total) +
                           " below 0.99; increase the grid or reduce L");
  }
  const double target = tau * total;
  for (Eigen::Index i = 0; i < g; ++i) {
    if (cdf[i] >= target) return model.grid[i];
  }
  return model.grid[g - 1];
}

}  // namespace drm
