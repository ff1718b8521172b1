#include "drm/pipeline.hpp"

#include "drm/errors.hpp"

namespace drm {

namespace {

std::shared_ptr<const LogRatioSet> ratios_from_bandwidths(
    const MultiSample& ms, const PooledEmpirical& pooled,
    const std::vector<double>& bandwidths, std::optional<double> floor_constant) {
  std::vector<BatchDensityFn> densities;
  densities.reserve(bandwidths.size());
  for (int r = 0; r < ms.num_populations(); ++r) {
    densities.push_back(
        kde_fit(ms.sample(r), bandwidths[static_cast<std::size_t>(r)],
                floor_constant, ms.total())
            .as_density_fn());
  }
  return std::make_shared<const LogRatioSet>(std::move(densities), pooled);
}

}  // namespace

BasisPipelineResult build_adaptive_basis(const MultiSample& ms,
                                         const PooledEmpirical& pooled,
                                         const BasisPipelineOptions& opt) {
  std::vector<double> bandwidths(static_cast<std::size_t>(ms.num_populations()));
  std::optional<double> chosen_k;
  switch (opt.bandwidth) {
    case BandwidthPolicy::kSilverman:
      for (int r = 0; r < ms.num_populations(); ++r) {
        bandwidths[static_cast<std::size_t>(r)] = silverman_bandwidth(ms.sample(r));
      }
      break;
    case BandwidthPolicy::kAdaptive: {
      const Eigen::ArrayXd grid =
          opt.k_grid.size() > 0 ? opt.k_grid : default_k_grid();
      const BandwidthSelection sel =
          select_bandwidth(ms, pooled, opt.family, grid, 2, opt.kde_floor);
      bandwidths = sel.bandwidths;
      chosen_k = sel.k;
      break;
    }
    case BandwidthPolicy::kFixed:
      if (!(opt.fixed_bandwidth > 0.0)) {
        throw UsageError("pipeline", "fixed bandwidth must be positive");
      }
      for (auto& h : bandwidths) h = opt.fixed_bandwidth;
      break;
  }

  auto ratios = ratios_from_bandwidths(ms, pooled, bandwidths, opt.kde_floor);
  const EigenSystem eig = eigensystem(m_hat(*ratios, pooled));

  DSelection selection;
  int d = opt.fixed_d;
  if (d <= 0) {
    selection = select_d(std::shared_ptr<const LogRatioSet>(ratios), ms, pooled,
                         eig, opt.threshold, opt.bic_max);
    d = selection.d;
  }

  AdaptiveBasis basis = build_basis(ratios, eig, d);
  basis.provenance.bandwidths = bandwidths;
  basis.provenance.chosen_k = chosen_k;
  basis.provenance.kde_floor = opt.kde_floor;
  basis.provenance.j1 = selection.j1;
  basis.provenance.j2 = selection.j2;

  BasisPipelineResult out{std::move(bandwidths), chosen_k,   std::move(ratios),
                          eig,                   selection,  std::move(basis)};
  return out;
}

AdaptiveBasis rebuild_basis(const MultiSample& ms, const PooledEmpirical& pooled,
                            const std::vector<double>& bandwidths,
                            std::optional<double> kde_floor,
                            const Eigen::VectorXd& lambdas,
                            const Eigen::MatrixXd& eigvecs) {
  if (bandwidths.size() != static_cast<std::size_t>(ms.num_populations())) {
    throw DataError("pipeline.rebuild_basis",
                    "stored bandwidth count does not match the data");
  }
  if (lambdas.size() == 0 || !(lambdas.minCoeff() > 0.0) ||
      eigvecs.rows() != ms.num_populations() || eigvecs.cols() != lambdas.size()) {
    throw DataError("pipeline.rebuild_basis", "stored eigensystem is invalid");
  }
  auto ratios = ratios_from_bandwidths(ms, pooled, bandwidths, kde_floor);
  AdaptiveBasis basis(std::move(ratios), lambdas, eigvecs);
  basis.provenance.bandwidths = bandwidths;
  basis.provenance.kde_floor = kde_floor;
  return basis;
}

}  // namespace drm
