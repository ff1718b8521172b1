#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "drm/baselines.hpp"
#include "drm/errors.hpp"
#include "drm/kde.hpp"
#include "drm/rng.hpp"
#include "test_util.hpp"

using namespace drm;

namespace {

MultiSample mixed_normals(std::uint64_t seed, Eigen::Index n) {
  RandomStream stream(seed);
  return MultiSample({drm_test::normal_draws(stream, n, 0.0, 1.0),
                      drm_test::normal_draws(stream, n, 0.8, 1.3),
                      drm_test::normal_draws(stream, n, -0.5, 0.9)});
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("rank errors") {
  RandomStream stream(3);
  const Eigen::ArrayXd x = drm_test::normal_draws(stream, 100, 0.0, 1.0);
  // identical samples: centered densities vanish
  CHECK_THROWS_AS(ku_fit(MultiSample({x, x}), 1), NumericError);
  // single population: no deviation from the mean at all
  CHECK_THROWS_AS(ku_fit(MultiSample({x}), 1), NumericError);
  // L beyond m
  const MultiSample ms = mixed_normals(5, 80);
  CHECK_THROWS_AS(ku_fit(ms, 3), NumericError);
  CHECK_THROWS_AS(ku_fit(ms, 0), UsageError);
}

TEST_CASE("gram route equals direct grid pca") {
  const MultiSample ms = mixed_normals(7, 200);
  const KuModel model = ku_fit(ms, 2, 256);

  // Direct oracle: SVD of the centered density matrix under the grid
  // quadrature scaling; rank-L reconstruction via the left singular basis.
  const int pops = ms.num_populations();
  Eigen::MatrixXd densities(pops, model.grid.size());
  for (int r = 0; r < pops; ++r) {
    KdeEstimate kde(ms.sample(r), silverman_bandwidth(ms.sample(r)));
    densities.row(r) = kde(model.grid).matrix().transpose();
  }
  const Eigen::RowVectorXd mean = densities.colwise().mean();
  const Eigen::MatrixXd centered = densities.rowwise() - mean;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      centered * std::sqrt(model.dx),
      Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd u2 = svd.matrixU().leftCols(2);
  const Eigen::MatrixXd recon =
      (u2 * (u2.transpose() * centered)).rowwise() + mean;
  CHECK((recon - model.reconstructed).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("grid orthonormality and parseval identity") {
  const MultiSample ms = mixed_normals(11, 150);
  const KuModel model = ku_fit(ms, 1, 512);

  const Eigen::MatrixXd gram = model.dx * (model.phi.transpose() * model.phi);
  CHECK((gram - Eigen::MatrixXd::Identity(1, 1)).cwiseAbs().maxCoeff() < 1e-8);

  // residual energy equals the discarded eigenvalue mass
  const int pops = ms.num_populations();
  Eigen::MatrixXd densities(pops, model.grid.size());
  for (int r = 0; r < pops; ++r) {
    KdeEstimate kde(ms.sample(r), silverman_bandwidth(ms.sample(r)));
    densities.row(r) = kde(model.grid).matrix().transpose();
  }
  const Eigen::MatrixXd centered =
      densities.rowwise() - model.mean_density.transpose();
  const Eigen::MatrixXd kept = model.theta * model.phi.transpose();
  const double resid = model.dx * (centered - kept).squaredNorm();
  const double discarded =
      model.gram_eigenvalues.tail(model.gram_eigenvalues.size() - 1).sum();
  CHECK(resid == doctest::Approx(discarded).epsilon(1e-8));

  // eigenvalue mass is nonincreasing
  for (Eigen::Index j = 1; j < model.gram_eigenvalues.size(); ++j) {
    CHECK(model.gram_eigenvalues[j] <= model.gram_eigenvalues[j - 1] + 1e-15);
  }
}

TEST_CASE("ku quantiles behave") {
  RandomStream stream(13);
  const MultiSample ms({drm_test::normal_draws(stream, 10000, 0.0, 1.0),
                        drm_test::normal_draws(stream, 10000, 0.0, 1.0)});
  const KuModel model = ku_fit(ms, 1);
  CHECK(std::fabs(ku_quantile(model, 0, 0.5)) < 0.05);
  // tau -> 0+ lands at the lower edge of the grid (first positive mass)
  CHECK(ku_quantile(model, 0, 1e-12) <= model.grid[1]);
  double prev = -1e300;
  for (double tau = 0.05; tau < 1.0; tau += 0.05) {
    const double q = ku_quantile(model, 0, tau);
    CHECK(q >= prev);
    prev = q;
  }
  CHECK_THROWS_AS(ku_quantile(model, 0, 0.0), UsageError);
  CHECK_THROWS_AS(ku_quantile(model, 5, 0.5), UsageError);
}

}  // TEST_SUITE
