#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "drm/el_drm.hpp"
#include "drm/errors.hpp"
#include "drm/estimators.hpp"
#include "drm/kde.hpp"
#include "drm/stats.hpp"
#include "drm/rng.hpp"
#include "test_util.hpp"

using namespace drm;

namespace {

DrmFit uniform_fit(const Eigen::ArrayXd& values) {
  const MultiSample ms({values});
  const PooledEmpirical pooled = pool(ms);
  return fit_drm(ms, pooled, Eigen::MatrixXd(values.size(), 0));
}

DrmFit shifted_fit(std::uint64_t seed, Eigen::Index n, double shift) {
  RandomStream stream(seed);
  const MultiSample ms({drm_test::normal_draws(stream, n, 0.0, 1.0),
                        drm_test::normal_draws(stream, n, shift, 1.0)});
  const PooledEmpirical pooled = pool(ms);
  return fit_drm(ms, pooled, pooled.points.matrix());
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("uniform-weight quantiles follow the inf rule") {
  Eigen::ArrayXd x(5);
  x << 1, 2, 3, 4, 5;
  const DrmFit fit = uniform_fit(x);
  CHECK(drm_quantile(fit, 0, 0.5) == 3.0);
  CHECK(drm_quantile(fit, 0, 0.2) == 1.0);
  CHECK_THROWS_AS(drm_quantile(fit, 0, 0.0), UsageError);
  CHECK_THROWS_AS(drm_quantile(fit, 0, 1.0), UsageError);
}

TEST_CASE("quantile inverse property on a real fit") {
  const DrmFit fit = shifted_fit(3, 200, 0.8);
  for (int r = 0; r < 2; ++r) {
    for (Eigen::Index i = 0; i < fit.pooled_points.size(); ++i) {
      const double g = fit.cdf(r, fit.pooled_points[i]);
      if (g > 0.0 && g < 1.0) {
        CHECK(drm_quantile(fit, r, g) <= fit.pooled_points[i]);
      }
    }
  }
}

TEST_CASE("quantiles are nondecreasing in the level") {
  const DrmFit fit = shifted_fit(5, 150, 0.5);
  for (int r = 0; r < 2; ++r) {
    double prev = -1e300;
    for (double tau = 0.05; tau < 1.0; tau += 0.05) {
      const double q = drm_quantile(fit, r, tau);
      CHECK(q >= prev);
      prev = q;
    }
  }
}

TEST_CASE("empirical quantile examples") {
  Eigen::ArrayXd five(5);
  five << 1, 2, 3, 4, 5;
  CHECK(empirical_quantile(five, 0.5) == 3.0);
  Eigen::ArrayXd four(4);
  four << 4, 3, 2, 1;  // unsorted input
  CHECK(empirical_quantile(four, 0.5) == 2.0);

  RandomStream stream(7);
  const Eigen::ArrayXd big = drm_test::normal_draws(stream, 10000, 0.0, 1.0);
  CHECK(std::fabs(empirical_quantile(big, 0.5)) < 0.05);
}

TEST_CASE("m=0 reductions are exact") {
  RandomStream stream(11);
  Eigen::ArrayXd x = drm_test::normal_draws(stream, 257, 4.0, 2.0);
  std::sort(x.data(), x.data() + x.size());
  const DrmFit fit = uniform_fit(x);

  // quantiles: identical to the plain empirical rule at off-lattice levels
  for (double tau : {0.1234, 1.0 / 3.0, 0.5071, 0.777, 0.9813}) {
    CHECK(drm_quantile(fit, 0, tau) == empirical_quantile(x, tau));
  }

  // bandwidth: the weighted Silverman rule collapses to the plain one
  const double h_plain = silverman_bandwidth(x);
  CHECK(drm_density_bandwidth(fit, 0) == h_plain);

  // density: same weighted kernel sum, same point order, same weights
  const KdeEstimate plain = kde_fit(x, h_plain);
  for (double q : {-1.0, 3.5, 4.0, 8.25}) {
    CHECK(drm_density(fit, 0, q) == plain(q));
  }
}

TEST_CASE("concentrated weights reproduce a single kernel") {
  Eigen::ArrayXd pts(3);
  pts << -1.0, 0.0, 2.0;
  Eigen::ArrayXd w = Eigen::ArrayXd::Zero(3);
  w[1] = 1.0;
  const double h = 0.7;
  for (double x : {-0.5, 0.0, 1.3}) {
    const double expect = norm_pdf(x / h) / h;
    CHECK(weighted_gauss_mixture(pts, w, h, x) ==
          doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("drm density integrates to one and stays nonnegative") {
  const DrmFit fit = shifted_fit(13, 300, 1.0);
  for (int r = 0; r < 2; ++r) {
    const double h = drm_density_bandwidth(fit, r);
    const double lo = fit.pooled_points.minCoeff() - 10.0 * h;
    const double hi = fit.pooled_points.maxCoeff() + 10.0 * h;
    const Eigen::ArrayXd grid = Eigen::ArrayXd::LinSpaced(4096, lo, hi);
    const Eigen::ArrayXd v = drm_density_curve(fit, r, grid);
    CHECK((v >= 0.0).all());
    const double dx = (hi - lo) / 4095.0;
    const double mass = dx * (v.sum() - 0.5 * (v[0] + v[4095]));
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
}

}  // TEST_SUITE
