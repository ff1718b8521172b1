#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>

#include "drm/errors.hpp"
#include "drm/fpca_basis.hpp"
#include "drm/kde.hpp"
#include "drm/rng.hpp"
#include "drm/stats.hpp"
#include "test_util.hpp"

using namespace drm;

namespace {

BatchDensityFn normal_density(double mean, double var) {
  return [mean, var](const Eigen::ArrayXd& xs) {
    const double sd = std::sqrt(var);
    return ((-0.5 * ((xs - mean) / sd).square()).exp() * (kInvSqrt2Pi / sd)).eval();
  };
}

MultiSample three_normals(std::uint64_t seed, Eigen::Index n) {
  RandomStream stream(seed);
  return MultiSample({drm_test::normal_draws(stream, n, 18.0, 2.4),
                      drm_test::normal_draws(stream, n, 18.6, 2.5),
                      drm_test::normal_draws(stream, n, 17.4, 2.3)});
}

std::shared_ptr<const LogRatioSet> kde_ratios(const MultiSample& ms,
                                              const PooledEmpirical& pooled,
                                              const std::vector<double>& hs) {
  std::vector<BatchDensityFn> densities;
  for (int r = 0; r < ms.num_populations(); ++r) {
    densities.push_back(kde_fit(ms.sample(r), hs[r]).as_density_fn());
  }
  return std::make_shared<const LogRatioSet>(std::move(densities), pooled);
}

}  // namespace

TEST_SUITE("fpca_basis") {

TEST_CASE("identical samples give identically zero centered ratios") {
  RandomStream stream(5);
  const Eigen::ArrayXd x = drm_test::normal_draws(stream, 80, 0.0, 1.0);
  const MultiSample ms({x, x, x});
  const PooledEmpirical pooled = pool(ms);
  const auto lr = kde_ratios(ms, pooled, {0.4, 0.4, 0.4});
  CHECK(lr->centered_at_pooled().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("centering identities") {
  RandomStream stream(9);
  const MultiSample ms({drm_test::normal_draws(stream, 90, 0.0, 1.0),
                        drm_test::normal_draws(stream, 70, 0.8, 1.2)});
  const PooledEmpirical pooled = pool(ms);
  const auto lr = kde_ratios(ms, pooled, {0.45, 0.5});
  const Eigen::MatrixXd& qc = lr->centered_at_pooled();
  // m=1: the two centered rows are mirror images.
  CHECK((qc.row(0) + qc.row(1)).cwiseAbs().maxCoeff() < 1e-12);
  // every row has pooled mean zero
  CHECK(std::fabs(qc.row(0).mean()) < 1e-12);
  CHECK(std::fabs(qc.row(1).mean()) < 1e-12);
}

TEST_CASE("exact normal densities give the closed-form log ratio") {
  RandomStream stream(13);
  const MultiSample ms({drm_test::normal_draws(stream, 120, 0.0, 1.0),
                        drm_test::normal_draws(stream, 120, 1.0, 1.0)});
  const PooledEmpirical pooled = pool(ms);
  const LogRatioSet lr({normal_density(0.0, 1.0), normal_density(1.0, 1.0)},
                       pooled);
  const Eigen::ArrayXd q1 = pooled.points - 0.5;
  const Eigen::ArrayXd expect = q1 - q1.mean();  // Q-hat_1
  // cached row 1 is the cross-centered version, Q-hat_1 / 2
  const Eigen::ArrayXd got = 2.0 * lr.centered_at_pooled().row(1).transpose().array();
  CHECK((got - expect).abs().maxCoeff() < 1e-12);
}

TEST_CASE("log_ratios reports the failing population and point") {
  Eigen::ArrayXd tight(3);
  tight << 0.0, 0.001, 0.002;
  Eigen::ArrayXd far(3);
  far << 100.0, 100.001, 100.002;
  const MultiSample ms({tight, far});
  const PooledEmpirical pooled = pool(ms);
  std::vector<BatchDensityFn> densities = {
      kde_fit(tight, 0.001).as_density_fn(), kde_fit(far, 0.001).as_density_fn()};
  try {
    const LogRatioSet lr(std::move(densities), pooled);
    FAIL("expected an evaluation error");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("population") != std::string::npos);
  }
}

TEST_CASE("m_hat closed form and brute force") {
  RandomStream stream(13);
  const MultiSample ms({drm_test::normal_draws(stream, 100, 0.0, 1.0),
                        drm_test::normal_draws(stream, 80, 1.0, 1.0)});
  const PooledEmpirical pooled = pool(ms);
  const LogRatioSet lr({normal_density(0.0, 1.0), normal_density(1.0, 1.0)},
                       pooled);
  const Eigen::MatrixXd m = m_hat(lr, pooled);

  const Eigen::ArrayXd q1 = pooled.points - 0.5;
  const Eigen::ArrayXd q1c = q1 - q1.mean();
  const double v = q1c.square().mean();
  CHECK(m(0, 0) == doctest::Approx(v / 4.0).epsilon(1e-12));
  CHECK(m(0, 1) == doctest::Approx(-v / 4.0).epsilon(1e-12));
  CHECK(m == m.transpose());

  // brute-force double loop
  const Eigen::MatrixXd& qc = lr.centered_at_pooled();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (Eigen::Index t = 0; t < pooled.size(); ++t) acc += qc(i, t) * qc(j, t);
      acc /= static_cast<double>(pooled.size());
      CHECK(m(i, j) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
  // row sums vanish because the centered ratios sum to zero pointwise
  CHECK(m.rowwise().sum().cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("eigensystem closed forms") {
  Eigen::MatrixXd m(2, 2);
  const double v = 1.25;
  m << v / 4, -v / 4, -v / 4, v / 4;
  const EigenSystem eig = eigensystem(m);
  CHECK(eig.values[0] == doctest::Approx(0.625).epsilon(1e-14));
  CHECK(std::fabs(eig.values[1]) < 1e-15);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(eig.vectors(0, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  CHECK(eig.vectors(1, 0) == doctest::Approx(-inv_sqrt2).epsilon(1e-12));

  const Eigen::MatrixXd ci = 3.5 * Eigen::MatrixXd::Identity(4, 4);
  const EigenSystem e2 = eigensystem(ci);
  CHECK((e2.values.array() == 3.5).all());

  const EigenSystem e3 = eigensystem(Eigen::MatrixXd::Zero(3, 3));
  CHECK(e3.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK((e3.vectors.transpose() * e3.vectors -
         Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("eigenvalues descend and the sign rule fixes orientation") {
  RandomStream stream(77);
  Eigen::MatrixXd a(5, 5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) a(i, j) = stream.next_normal();
  }
  const Eigen::MatrixXd sym = a * a.transpose();
  const EigenSystem eig = eigensystem(sym);
  for (int j = 1; j < 5; ++j) CHECK(eig.values[j] <= eig.values[j - 1]);
  for (int j = 0; j < 5; ++j) {
    Eigen::Index at;
    eig.vectors.col(j).cwiseAbs().maxCoeff(&at);
    CHECK(eig.vectors(at, j) > 0.0);
    CHECK(eig.vectors.col(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("build_basis normalizes and rejects rank-deficient requests") {
  RandomStream stream(19);
  const MultiSample ms({drm_test::normal_draws(stream, 150, 0.0, 1.0),
                        drm_test::normal_draws(stream, 150, 1.0, 1.0)});
  const PooledEmpirical pooled = pool(ms);
  auto lr = std::make_shared<const LogRatioSet>(
      std::vector<BatchDensityFn>{normal_density(0.0, 1.0),
                                  normal_density(1.0, 1.0)},
      pooled);
  const EigenSystem eig = eigensystem(m_hat(*lr, pooled));
  const AdaptiveBasis basis = build_basis(lr, eig, 1);
  const Eigen::VectorXd psi0 = basis.values_at_pooled().col(0);
  CHECK(psi0.squaredNorm() / pooled.size() == doctest::Approx(1.0).epsilon(1e-10));
  // psi_0 is proportional to the centered ratio row
  const Eigen::VectorXd qc1 = lr->centered_at_pooled().row(1).transpose();
  const double scale = psi0.dot(qc1) / qc1.squaredNorm();
  CHECK((psi0 - scale * qc1).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(build_basis(lr, eig, 2), UsageError);  // d > m
  CHECK_THROWS_AS(build_basis(lr, eig, 0), UsageError);

  // rank-deficient request within the d <= m precondition: two of the
  // three populations are identical, so the second eigenvalue vanishes
  RandomStream stream2(77);
  const Eigen::ArrayXd shared = drm_test::normal_draws(stream2, 120, 1.0, 1.0);
  const MultiSample ms3({drm_test::normal_draws(stream2, 120, 0.0, 1.0), shared,
                         shared});
  const PooledEmpirical pooled3 = pool(ms3);
  auto lr3 = std::make_shared<const LogRatioSet>(
      std::vector<BatchDensityFn>{normal_density(0.0, 1.0),
                                  normal_density(1.0, 1.0),
                                  normal_density(1.0, 1.0)},
      pooled3);
  const EigenSystem eig3 = eigensystem(m_hat(*lr3, pooled3));
  CHECK_THROWS_AS(build_basis(lr3, eig3, 2), NumericError);
}

TEST_CASE("basis evaluation off the pooled grid reuses frozen constants") {
  const MultiSample ms = three_normals(21, 100);
  const PooledEmpirical pooled = pool(ms);
  const auto lr = kde_ratios(ms, pooled, {0.8, 0.8, 0.8});
  const EigenSystem eig = eigensystem(m_hat(*lr, pooled));
  const AdaptiveBasis basis = build_basis(lr, eig, 2);
  // at pooled points the two evaluation paths agree
  const Eigen::MatrixXd direct = basis.evaluate(pooled.points);
  CHECK((direct - basis.values_at_pooled()).cwiseAbs().maxCoeff() < 1e-12);
  // orthonormality under the pooled measure
  const Eigen::MatrixXd gram =
      basis.values_at_pooled().transpose() * basis.values_at_pooled() /
      static_cast<double>(pooled.size());
  CHECK((gram - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
}

// Synthetic exact construction around Theorem 1: orthonormal q under a
// discrete measure, arbitrary coefficients, M assembled brute force; the
// eigen route must recover span(q) and reproduce M's action.
TEST_CASE("theorem 1 oracle") {
  const int points = 100;
  const Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(points, -1.5, 2.0);
  const Eigen::ArrayXd w = Eigen::ArrayXd::Constant(points, 1.0 / points);

  // Orthonormalize {x, x^2 - c} under the discrete measure (Gram-Schmidt
  // with centering first so both have mean zero).
  Eigen::MatrixXd q(points, 2);
  Eigen::ArrayXd x1 = t - (t * w).sum();
  x1 /= std::sqrt((x1.square() * w).sum());
  Eigen::ArrayXd x2 = t.square() - (t.square() * w).sum();
  x2 -= ((x2 * x1 * w).sum()) * x1;
  x2 /= std::sqrt((x2.square() * w).sum());
  q.col(0) = x1.matrix();
  q.col(1) = x2.matrix();

  const int pops = 4;  // m = 3
  Eigen::MatrixXd beta(pops, 2);
  beta << 0.0, 0.0, 1.0, -0.5, 0.3, 0.8, -1.2, 0.4;
  const Eigen::MatrixXd centered_beta =
      beta.rowwise() - beta.colwise().mean();
  // Q^c_k(t_i), exact by construction
  const Eigen::MatrixXd qc = centered_beta * q.transpose();

  // Brute-force M(i,j) = sum_t w_t Qc_i Qc_j
  Eigen::MatrixXd m(pops, pops);
  for (int i = 0; i < pops; ++i) {
    for (int j = 0; j < pops; ++j) {
      double acc = 0.0;
      for (int k = 0; k < points; ++k) acc += w[k] * qc(i, k) * qc(j, k);
      m(i, j) = acc;
    }
  }

  const EigenSystem eig = eigensystem(m);
  // rank is exactly 2
  CHECK(eig.values[1] > 1e-6);
  CHECK(std::fabs(eig.values[2]) < 1e-12 * eig.values[0]);
  CHECK(std::fabs(eig.values[3]) < 1e-12 * eig.values[0]);

  // independent eigenvalue route: squared singular values of the
  // coefficient matrix (q is orthonormal under the measure)
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered_beta);
  CHECK(eig.values[0] ==
        doctest::Approx(svd.singularValues()[0] * svd.singularValues()[0])
            .epsilon(1e-10));
  CHECK(eig.values[1] ==
        doctest::Approx(svd.singularValues()[1] * svd.singularValues()[1])
            .epsilon(1e-10));

  // Theorem 1(ii): psi_j = lambda_j^{-1/2} sum_k p_kj Qc_k
  Eigen::MatrixXd psi(points, 2);
  for (int j = 0; j < 2; ++j) {
    psi.col(j) = qc.transpose() * eig.vectors.col(j) / std::sqrt(eig.values[j]);
  }
  // orthonormal under the measure
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double ip = (psi.col(i).array() * psi.col(j).array() * w).sum();
      CHECK(ip == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    }
  }
  // spans coincide
  CHECK(drm_test::max_principal_angle(psi, q, w) < 1e-8);
  // residual of the eigen equation against the brute-force M
  const Eigen::MatrixXd resid =
      m * eig.vectors - eig.vectors * eig.values.asDiagonal();
  CHECK(resid.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("threshold rank and BIC helpers") {
  Eigen::VectorXd lambdas(6);
  lambdas << 0.80, 0.15, 0.05, 0.0, 0.0, 0.0;
  CHECK(threshold_rank(lambdas, 0.95) == 2);
  CHECK(threshold_rank(lambdas, 0.96) == 3);
  CHECK(threshold_rank(lambdas, 0.5) == 1);
  CHECK(bic_value(-100.0, 5, 2, 3000) ==
        doctest::Approx(280.06367567650244).epsilon(1e-14));
}

TEST_CASE("select_d end to end") {
  const MultiSample ms = three_normals(25, 200);
  const PooledEmpirical pooled = pool(ms);
  const auto lr = kde_ratios(ms, pooled, {0.7, 0.7, 0.7});
  const EigenSystem eig = eigensystem(m_hat(*lr, pooled));
  const DSelection sel = select_d(lr, ms, pooled, eig, 0.95, 2);
  CHECK(sel.d == std::max(sel.j1, sel.j2));
  CHECK(sel.d >= 1);
  CHECK(sel.d <= 2);
  // j2 must agree with the recorded BIC values (ties toward smaller J)
  int best = 0;
  double best_bic = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < sel.bic.size(); ++j) {
    if (!std::isnan(sel.bic[j]) && sel.bic[j] < best_bic) {
      best_bic = sel.bic[j];
      best = static_cast<int>(j) + 1;
    }
  }
  CHECK(sel.j2 == best);
  CHECK(sel.variance_explained[ms.m()] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("base relabeling preserves eigenvalues and spans") {
  const MultiSample ms = three_normals(29, 150);
  const std::vector<double> hs = {0.8, 0.85, 0.75};
  const MultiSample permuted({ms.sample(2), ms.sample(0), ms.sample(1)});
  const std::vector<double> hs_permuted = {hs[2], hs[0], hs[1]};

  const PooledEmpirical pa = pool(ms);
  const PooledEmpirical pb = pool(permuted);
  CHECK((pa.points == pb.points).all());

  const auto la = kde_ratios(ms, pa, hs);
  const auto lb = kde_ratios(permuted, pb, hs_permuted);
  const EigenSystem ea = eigensystem(m_hat(*la, pa));
  const EigenSystem eb = eigensystem(m_hat(*lb, pb));
  CHECK((ea.values - eb.values).cwiseAbs().maxCoeff() < 1e-10);

  const AdaptiveBasis ba = build_basis(la, ea, 2);
  const AdaptiveBasis bb = build_basis(lb, eb, 2);
  const Eigen::ArrayXd w = Eigen::ArrayXd::Constant(pa.size(), 1.0 / pa.size());
  CHECK(drm_test::max_principal_angle(ba.values_at_pooled(),
                                      bb.values_at_pooled(), w) < 1e-8);
}

TEST_CASE("scale-location equivariance") {
  const MultiSample ms = three_normals(33, 150);
  const std::vector<double> hs = {0.8, 0.85, 0.75};
  const double a = 2.5;
  const double b = -7.0;
  std::vector<Eigen::ArrayXd> mapped;
  for (int r = 0; r < 3; ++r) mapped.push_back(a * ms.sample(r) + b);
  const MultiSample ms2(std::move(mapped));
  const std::vector<double> hs2 = {a * hs[0], a * hs[1], a * hs[2]};

  const PooledEmpirical p1 = pool(ms);
  const PooledEmpirical p2 = pool(ms2);
  const auto l1 = kde_ratios(ms, p1, hs);
  const auto l2 = kde_ratios(ms2, p2, hs2);
  const Eigen::MatrixXd m1 = m_hat(*l1, p1);
  const Eigen::MatrixXd m2 = m_hat(*l2, p2);
  CHECK((m1 - m2).cwiseAbs().maxCoeff() < 1e-8);

  const EigenSystem e1 = eigensystem(m1);
  const EigenSystem e2 = eigensystem(m2);
  CHECK((e1.values - e2.values).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((e1.vectors - e2.vectors).cwiseAbs().maxCoeff() < 1e-6);

  const AdaptiveBasis b1 = build_basis(l1, e1, 2);
  const AdaptiveBasis b2 = build_basis(l2, e2, 2);
  // psi_new(a x + b) = psi_old(x); pooled points map onto each other
  CHECK((b1.values_at_pooled() - b2.values_at_pooled()).cwiseAbs().maxCoeff() <
        1e-8);
}

}  // TEST_SUITE
