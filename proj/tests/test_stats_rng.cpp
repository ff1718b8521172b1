#include <doctest.h>

#include <cmath>

#include "drm/errors.hpp"
#include "drm/rng.hpp"
#include "drm/stats.hpp"
#include "test_util.hpp"

using namespace drm;

TEST_SUITE("stats") {

TEST_CASE("normal pdf/cdf/quantile") {
  CHECK(norm_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(norm_pdf(1.0) == doctest::Approx(0.24197072451914337).epsilon(1e-15));
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(norm_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(norm_quantile(1e-4) == doctest::Approx(-3.7190164854556804).epsilon(1e-12));
  for (double p : {0.001, 0.1, 0.37, 0.5, 0.9, 0.9999}) {
    CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK_THROWS_AS(norm_quantile(0.0), UsageError);
}

TEST_CASE("regularized incomplete gamma") {
  CHECK(gamma_p(6.0, 4.0) == doctest::Approx(0.2148696129695948).epsilon(1e-12));
  CHECK(gamma_p(0.5, 0.25) == doctest::Approx(0.5204998778130466).epsilon(1e-12));
  CHECK(gamma_p(20.0, 30.0) == doctest::Approx(0.9781265315586091).epsilon(1e-12));
  CHECK(gamma_cdf(9.0, 6.0, 1.5) == doctest::Approx(0.5543203586353885).epsilon(1e-12));
  const double med = gamma_quantile(0.5, 6.0, 1.5);
  CHECK(med == doctest::Approx(8.505241783068104).epsilon(1e-8));
}

TEST_CASE("type-7 and type-1 quantiles") {
  Eigen::ArrayXd s(2);
  s << 0.0, 1.0;
  CHECK(quantile_type7(s, 0.25) == 0.25);
  CHECK(quantile_type7(s, 0.75) == 0.75);
  Eigen::ArrayXd five(5);
  five << 1, 2, 3, 4, 5;
  CHECK(quantile_type1(five, 0.5) == 3.0);
  CHECK(quantile_type1(five, 0.2) == 1.0);
  Eigen::ArrayXd four(4);
  four << 1, 2, 3, 4;
  CHECK(quantile_type1(four, 0.5) == 2.0);
}

TEST_CASE("weighted statistics reduce to unweighted at uniform weights") {
  RandomStream stream(5);
  Eigen::ArrayXd x = drm_test::normal_draws(stream, 101, 3.0, 2.0);
  std::sort(x.data(), x.data() + x.size());
  const Eigen::ArrayXd w = Eigen::ArrayXd::Constant(x.size(), 1.0 / 101.0);
  CHECK(weighted_sd(x, w) == doctest::Approx(sample_sd(x)).epsilon(1e-12));
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    CHECK(weighted_quantile_type7(x, w, p) ==
          doctest::Approx(quantile_type7(x, p)).epsilon(1e-12));
  }
  const double mu = weighted_mean(x, w);
  CHECK(mu == doctest::Approx(x.mean()).epsilon(1e-13));
}

TEST_CASE("quadrature and bisection") {
  const double one = adaptive_simpson(norm_pdf, -8.0, 8.0, 1e-12);
  CHECK(one == doctest::Approx(1.0).epsilon(1e-10));
  const double third =
      adaptive_simpson([](double x) { return x * x; }, 0.0, 1.0, 1e-12);
  CHECK(third == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  const double root = bisect_increasing(norm_cdf, -10.0, 10.0, 0.975, 1e-12);
  CHECK(root == doctest::Approx(1.959963984540054).epsilon(1e-9));
}

}  // TEST_SUITE

TEST_SUITE("rng") {

TEST_CASE("streams are deterministic and independent of interleaving") {
  RandomStream a(123);
  RandomStream b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(child_seed(1, 2) != child_seed(1, 3));
  CHECK(child_seed(1, 2) != child_seed(2, 2));
}

TEST_CASE("uniform draws live strictly inside (0,1)") {
  RandomStream s(99);
  double mn = 1.0, mx = 0.0, sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.next_uniform();
    mn = std::min(mn, u);
    mx = std::max(mx, u);
    sum += u;
  }
  CHECK(mn > 0.0);
  CHECK(mx < 1.0);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(2e-3));
}

TEST_CASE("normal and gamma moments") {
  RandomStream s(7);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.next_normal();
    sum += z;
    sum2 += z * z;
  }
  CHECK(std::fabs(sum / n) < 0.01);
  CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.01));

  double gsum = 0.0, gsum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = s.next_gamma(6.0);
    gsum += g;
    gsum2 += g * g;
  }
  const double mean = gsum / n;
  const double var = gsum2 / n - mean * mean;
  CHECK(mean == doctest::Approx(6.0).epsilon(0.01));
  CHECK(var == doctest::Approx(6.0).epsilon(0.05));
}

}  // TEST_SUITE
