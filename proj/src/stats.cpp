#include "drm/stats.hpp"

#include <cmath>
#include <limits>

#include "drm/errors.hpp"

namespace drm {

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw UsageError("stats.norm_quantile", "level must lie in (0,1)");
  }
  // Peter Acklam's rational approximation, polished with two Newton steps.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int i = 0; i < 2; ++i) {
    const double e = norm_cdf(x) - p;
    x -= e / norm_pdf(x);
  }
  return x;
}

namespace {

// Series expansion of P(a,x), valid for x < a+1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a,x), valid for x >= a+1 (modified Lentz).
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw UsageError("stats.gamma_p", "shape must be positive");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double gamma_cdf(double x, double shape, double scale) {
  return gamma_p(shape, x / scale);
}

double gamma_quantile(double p, double shape, double scale) {
  if (!(p > 0.0 && p < 1.0)) {
    throw UsageError("stats.gamma_quantile", "level must lie in (0,1)");
  }
  const double mean = shape * scale;
  const double sd = std::sqrt(shape) * scale;
  double hi = mean + 20.0 * sd;
  while (gamma_cdf(hi, shape, scale) < p) hi *= 2.0;
  return bisect_increasing([&](double x) { return gamma_cdf(x, shape, scale); },
                           0.0, hi, p);
}

double sample_sd(const Eigen::ArrayXd& x) {
  const auto n = x.size();
  if (n < 2) throw DataError("stats.sample_sd", "need at least two observations");
  const double mu = x.mean();
  return std::sqrt((x - mu).square().sum() / static_cast<double>(n - 1));
}

double quantile_type7(const Eigen::ArrayXd& sorted, double p) {
  const auto n = sorted.size();
  if (n == 0) throw DataError("stats.quantile_type7", "empty sample");
  if (n == 1) return sorted[0];
  const double pos = (static_cast<double>(n) - 1.0) * p;
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  if (lo >= n - 1) return sorted[n - 1];
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile_type1(const Eigen::ArrayXd& sorted, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw UsageError("stats.quantile_type1", "level must lie in (0,1)");
  }
  const auto n = sorted.size();
  if (n == 0) throw DataError("stats.quantile_type1", "empty sample");
  // Smallest k with k/n >= tau, compared in the same arithmetic the
  // empirical CDF uses.
  auto k = static_cast<Eigen::Index>(std::ceil(tau * static_cast<double>(n)));
  while (k > 1 && static_cast<double>(k - 1) / static_cast<double>(n) >= tau) --k;
  while (k < n && static_cast<double>(k) / static_cast<double>(n) < tau) ++k;
  return sorted[k - 1];
}

double weighted_mean(const Eigen::ArrayXd& points, const Eigen::ArrayXd& weights) {
  const double total = weights.sum();
  return (points * weights).sum() / total;
}

double weighted_sd(const Eigen::ArrayXd& points, const Eigen::ArrayXd& weights) {
  const double total = weights.sum();
  const Eigen::ArrayXd w = weights / total;
  const double mu = (points * w).sum();
  const double sw2 = w.square().sum();
  if (sw2 >= 1.0) throw DataError("stats.weighted_sd", "single effective observation");
  return std::sqrt(((points - mu).square() * w).sum() / (1.0 - sw2));
}

double weighted_quantile_type7(const Eigen::ArrayXd& sorted,
                               const Eigen::ArrayXd& weights, double p) {
  const auto n = sorted.size();
  if (n == 0) throw DataError("stats.weighted_quantile_type7", "empty support");
  if (n == 1) return sorted[0];
  const double total = weights.sum();
  // Plotting positions s_i = C_{i-1} / (total - w_n); at uniform weights
  // this is (i-1)/(n-1), the type-7 grid.
  const double denom = total - weights[n - 1];
  double cum = 0.0;
  double prev_s = 0.0;
  double prev_x = sorted[0];
  if (p <= 0.0) return sorted[0];
  for (Eigen::Index i = 1; i < n; ++i) {
    cum += weights[i - 1];
    const double s = cum / denom;
    if (p <= s) {
      const double frac = (p - prev_s) / (s - prev_s);
      return prev_x + frac * (sorted[i] - prev_x);
    }
    prev_s = s;
    prev_x = sorted[i];
  }
  return sorted[n - 1];
}

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol) {
  struct Impl {
    const std::function<double(double)>& f;
    int depth_limit;
    double recurse(double a, double m, double b, double fa, double fm,
                   double fb, double whole, double tol, int depth) {
      const double lm = 0.5 * (a + m);
      const double rm = 0.5 * (m + b);
      const double flm = f(lm);
      const double frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      const double delta = left + right - whole;
      if (depth >= depth_limit || std::fabs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
      }
      return recurse(a, lm, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
             recurse(m, rm, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
    }
  };
  Impl impl{f, 48};
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double result = impl.recurse(a, m, b, fa, fm, fb, whole, tol, 0);
  if (!std::isfinite(result)) {
    throw NumericError("stats.adaptive_simpson", "integral did not converge");
  }
  return result;
}

double bisect_increasing(const std::function<double(double)>& f, double lo,
                         double hi, double target, double tol) {
  double flo = f(lo) - target;
  if (flo >= 0.0) return lo;
  for (int i = 0; i < 200 && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) - target < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace drm
