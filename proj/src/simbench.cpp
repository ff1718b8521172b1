#include "drm/simbench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <memory>
#include <ostream>
#include <thread>

#include "drm/el_drm.hpp"
#include "drm/errors.hpp"
#include "drm/estimators.hpp"
#include "drm/baselines.hpp"
#include "drm/fixed_basis.hpp"
#include "drm/pipeline.hpp"
#include "drm/rng.hpp"
#include "drm/stats.hpp"

namespace drm {

ScenarioId parse_scenario_id(const std::string& name) {
  if (name == "s1") return ScenarioId::kNormalEqVar;
  if (name == "s2") return ScenarioId::kNormalUneqVar;
  if (name == "s3") return ScenarioId::kGamma;
  if (name == "s4") return ScenarioId::kSelfDesigned;
  if (name == "weibull") return ScenarioId::kWeibull;
  if (name == "mixture") return ScenarioId::kNormalMixture;
  throw UsageError("simbench", "unknown scenario '" + name + "'");
}

std::string scenario_name(ScenarioId id) {
  switch (id) {
    case ScenarioId::kNormalEqVar: return "s1";
    case ScenarioId::kNormalUneqVar: return "s2";
    case ScenarioId::kGamma: return "s3";
    case ScenarioId::kSelfDesigned: return "s4";
    case ScenarioId::kWeibull: return "weibull";
    case ScenarioId::kNormalMixture: return "mixture";
  }
  return "?";
}

ScenarioSpec make_scenario(ScenarioId id, int n, int reps, std::uint64_t seed) {
  if (n < 2) throw UsageError("simbench", "sample size must be at least 2");
  ScenarioSpec spec;
  spec.id = id;
  spec.n_per_population = n;
  spec.replications = reps;
  spec.seed = seed;
  switch (id) {
    case ScenarioId::kNormalEqVar:
      spec.p1 = {18.0, 18.5, 18.5, 17.5, 19.0, 18.0};
      spec.p2 = {6.0, 6.0, 6.0, 6.0, 6.0, 6.0};
      break;
    case ScenarioId::kNormalUneqVar:
      spec.p1 = {18.0, 18.5, 18.5, 17.5, 18.0, 18.0};
      spec.p2 = {6.0, 6.5, 7.0, 6.0, 6.5, 6.0};
      break;
    case ScenarioId::kGamma:
      spec.p1 = {6.0, 6.0, 7.0, 7.0, 8.0, 8.0};
      spec.p2 = {1.5, 1.4, 1.3, 1.2, 1.1, 1.0};
      break;
    case ScenarioId::kSelfDesigned:
      spec.p1 = {0.0, 2.0, 1.0, 0.0, -2.0, 3.0};
      spec.p2 = {0.0, -3.0, 1.0, -2.0, 2.0, -1.0};
      break;
    case ScenarioId::kWeibull:
      spec.p1 = {4.5, 5.0, 6.0, 6.5, 7.0, 7.5};
      spec.p2 = {10.0, 9.0, 11.0, 11.5, 12.5, 12.0};
      break;
    case ScenarioId::kNormalMixture:
      spec.mix = {0.5, 0.5, 0.3, 0.5, 0.4, 0.2};
      spec.p1 = {15.0, 15.0, 15.5, 16.0, 14.5, 15.0};
      spec.p2 = {18.0, 18.0, 17.0, 19.0, 17.0, 16.0};
      spec.p3 = {3.0, 3.0, 3.5, 3.0, 3.5, 3.0};
      spec.p4 = {3.0, 3.5, 4.0, 4.0, 4.5, 3.0};
      break;
  }
  return spec;
}

namespace {

double self_designed_exponent(const ScenarioSpec& spec, int r, double x) {
  return spec.p1[static_cast<std::size_t>(r)] * norm_pdf(x - kSelfDesignedKnots[0]) +
         spec.p2[static_cast<std::size_t>(r)] * norm_pdf(x - kSelfDesignedKnots[1]);
}

}  // namespace

TruthModel::TruthModel(const ScenarioSpec& spec) : spec_(spec) {
  if (spec_.id == ScenarioId::kSelfDesigned) {
    alphas_.resize(static_cast<std::size_t>(spec_.num_populations()));
    for (int r = 0; r < spec_.num_populations(); ++r) {
      const double mass = adaptive_simpson(
          [&](double x) {
            return norm_pdf(x) * std::exp(self_designed_exponent(spec_, r, x));
          },
          -10.0, 10.0, 1e-12);
      alphas_[static_cast<std::size_t>(r)] = -std::log(mass);
    }
  }
}

double TruthModel::density(int r, double x) const {
  const auto i = static_cast<std::size_t>(r);
  switch (spec_.id) {
    case ScenarioId::kNormalEqVar:
    case ScenarioId::kNormalUneqVar: {
      const double sd = std::sqrt(spec_.p2[i]);
      return norm_pdf((x - spec_.p1[i]) / sd) / sd;
    }
    case ScenarioId::kGamma: {
      if (x <= 0.0) return 0.0;
      const double a = spec_.p1[i];
      const double s = spec_.p2[i];
      return std::exp((a - 1.0) * std::log(x) - x / s - a * std::log(s) -
                      std::lgamma(a));
    }
    case ScenarioId::kSelfDesigned:
      return norm_pdf(x) *
             std::exp(alphas_[i] + self_designed_exponent(spec_, r, x));
    case ScenarioId::kWeibull: {
      if (x < 0.0) return 0.0;
      const double k = spec_.p1[i];
      const double lam = spec_.p2[i];
      const double z = x / lam;
      return k / lam * std::pow(z, k - 1.0) * std::exp(-std::pow(z, k));
    }
    case ScenarioId::kNormalMixture: {
      const double s1 = std::sqrt(spec_.p3[i]);
      const double s2 = std::sqrt(spec_.p4[i]);
      return spec_.mix[i] * norm_pdf((x - spec_.p1[i]) / s1) / s1 +
             (1.0 - spec_.mix[i]) * norm_pdf((x - spec_.p2[i]) / s2) / s2;
    }
  }
  return 0.0;
}

Eigen::ArrayXd TruthModel::density(int r, const Eigen::ArrayXd& xs) const {
  Eigen::ArrayXd out(xs.size());
  for (Eigen::Index i = 0; i < xs.size(); ++i) out[i] = density(r, xs[i]);
  return out;
}

double TruthModel::cdf(int r, double x) const {
  const auto i = static_cast<std::size_t>(r);
  switch (spec_.id) {
    case ScenarioId::kNormalEqVar:
    case ScenarioId::kNormalUneqVar:
      return norm_cdf((x - spec_.p1[i]) / std::sqrt(spec_.p2[i]));
    case ScenarioId::kGamma:
      return x <= 0.0 ? 0.0 : gamma_cdf(x, spec_.p1[i], spec_.p2[i]);
    case ScenarioId::kSelfDesigned: {
      if (x <= -10.0) return 0.0;
      return adaptive_simpson([&](double t) { return density(r, t); }, -10.0,
                              std::min(x, 10.0), 1e-12);
    }
    case ScenarioId::kWeibull:
      return x <= 0.0 ? 0.0
                      : 1.0 - std::exp(-std::pow(x / spec_.p2[i], spec_.p1[i]));
    case ScenarioId::kNormalMixture:
      return spec_.mix[i] * norm_cdf((x - spec_.p1[i]) / std::sqrt(spec_.p3[i])) +
             (1.0 - spec_.mix[i]) *
                 norm_cdf((x - spec_.p2[i]) / std::sqrt(spec_.p4[i]));
  }
  return 0.0;
}

double TruthModel::quantile(int r, double tau) const {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw UsageError("simbench.truth", "quantile level must lie in (0,1)");
  }
  const auto i = static_cast<std::size_t>(r);
  switch (spec_.id) {
    case ScenarioId::kNormalEqVar:
    case ScenarioId::kNormalUneqVar:
      return spec_.p1[i] + std::sqrt(spec_.p2[i]) * norm_quantile(tau);
    case ScenarioId::kGamma:
      return gamma_quantile(tau, spec_.p1[i], spec_.p2[i]);
    case ScenarioId::kSelfDesigned:
      return bisect_increasing([&](double x) { return cdf(r, x); }, -10.0, 10.0,
                               tau, 1e-10);
    case ScenarioId::kWeibull:
      return spec_.p2[i] * std::pow(-std::log1p(-tau), 1.0 / spec_.p1[i]);
    case ScenarioId::kNormalMixture: {
      const double lo = std::min(spec_.p1[i], spec_.p2[i]) -
                        10.0 * std::sqrt(std::max(spec_.p3[i], spec_.p4[i]));
      const double hi = std::max(spec_.p1[i], spec_.p2[i]) +
                        10.0 * std::sqrt(std::max(spec_.p3[i], spec_.p4[i]));
      return bisect_increasing([&](double x) { return cdf(r, x); }, lo, hi, tau,
                               1e-10);
    }
  }
  return 0.0;
}

MultiSample generate(const ScenarioSpec& spec, int rep) {
  RandomStream stream(child_seed(spec.seed, static_cast<std::uint64_t>(rep)));
  const int pops = spec.num_populations();
  const auto n = static_cast<Eigen::Index>(spec.n_per_population);
  std::vector<Eigen::ArrayXd> samples(static_cast<std::size_t>(pops));

  for (int r = 0; r < pops; ++r) {
    const auto i = static_cast<std::size_t>(r);
    Eigen::ArrayXd x(n);
    switch (spec.id) {
      case ScenarioId::kNormalEqVar:
      case ScenarioId::kNormalUneqVar: {
        const double sd = std::sqrt(spec.p2[i]);
        for (Eigen::Index j = 0; j < n; ++j) {
          x[j] = spec.p1[i] + sd * stream.next_normal();
        }
        break;
      }
      case ScenarioId::kGamma:
        for (Eigen::Index j = 0; j < n; ++j) {
          x[j] = spec.p2[i] * stream.next_gamma(spec.p1[i]);
        }
        break;
      case ScenarioId::kWeibull:
        for (Eigen::Index j = 0; j < n; ++j) {
          x[j] = spec.p2[i] *
                 std::pow(-std::log1p(-stream.next_uniform()), 1.0 / spec.p1[i]);
        }
        break;
      case ScenarioId::kNormalMixture: {
        const double s1 = std::sqrt(spec.p3[i]);
        const double s2 = std::sqrt(spec.p4[i]);
        for (Eigen::Index j = 0; j < n; ++j) {
          if (stream.next_uniform() < spec.mix[i]) {
            x[j] = spec.p1[i] + s1 * stream.next_normal();
          } else {
            x[j] = spec.p2[i] + s2 * stream.next_normal();
          }
        }
        break;
      }
      case ScenarioId::kSelfDesigned: {
        // Rejection from the standard normal proposal; the envelope bounds
        // the tilt by its maximum exp{max(b1,0) phi_max + max(b2,0) phi_max}.
        const double b1 = spec.p1[i];
        const double b2 = spec.p2[i];
        const double log_env =
            (std::max(b1, 0.0) + std::max(b2, 0.0)) * norm_pdf(0.0);
        long proposals = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
          for (;;) {
            ++proposals;
            if (proposals >= 10000 && j + 1 < proposals / 100) {
              throw NumericError("simbench.generate",
                                 "rejection acceptance below 1%; envelope is wrong");
            }
            const double z = stream.next_normal();
            const double log_accept = b1 * norm_pdf(z - kSelfDesignedKnots[0]) +
                                      b2 * norm_pdf(z - kSelfDesignedKnots[1]) -
                                      log_env;
            if (std::log(stream.next_uniform()) < log_accept) {
              x[j] = z;
              break;
            }
          }
        }
        break;
      }
    }
    samples[i] = std::move(x);
  }
  return MultiSample(std::move(samples));
}

double integrated_squared_error(const CurveFn& estimated, const CurveFn& truth,
                                double lo, double hi, int grid_points) {
  if (!(hi > lo) || grid_points < 2) {
    throw UsageError("simbench.integrated_squared_error", "bad integration range");
  }
  Eigen::ArrayXd grid = Eigen::ArrayXd::LinSpaced(grid_points, lo, hi);
  const Eigen::ArrayXd diff2 = (estimated(grid) - truth(grid)).square();
  const double dx = (hi - lo) / static_cast<double>(grid_points - 1);
  return dx * (diff2.sum() - 0.5 * (diff2[0] + diff2[grid_points - 1]));
}

std::string EstimatorSpec::label() const {
  switch (kind) {
    case Kind::kTruth: return "truth";
    case Kind::kAdaptive: return "adaptive";
    case Kind::kRich: return "rich";
    case Kind::kFpc: return "fpc" + std::to_string(order);
    case Kind::kKu: return "ku" + std::to_string(order);
    case Kind::kNp: return "np";
  }
  return "?";
}

EstimatorSpec EstimatorSpec::parse(const std::string& token) {
  EstimatorSpec est;
  if (token == "truth") {
    est.kind = Kind::kTruth;
  } else if (token == "adaptive") {
    est.kind = Kind::kAdaptive;
  } else if (token == "rich") {
    est.kind = Kind::kRich;
  } else if (token == "np") {
    est.kind = Kind::kNp;
  } else if (token.rfind("fpc", 0) == 0 || token.rfind("ku", 0) == 0) {
    const bool fpc = token[0] == 'f';
    est.kind = fpc ? Kind::kFpc : Kind::kKu;
    try {
      est.order = std::stoi(token.substr(fpc ? 3 : 2));
    } catch (const std::exception&) {
      est.order = 0;
    }
    if (est.order < 1) {
      throw UsageError("simbench", "bad estimator token '" + token + "'");
    }
  } else {
    throw UsageError("simbench", "unknown estimator '" + token + "'");
  }
  return est;
}

std::vector<EstimatorSpec> parse_estimators(const std::string& csv) {
  std::vector<EstimatorSpec> out;
  std::string token;
  std::stringstream ss(csv);
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) out.push_back(EstimatorSpec::parse(token));
  }
  if (out.empty()) throw UsageError("simbench", "no estimators given");
  return out;
}

namespace {

ReferenceFamily scenario_family(ScenarioId id) {
  switch (id) {
    case ScenarioId::kGamma:
    case ScenarioId::kWeibull:
      return ReferenceFamily::kGamma;
    default:
      return ReferenceFamily::kNormal;
  }
}

// The most suitable fixed basis named by each scenario.
FixedBasis scenario_truth_basis(ScenarioId id) {
  switch (id) {
    case ScenarioId::kNormalEqVar:
      return FixedBasis::parse("x");
    case ScenarioId::kNormalUneqVar:
      return FixedBasis::parse("x,x2");
    case ScenarioId::kGamma:
      return FixedBasis::parse("x,logx");
    case ScenarioId::kSelfDesigned:
      return FixedBasis::parse("normpdf:-0.6745,normpdf:0.6745");
    default:
      throw UsageError("simbench",
                       "scenario '" + scenario_name(id) +
                           "' has no designated truth basis");
  }
}

struct EstimateOutput {
  std::vector<CurveFn> density;   // per population
  Eigen::MatrixXd quantiles;      // populations x 5
};

EstimateOutput output_from_fit(std::shared_ptr<const DrmFit> fit) {
  EstimateOutput out;
  const int pops = fit->num_populations();
  out.density.reserve(static_cast<std::size_t>(pops));
  out.quantiles.resize(pops, 5);
  for (int r = 0; r < pops; ++r) {
    out.density.push_back([fit, r](const Eigen::ArrayXd& xs) {
      return drm_density_curve(*fit, r, xs);
    });
    for (int l = 0; l < 5; ++l) {
      out.quantiles(r, l) = drm_quantile(*fit, r, kQuantileLevels[l]);
    }
  }
  return out;
}

EstimateOutput fit_one(const ScenarioSpec& spec, const EstimatorSpec& est,
                       const MultiSample& ms, const PooledEmpirical& pooled) {
  const int pops = ms.num_populations();
  switch (est.kind) {
    case EstimatorSpec::Kind::kNp: {
      EstimateOutput out;
      out.quantiles.resize(pops, 5);
      for (int r = 0; r < pops; ++r) {
        KdeEstimate kde(ms.sample(r), silverman_bandwidth(ms.sample(r)));
        out.density.push_back(
            [kde](const Eigen::ArrayXd& xs) { return kde(xs); });
        for (int l = 0; l < 5; ++l) {
          out.quantiles(r, l) = empirical_quantile(ms.sample(r), kQuantileLevels[l]);
        }
      }
      return out;
    }
    case EstimatorSpec::Kind::kKu: {
      const auto model = std::make_shared<const KuModel>(
          ku_fit(ms, est.order));
      EstimateOutput out;
      out.quantiles.resize(pops, 5);
      for (int r = 0; r < pops; ++r) {
        out.density.push_back([model, r](const Eigen::ArrayXd& xs) {
          // Linear interpolation on the model grid; zero outside.
          Eigen::ArrayXd v(xs.size());
          const auto g = model->grid.size();
          for (Eigen::Index i = 0; i < xs.size(); ++i) {
            const double x = xs[i];
            if (x <= model->grid[0] || x >= model->grid[g - 1]) {
              v[i] = 0.0;
              continue;
            }
            const auto hi = static_cast<Eigen::Index>(
                (x - model->grid[0]) / model->dx) + 1;
            const auto lo = hi - 1;
            const double t = (x - model->grid[lo]) / model->dx;
            v[i] = (1.0 - t) * model->reconstructed(r, lo) +
                   t * model->reconstructed(r, std::min(hi, g - 1));
          }
          return v;
        });
        for (int l = 0; l < 5; ++l) {
          out.quantiles(r, l) = ku_quantile(*model, r, kQuantileLevels[l]);
        }
      }
      return out;
    }
    case EstimatorSpec::Kind::kTruth: {
      const Eigen::MatrixXd basis =
          scenario_truth_basis(spec.id).evaluate(pooled.points);
      return output_from_fit(
          std::make_shared<const DrmFit>(fit_drm(ms, pooled, basis)));
    }
    case EstimatorSpec::Kind::kRich: {
      const Eigen::MatrixXd basis = FixedBasis::rich().evaluate(pooled.points);
      return output_from_fit(
          std::make_shared<const DrmFit>(fit_drm(ms, pooled, basis)));
    }
    case EstimatorSpec::Kind::kAdaptive:
    case EstimatorSpec::Kind::kFpc: {
      BasisPipelineOptions opt;
      opt.bandwidth = BandwidthPolicy::kAdaptive;
      opt.family = scenario_family(spec.id);
      opt.fixed_d = est.kind == EstimatorSpec::Kind::kFpc ? est.order : 0;
      const BasisPipelineResult res = build_adaptive_basis(ms, pooled, opt);
      return output_from_fit(std::make_shared<const DrmFit>(
          fit_drm(ms, pooled, res.basis.values_at_pooled())));
    }
  }
  throw UsageError("simbench", "unhandled estimator");
}

}  // namespace

int worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("DRM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) {
      hw = std::min<long>(hw, v);
    } else {
      std::fprintf(stderr, "warning: ignoring invalid DRM_THREADS='%s'\n", env);
    }
  }
  return hw;
}

BenchReport run_benchmark(const ScenarioSpec& spec,
                          const std::vector<EstimatorSpec>& estimators) {
  if (spec.replications < 1) {
    throw UsageError("simbench.run_benchmark",
                     "replication count must be positive (empty report)");
  }
  if (estimators.empty()) {
    throw UsageError("simbench.run_benchmark", "no estimators requested");
  }
  const int pops = spec.num_populations();
  const int reps = spec.replications;
  const int n_est = static_cast<int>(estimators.size());
  // Validates the truth basis up front for scenarios that lack one.
  for (const auto& est : estimators) {
    if (est.kind == EstimatorSpec::Kind::kTruth) scenario_truth_basis(spec.id);
    if ((est.kind == EstimatorSpec::Kind::kFpc ||
         est.kind == EstimatorSpec::Kind::kKu) &&
        est.order > pops - 1) {
      throw UsageError("simbench.run_benchmark",
                       est.label() + " exceeds m=" + std::to_string(pops - 1));
    }
  }

  const TruthModel truth(spec);
  Eigen::ArrayXd range_lo(pops), range_hi(pops);
  Eigen::MatrixXd true_q(pops, 5);
  for (int r = 0; r < pops; ++r) {
    range_lo[r] = truth.quantile(r, 1e-4);
    range_hi[r] = truth.quantile(r, 1.0 - 1e-4);
    for (int l = 0; l < 5; ++l) true_q(r, l) = truth.quantile(r, kQuantileLevels[l]);
  }

  BenchReport report;
  report.scenario = scenario_name(spec.id);
  report.n_per_population = spec.n_per_population;
  report.replications = reps;
  report.populations = pops;
  for (const auto& est : estimators) report.estimators.push_back(est.label());
  report.raw_ise.assign(static_cast<std::size_t>(reps), {});
  report.raw_se.assign(static_cast<std::size_t>(reps), {});
  report.ok.assign(static_cast<std::size_t>(reps),
                   std::vector<bool>(static_cast<std::size_t>(n_est), false));
  for (int rep = 0; rep < reps; ++rep) {
    report.raw_ise[static_cast<std::size_t>(rep)].assign(
        static_cast<std::size_t>(n_est), Eigen::ArrayXd::Zero(pops));
    report.raw_se[static_cast<std::size_t>(rep)].assign(
        static_cast<std::size_t>(n_est), Eigen::MatrixXd::Zero(pops, 5));
  }
  std::vector<std::exception_ptr> rep_errors(static_cast<std::size_t>(reps));

  std::atomic<int> next{0};
  auto run_rep = [&](int rep) {
    const MultiSample ms = generate(spec, rep);
    const PooledEmpirical pooled = pool(ms);
    for (int e = 0; e < n_est; ++e) {
      try {
        const EstimateOutput fit =
            fit_one(spec, estimators[static_cast<std::size_t>(e)], ms, pooled);
        Eigen::ArrayXd ise(pops);
        for (int r = 0; r < pops; ++r) {
          ise[r] = integrated_squared_error(
              fit.density[static_cast<std::size_t>(r)],
              [&](const Eigen::ArrayXd& xs) { return truth.density(r, xs); },
              range_lo[r], range_hi[r]);
        }
        report.raw_ise[static_cast<std::size_t>(rep)][static_cast<std::size_t>(e)] =
            ise;
        report.raw_se[static_cast<std::size_t>(rep)][static_cast<std::size_t>(e)] =
            (fit.quantiles - true_q).array().square().matrix();
        report.ok[static_cast<std::size_t>(rep)][static_cast<std::size_t>(e)] = true;
      } catch (const Error&) {
        // Failure recorded; this estimator is excluded for this rep.
      }
    }
  };

  const int workers = std::min(worker_count(), reps);
  if (workers <= 1) {
    for (int rep = 0; rep < reps; ++rep) run_rep(rep);
  } else {
    std::vector<std::thread> pool_threads;
    pool_threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool_threads.emplace_back([&] {
        for (int rep = next.fetch_add(1); rep < reps; rep = next.fetch_add(1)) {
          try {
            run_rep(rep);
          } catch (...) {
            rep_errors[static_cast<std::size_t>(rep)] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool_threads) t.join();
    for (const auto& err : rep_errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  // Aggregation in fixed replication order.
  const double scale = static_cast<double>(spec.n_per_population);
  report.imse = Eigen::MatrixXd::Zero(n_est, pops);
  report.quantile_mse = Eigen::MatrixXd::Zero(n_est, 5);
  report.imse_avg.resize(n_est);
  report.quantile_mse_avg.resize(n_est);
  report.failures.assign(static_cast<std::size_t>(n_est), 0);
  for (int e = 0; e < n_est; ++e) {
    Eigen::ArrayXd ise_sum = Eigen::ArrayXd::Zero(pops);
    Eigen::MatrixXd se_sum = Eigen::MatrixXd::Zero(pops, 5);
    int used = 0;
    for (int rep = 0; rep < reps; ++rep) {
      if (!report.ok[static_cast<std::size_t>(rep)][static_cast<std::size_t>(e)]) {
        ++report.failures[static_cast<std::size_t>(e)];
        continue;
      }
      ise_sum += report.raw_ise[static_cast<std::size_t>(rep)][static_cast<std::size_t>(e)];
      se_sum += report.raw_se[static_cast<std::size_t>(rep)][static_cast<std::size_t>(e)];
      ++used;
    }
    const int failed = report.failures[static_cast<std::size_t>(e)];
    if (failed > 0) {
      std::fprintf(stderr, "warning: estimator %s failed on %d of %d repetitions\n",
                   report.estimators[static_cast<std::size_t>(e)].c_str(), failed,
                   reps);
    }
    if (failed * 20 > reps) {
      throw NumericError("simbench.run_benchmark",
                         "estimator " + report.estimators[static_cast<std::size_t>(e)] +
                             " failed on more than 5% of repetitions");
    }
    report.imse.row(e) = (scale * ise_sum / static_cast<double>(used)).matrix().transpose();
    report.quantile_mse.row(e) =
        (scale / static_cast<double>(used)) * se_sum.colwise().mean();
    report.imse_avg[e] = report.imse.row(e).mean();
    report.quantile_mse_avg[e] = report.quantile_mse.row(e).mean();
  }
  return report;
}

namespace {

std::string sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string sig17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_report_tsv(const BenchReport& report, std::ostream& os) {
  os << "# scenario=" << report.scenario << " n=" << report.n_per_population
     << " reps=" << report.replications << "\n";
  os << "estimator";
  for (int r = 0; r < report.populations; ++r) os << "\timse_g" << r;
  os << "\timse_avg";
  for (double level : kQuantileLevels) {
    os << "\tmse_q" << static_cast<int>(level * 100 + 0.5);
  }
  os << "\tmse_avg\n";
  for (std::size_t e = 0; e < report.estimators.size(); ++e) {
    os << report.estimators[e];
    for (int r = 0; r < report.populations; ++r) {
      os << '\t' << sig6(report.imse(static_cast<Eigen::Index>(e), r));
    }
    os << '\t' << sig6(report.imse_avg[static_cast<Eigen::Index>(e)]);
    for (int l = 0; l < 5; ++l) {
      os << '\t' << sig6(report.quantile_mse(static_cast<Eigen::Index>(e), l));
    }
    os << '\t' << sig6(report.quantile_mse_avg[static_cast<Eigen::Index>(e)]) << "\n";
  }
}

void write_raw_csv(const BenchReport& report, std::ostream& os) {
  os << "rep,estimator,metric,population,level,value\n";
  for (std::size_t rep = 0; rep < report.raw_ise.size(); ++rep) {
    for (std::size_t e = 0; e < report.estimators.size(); ++e) {
      if (!report.ok[rep][e]) continue;
      for (int r = 0; r < report.populations; ++r) {
        os << rep << ',' << report.estimators[e] << ",ise," << r << ",,"
           << sig17(report.raw_ise[rep][e][r]) << "\n";
      }
      for (int r = 0; r < report.populations; ++r) {
        for (int l = 0; l < 5; ++l) {
          os << rep << ',' << report.estimators[e] << ",se," << r << ','
             << kQuantileLevels[l] << ',' << sig17(report.raw_se[rep][e](r, l))
             << "\n";
        }
      }
    }
  }
}

}  // namespace drm
