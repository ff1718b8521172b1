#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "drm/multisample.hpp"

namespace drm {

enum class ScenarioId {
  kNormalEqVar,    // s1
  kNormalUneqVar,  // s2
  kGamma,          // s3
  kSelfDesigned,   // s4
  kWeibull,
  kNormalMixture,
};

ScenarioId parse_scenario_id(const std::string& name);
std::string scenario_name(ScenarioId id);

// Per-population parameter meaning by family:
//   normal:        p1 mean, p2 variance
//   gamma/weibull: p1 shape, p2 scale
//   mixture:       mix proportion, p1/p2 component means, p3/p4 variances
//   self-designed: p1, p2 tilt coefficients on phi(x -/+ 0.6745)
struct ScenarioSpec {
  ScenarioId id = ScenarioId::kNormalEqVar;
  int n_per_population = 500;
  int replications = 200;
  std::uint64_t seed = 42;
  std::vector<double> mix, p1, p2, p3, p4;

  int num_populations() const { return static_cast<int>(p1.size()); }
};

ScenarioSpec make_scenario(ScenarioId id, int n, int reps, std::uint64_t seed);

inline constexpr double kSelfDesignedKnots[2] = {-0.6745, 0.6745};

// Exact densities/quantiles for a scenario. The self-designed normalizing
// constants come from adaptive quadrature at construction.
class TruthModel {
 public:
  explicit TruthModel(const ScenarioSpec& spec);

  int num_populations() const { return spec_.num_populations(); }
  double density(int r, double x) const;
  Eigen::ArrayXd density(int r, const Eigen::ArrayXd& xs) const;
  double cdf(int r, double x) const;
  double quantile(int r, double tau) const;
  const std::vector<double>& self_designed_alphas() const { return alphas_; }

 private:
  ScenarioSpec spec_;
  std::vector<double> alphas_;
};

// Deterministic in (spec.seed, rep): the replication draws from the
// counter-based child stream regardless of scheduling.
MultiSample generate(const ScenarioSpec& spec, int rep);

using CurveFn = std::function<Eigen::ArrayXd(const Eigen::ArrayXd&)>;

// Trapezoid integral of (estimated - truth)^2 over [lo, hi].
double integrated_squared_error(const CurveFn& estimated, const CurveFn& truth,
                                double lo, double hi, int grid_points = 2048);

struct EstimatorSpec {
  enum class Kind { kTruth, kAdaptive, kRich, kFpc, kKu, kNp };
  Kind kind = Kind::kNp;
  int order = 0;  // d for kFpc, L for kKu

  std::string label() const;
  // Accepts truth|adaptive|rich|np|fpc<d>|ku<L>.
  static EstimatorSpec parse(const std::string& token);
};

std::vector<EstimatorSpec> parse_estimators(const std::string& csv);

inline constexpr double kQuantileLevels[5] = {0.1, 0.3, 0.5, 0.7, 0.9};

struct BenchReport {
  std::string scenario;
  int n_per_population = 0;
  int replications = 0;
  int populations = 0;
  std::vector<std::string> estimators;

  // Scaled aggregates: n_r times the mean over successful repetitions.
  Eigen::MatrixXd imse;              // estimators x populations
  Eigen::VectorXd imse_avg;          // over populations
  Eigen::MatrixXd quantile_mse;      // estimators x 5, averaged over populations
  Eigen::VectorXd quantile_mse_avg;  // over levels
  std::vector<int> failures;         // per estimator

  // Raw per-repetition errors, [rep][estimator].
  std::vector<std::vector<Eigen::ArrayXd>> raw_ise;   // per population
  std::vector<std::vector<Eigen::MatrixXd>> raw_se;   // populations x 5
  std::vector<std::vector<bool>> ok;
};

BenchReport run_benchmark(const ScenarioSpec& spec,
                          const std::vector<EstimatorSpec>& estimators);

void write_report_tsv(const BenchReport& report, std::ostream& os);
void write_raw_csv(const BenchReport& report, std::ostream& os);

// Worker cap from DRM_THREADS; defaults to all hardware threads.
int worker_count();

}  // namespace drm
