#include "drm/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>

#include "drm/baselines.hpp"
#include "drm/el_drm.hpp"
#include "drm/errors.hpp"
#include "drm/estimators.hpp"
#include "drm/fixed_basis.hpp"
#include "drm/pipeline.hpp"
#include "drm/simbench.hpp"

namespace drm {

namespace {

using nlohmann::json;

std::string sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double round6(double v) { return std::stod(sig6(v)); }

std::ostream& open_output(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw DataError("cli", "cannot write to '" + path + "'");
  return file;
}

CsvLayout parse_layout(const std::string& name) {
  if (name == "long") return CsvLayout::kLong;
  if (name == "wide") return CsvLayout::kWide;
  throw UsageError("cli", "unknown layout '" + name + "' (expected long|wide)");
}

std::vector<double> parse_levels(const std::string& csv) {
  std::vector<double> levels;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    try {
      levels.push_back(std::stod(token));
    } catch (const std::exception&) {
      throw UsageError("cli", "bad quantile level '" + token + "'");
    }
  }
  if (levels.empty()) throw UsageError("cli", "no quantile levels given");
  return levels;
}

// "lo:hi:step" -> inclusive grid.
Eigen::ArrayXd parse_step_grid(const std::string& spec) {
  double lo = 0.0, hi = 0.0, step = 0.0;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 ||
      !(step > 0.0) || !(hi >= lo)) {
    throw UsageError("cli", "bad grid '" + spec + "' (expected lo:hi:step)");
  }
  const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  Eigen::ArrayXd grid(count);
  for (int i = 0; i < count; ++i) grid[i] = lo + step * i;
  return grid;
}

// "lo:hi:n" -> n evenly spaced points.
Eigen::ArrayXd parse_count_grid(const std::string& spec) {
  double lo = 0.0, hi = 0.0;
  int n = 0;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 || n < 2 ||
      !(hi > lo)) {
    throw UsageError("cli", "bad grid '" + spec + "' (expected lo:hi:n)");
  }
  return Eigen::ArrayXd::LinSpaced(n, lo, hi);
}

struct CommonOpts {
  std::string input;
  std::string layout = "long";
  std::string bandwidth = "adaptive";
  std::string bw_family = "normal";
  std::string bw_grid;
  double kde_floor = 0.0;  // 0 = disabled
  std::string d_choice = "auto";
  double threshold = 0.95;
  int bic_max = 4;
  std::string basis_policy = "auto";
  std::string basis_file;
  bool json_output = false;
};

void add_data_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--input", o.input, "input CSV path")->required();
  cmd->add_option("--layout", o.layout, "CSV layout: long|wide");
}

void add_basis_flags(CLI::App* cmd, CommonOpts& o, bool with_policy) {
  cmd->add_option("--bandwidth", o.bandwidth,
                  "bandwidth policy: silverman|adaptive|fixed:<h>");
  cmd->add_option("--bw-family", o.bw_family, "reference family: normal|gamma");
  cmd->add_option("--bw-grid", o.bw_grid, "bandwidth scale grid lo:hi:step");
  cmd->add_option("--kde-floor", o.kde_floor, "KDE floor constant C (0 disables)");
  cmd->add_option("--d", o.d_choice, "number of eigenfunctions: auto|<int>");
  cmd->add_option("--threshold", o.threshold, "variance-explained threshold");
  cmd->add_option("--bic-max", o.bic_max, "largest BIC candidate d");
  if (with_policy) {
    cmd->add_option("--basis", o.basis_policy, "basis policy: auto|rich|poly:<spec>");
    cmd->add_option("--basis-file", o.basis_file, "load a dumped basis JSON");
  }
}

BasisPipelineOptions pipeline_options(const CommonOpts& o) {
  BasisPipelineOptions opt;
  if (o.bandwidth == "silverman") {
    opt.bandwidth = BandwidthPolicy::kSilverman;
  } else if (o.bandwidth == "adaptive") {
    opt.bandwidth = BandwidthPolicy::kAdaptive;
  } else if (o.bandwidth.rfind("fixed:", 0) == 0) {
    opt.bandwidth = BandwidthPolicy::kFixed;
    try {
      opt.fixed_bandwidth = std::stod(o.bandwidth.substr(6));
    } catch (const std::exception&) {
      throw UsageError("cli", "bad fixed bandwidth in '" + o.bandwidth + "'");
    }
  } else {
    throw UsageError("cli", "unknown bandwidth policy '" + o.bandwidth + "'");
  }
  if (o.bw_family == "normal") {
    opt.family = ReferenceFamily::kNormal;
  } else if (o.bw_family == "gamma") {
    opt.family = ReferenceFamily::kGamma;
  } else {
    throw UsageError("cli", "unknown reference family '" + o.bw_family + "'");
  }
  if (!o.bw_grid.empty()) opt.k_grid = parse_step_grid(o.bw_grid);
  if (o.kde_floor < 0.0) throw UsageError("cli", "--kde-floor must be nonnegative");
  if (o.kde_floor > 0.0) opt.kde_floor = o.kde_floor;
  if (o.d_choice != "auto") {
    try {
      opt.fixed_d = std::stoi(o.d_choice);
    } catch (const std::exception&) {
      throw UsageError("cli", "--d expects auto or an integer");
    }
    if (opt.fixed_d < 1) throw UsageError("cli", "--d must be at least 1");
  }
  opt.threshold = o.threshold;
  opt.bic_max = o.bic_max;
  return opt;
}

json basis_to_json(const AdaptiveBasis& basis, const MultiSample& ms) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = "adaptive_basis";
  j["d"] = basis.dim();
  j["lambdas"] = std::vector<double>(basis.lambdas().data(),
                                     basis.lambdas().data() + basis.dim());
  json vecs = json::array();
  for (int k = 0; k < ms.num_populations(); ++k) {
    json row = json::array();
    for (int c = 0; c < basis.dim(); ++c) row.push_back(basis.eigvecs()(k, c));
    vecs.push_back(row);
  }
  j["eigvecs"] = vecs;
  const Eigen::VectorXd& cc = basis.ratios().centering_constants();
  j["centering"] = std::vector<double>(cc.data(), cc.data() + cc.size());
  j["bandwidths"] = basis.provenance.bandwidths;
  if (basis.provenance.kde_floor) {
    j["kde_floor"] = *basis.provenance.kde_floor;
  } else {
    j["kde_floor"] = nullptr;
  }
  if (basis.provenance.chosen_k) {
    j["chosen_k"] = *basis.provenance.chosen_k;
  } else {
    j["chosen_k"] = nullptr;
  }
  j["j1"] = basis.provenance.j1;
  j["j2"] = basis.provenance.j2;
  std::vector<Eigen::Index> nk;
  for (int k = 0; k < ms.num_populations(); ++k) nk.push_back(ms.count(k));
  j["n_k"] = nk;
  return j;
}

AdaptiveBasis basis_from_json(const json& j, const MultiSample& ms,
                              const PooledEmpirical& pooled) {
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1 ||
      j.value("kind", "") != std::string("adaptive_basis")) {
    throw DataError("cli", "unrecognized basis file schema");
  }
  const auto nk = j.at("n_k").get<std::vector<Eigen::Index>>();
  if (nk.size() != static_cast<std::size_t>(ms.num_populations())) {
    throw DataError("cli", "basis file was built for different populations");
  }
  for (int k = 0; k < ms.num_populations(); ++k) {
    if (nk[static_cast<std::size_t>(k)] != ms.count(k)) {
      throw DataError("cli", "basis file sample sizes do not match the data");
    }
  }
  const auto lambdas_v = j.at("lambdas").get<std::vector<double>>();
  const Eigen::VectorXd lambdas =
      Eigen::Map<const Eigen::VectorXd>(lambdas_v.data(),
                                        static_cast<Eigen::Index>(lambdas_v.size()));
  Eigen::MatrixXd eigvecs(ms.num_populations(), lambdas.size());
  const auto& vecs = j.at("eigvecs");
  for (int k = 0; k < ms.num_populations(); ++k) {
    for (Eigen::Index c = 0; c < lambdas.size(); ++c) {
      eigvecs(k, c) = vecs.at(static_cast<std::size_t>(k))
                          .at(static_cast<std::size_t>(c))
                          .get<double>();
    }
  }
  std::optional<double> floor;
  if (!j.at("kde_floor").is_null()) floor = j["kde_floor"].get<double>();
  AdaptiveBasis basis =
      rebuild_basis(ms, pooled, j.at("bandwidths").get<std::vector<double>>(),
                    floor, lambdas, eigvecs);
  // The centering constants must reproduce; otherwise the data differ.
  const auto stored = j.at("centering").get<std::vector<double>>();
  const Eigen::VectorXd& cc = basis.ratios().centering_constants();
  for (Eigen::Index k = 0; k < cc.size(); ++k) {
    const double diff = std::fabs(stored[static_cast<std::size_t>(k)] - cc[k]);
    if (diff > 1e-10 * (1.0 + std::fabs(cc[k]))) {
      throw DataError("cli", "basis file centering constants do not match the data");
    }
  }
  return basis;
}

struct FitBundle {
  std::shared_ptr<MultiSample> ms;
  PooledEmpirical pooled;
  std::shared_ptr<const DrmFit> fit;
  json basis_info;
};

FitBundle make_fit(const CommonOpts& o) {
  const bool explicit_d = o.d_choice != "auto";
  const bool basis_fixed = o.basis_policy != "auto";
  if (basis_fixed && explicit_d) {
    throw UsageError("cli", "--basis " + o.basis_policy +
                                " conflicts with --d; fixed bases pin their own d");
  }
  if (basis_fixed && !o.basis_file.empty()) {
    throw UsageError("cli", "--basis and --basis-file are mutually exclusive");
  }

  FitBundle bundle;
  bundle.ms = std::make_shared<MultiSample>(load_csv(o.input, parse_layout(o.layout)));
  bundle.pooled = pool(*bundle.ms);

  Eigen::MatrixXd values;
  if (!o.basis_file.empty()) {
    std::ifstream in(o.basis_file);
    if (!in) throw DataError("cli", "cannot open basis file '" + o.basis_file + "'");
    json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw DataError("cli", "bad basis file: " + std::string(e.what()));
    }
    const AdaptiveBasis basis = basis_from_json(j, *bundle.ms, bundle.pooled);
    values = basis.values_at_pooled();
    bundle.basis_info["policy"] = "file";
    bundle.basis_info["d"] = basis.dim();
  } else if (o.basis_policy == "auto") {
    const BasisPipelineResult res =
        build_adaptive_basis(*bundle.ms, bundle.pooled, pipeline_options(o));
    values = res.basis.values_at_pooled();
    bundle.basis_info["policy"] = "auto";
    bundle.basis_info["d"] = res.basis.dim();
    bundle.basis_info["bandwidths"] = res.bandwidths;
    if (res.chosen_k) bundle.basis_info["chosen_k"] = *res.chosen_k;
    if (res.selection.d > 0) {
      bundle.basis_info["j1"] = res.selection.j1;
      bundle.basis_info["j2"] = res.selection.j2;
    }
  } else {
    const FixedBasis basis = o.basis_policy == "rich"
                                 ? FixedBasis::rich()
                                 : (o.basis_policy.rfind("poly:", 0) == 0
                                        ? FixedBasis::parse(o.basis_policy.substr(5))
                                        : throw UsageError(
                                              "cli", "unknown basis policy '" +
                                                         o.basis_policy + "'"));
    values = basis.evaluate(bundle.pooled.points);
    bundle.basis_info["policy"] = basis.describe();
    bundle.basis_info["d"] = basis.dim();
  }
  bundle.fit = std::make_shared<const DrmFit>(
      fit_drm(*bundle.ms, bundle.pooled, values));
  return bundle;
}

json fit_to_json(const FitBundle& bundle) {
  const DrmFit& fit = *bundle.fit;
  json j;
  json alpha = json::array();
  json beta = json::array();
  for (int r = 0; r < fit.params.m(); ++r) {
    alpha.push_back(round6(fit.params.alpha[r]));
    json row = json::array();
    for (int c = 0; c < fit.params.d(); ++c) row.push_back(round6(fit.params.beta(r, c)));
    beta.push_back(row);
  }
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["loglik"] = fit.loglik;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["constraint_residual"] = fit.constraint_residual;
  j["basis"] = bundle.basis_info;
  return j;
}

int cmd_basis(const CommonOpts& o, const std::string& out_path,
              const std::string& curves_path, const std::string& dump_path) {
  const MultiSample ms = load_csv(o.input, parse_layout(o.layout));
  const PooledEmpirical pooled = pool(ms);
  const BasisPipelineResult res =
      build_adaptive_basis(ms, pooled, pipeline_options(o));

  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  if (o.json_output) {
    json j;
    j["d"] = res.basis.dim();
    j["lambdas"] = std::vector<double>(res.eig.values.data(),
                                       res.eig.values.data() + res.eig.values.size());
    if (res.selection.d > 0) {
      j["j1"] = res.selection.j1;
      j["j2"] = res.selection.j2;
      j["bic"] = res.selection.bic;
    }
    j["bandwidths"] = res.bandwidths;
    if (res.chosen_k) j["chosen_k"] = *res.chosen_k;
    os << j.dump(2) << "\n";
  } else {
    os << "j\tlambda\tshare\tcumulative\n";
    const double total = res.eig.values.sum();
    double cum = 0.0;
    for (Eigen::Index j = 0; j < res.eig.values.size(); ++j) {
      cum += res.eig.values[j];
      os << j << '\t' << sig6(res.eig.values[j]) << '\t'
         << sig6(res.eig.values[j] / total) << '\t' << sig6(cum / total) << "\n";
    }
  }

  if (!curves_path.empty()) {
    std::ofstream cf(curves_path);
    if (!cf) throw DataError("cli", "cannot write to '" + curves_path + "'");
    double h_max = 0.0;
    for (double h : res.bandwidths) h_max = std::max(h_max, h);
    const Eigen::ArrayXd grid = Eigen::ArrayXd::LinSpaced(
        512, pooled.points.minCoeff() - h_max, pooled.points.maxCoeff() + h_max);
    const Eigen::MatrixXd psi = res.basis.evaluate(grid);
    cf << "x";
    for (int j = 0; j < res.basis.dim(); ++j) cf << ",psi" << j;
    cf << "\n";
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      cf << sig6(grid[i]);
      for (int j = 0; j < res.basis.dim(); ++j) cf << ',' << sig6(psi(i, j));
      cf << "\n";
    }
  }

  if (!dump_path.empty()) {
    std::ofstream df(dump_path);
    if (!df) throw DataError("cli", "cannot write to '" + dump_path + "'");
    df << basis_to_json(res.basis, ms).dump(2) << "\n";
  }
  return 0;
}

int cmd_fit(const CommonOpts& o, const std::string& out_path) {
  const FitBundle bundle = make_fit(o);
  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  os << fit_to_json(bundle).dump(2) << "\n";
  return 0;
}

int cmd_quantiles(const CommonOpts& o, const std::string& levels_csv,
                  const std::string& out_path) {
  const std::vector<double> levels = parse_levels(levels_csv);
  const FitBundle bundle = make_fit(o);
  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  if (o.json_output) {
    json j;
    j["levels"] = levels;
    json rows = json::array();
    for (int r = 0; r < bundle.ms->num_populations(); ++r) {
      json row = json::array();
      for (double tau : levels) row.push_back(round6(drm_quantile(*bundle.fit, r, tau)));
      rows.push_back(row);
    }
    j["quantiles"] = rows;
    os << j.dump(2) << "\n";
  } else {
    os << "population";
    for (double tau : levels) os << "\tq" << sig6(tau);
    os << "\n";
    for (int r = 0; r < bundle.ms->num_populations(); ++r) {
      os << r;
      for (double tau : levels) os << '\t' << sig6(drm_quantile(*bundle.fit, r, tau));
      os << "\n";
    }
  }
  return 0;
}

int cmd_density(const CommonOpts& o, const std::string& grid_spec,
                const std::string& out_path) {
  const Eigen::ArrayXd grid = parse_count_grid(grid_spec);
  const FitBundle bundle = make_fit(o);
  const int pops = bundle.ms->num_populations();
  Eigen::MatrixXd curves(grid.size(), pops);
  for (int r = 0; r < pops; ++r) {
    curves.col(r) = drm_density_curve(*bundle.fit, r, grid).matrix();
  }
  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  os << "x";
  for (int r = 0; r < pops; ++r) os << ",g" << r;
  os << "\n";
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    os << sig6(grid[i]);
    for (int r = 0; r < pops; ++r) os << ',' << sig6(curves(i, r));
    os << "\n";
  }
  return 0;
}

int cmd_ku(const CommonOpts& o, int num_components, int grid_size,
           const std::string& levels_csv, const std::string& out_path) {
  const MultiSample ms = load_csv(o.input, parse_layout(o.layout));
  const KuModel model = ku_fit(ms, num_components, grid_size);
  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  if (!levels_csv.empty()) {
    const std::vector<double> levels = parse_levels(levels_csv);
    os << "population";
    for (double tau : levels) os << "\tq" << sig6(tau);
    os << "\n";
    for (int r = 0; r < ms.num_populations(); ++r) {
      os << r;
      for (double tau : levels) os << '\t' << sig6(ku_quantile(model, r, tau));
      os << "\n";
    }
  } else {
    os << "x";
    for (int r = 0; r < ms.num_populations(); ++r) os << ",g" << r;
    os << "\n";
    for (Eigen::Index i = 0; i < model.grid.size(); ++i) {
      os << sig6(model.grid[i]);
      for (int r = 0; r < ms.num_populations(); ++r) {
        os << ',' << sig6(model.reconstructed(r, i));
      }
      os << "\n";
    }
  }
  return 0;
}

int cmd_bench(const std::string& scenario, int n, int reps, std::uint64_t seed,
              const std::string& estimators_csv, const std::string& out_path,
              const std::string& raw_path) {
  const ScenarioSpec spec =
      make_scenario(parse_scenario_id(scenario), n, reps, seed);
  const std::vector<EstimatorSpec> estimators = parse_estimators(estimators_csv);
  const BenchReport report = run_benchmark(spec, estimators);
  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  write_report_tsv(report, os);
  if (!raw_path.empty()) {
    std::ofstream rf(raw_path);
    if (!rf) throw DataError("cli", "cannot write to '" + raw_path + "'");
    write_raw_csv(report, rf);
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"density ratio model fitting with a data-adaptive basis"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string out_path, curves_path, dump_path, raw_path;
  std::string levels_csv = "0.1,0.3,0.5,0.7,0.9";
  std::string grid_spec, scenario = "s1", estimators_csv = "truth,adaptive,np";
  int ku_L = 2, ku_grid = 512, bench_n = 500, bench_reps = 200;
  std::uint64_t bench_seed = 42;

  CLI::App* basis = app.add_subcommand("basis", "estimate the adaptive basis");
  add_data_flags(basis, o);
  add_basis_flags(basis, o, false);
  basis->add_option("--out", out_path, "eigenvalue table destination (TSV)");
  basis->add_option("--curves", curves_path, "psi curve CSV destination");
  basis->add_option("--dump", dump_path, "serialize the basis to JSON");
  basis->add_flag("--json", o.json_output, "JSON instead of TSV");

  CLI::App* fit = app.add_subcommand("fit", "fit the DRM by empirical likelihood");
  add_data_flags(fit, o);
  add_basis_flags(fit, o, true);
  fit->add_option("--out", out_path, "output path (JSON)");

  CLI::App* quant = app.add_subcommand("quantiles", "EL-DRM quantile estimates");
  add_data_flags(quant, o);
  add_basis_flags(quant, o, true);
  quant->add_option("--levels", levels_csv, "comma-separated levels");
  quant->add_option("--out", out_path, "output path");
  quant->add_flag("--json", o.json_output, "JSON instead of TSV");

  CLI::App* dens = app.add_subcommand("density", "DRM-updated density curves");
  add_data_flags(dens, o);
  add_basis_flags(dens, o, true);
  dens->add_option("--grid", grid_spec, "evaluation grid lo:hi:n")->required();
  dens->add_option("--out", out_path, "output path (CSV)");

  CLI::App* ku = app.add_subcommand("ku", "Kneip-Utikal baseline");
  add_data_flags(ku, o);
  ku->add_option("--L", ku_L, "number of components");
  ku->add_option("--grid", ku_grid, "grid size");
  ku->add_option("--levels", levels_csv, "quantile levels (switches to quantile output)")
      ->expected(1);
  ku->add_option("--out", out_path, "output path");

  CLI::App* bench = app.add_subcommand("bench", "Monte Carlo benchmark");
  bench->add_option("--scenario", scenario, "s1|s2|s3|s4|weibull|mixture");
  bench->add_option("--n", bench_n, "per-population sample size");
  bench->add_option("--reps", bench_reps, "number of repetitions");
  bench->add_option("--seed", bench_seed, "master seed");
  bench->add_option("--estimators", estimators_csv,
                    "comma list: truth,adaptive,rich,np,fpc<d>,ku<L>");
  bench->add_option("--out", out_path, "report destination (TSV)");
  bench->add_option("--raw", raw_path, "per-repetition error CSV");

  std::vector<const char*> argv;
  argv.push_back("drm");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (basis->parsed()) return cmd_basis(o, out_path, curves_path, dump_path);
    if (fit->parsed()) return cmd_fit(o, out_path);
    if (quant->parsed()) return cmd_quantiles(o, levels_csv, out_path);
    if (dens->parsed()) return cmd_density(o, grid_spec, out_path);
    if (ku->parsed()) {
      return cmd_ku(o, ku_L, ku_grid,
                    ku->get_option("--levels")->count() ? levels_csv : "", out_path);
    }
    if (bench->parsed()) {
      return cmd_bench(scenario, bench_n, bench_reps, bench_seed, estimators_csv,
                       out_path, raw_path);
    }
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace drm
