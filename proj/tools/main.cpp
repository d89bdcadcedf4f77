// Command-line front end: policy welfare-gain bounds on tabular data, the
// built-in simulation oracle, and the Monte Carlo coverage study.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "wb/dataset.hpp"
#include "wb/errors.hpp"
#include "wb/identification.hpp"
#include "wb/inference.hpp"
#include "wb/policy.hpp"
#include "wb/simulation.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kSpecVersion = "1.0";
constexpr std::uint64_t kDefaultEstimateSeed = 1;

int thread_default() {
  if (const char* env = std::getenv("WELFARE_BOUNDS_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 0;  // library picks hardware concurrency
}

void write_output(const ordered_json& payload, const std::string& out_path,
                  bool table_mode, const std::string& table) {
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw wb::ArgumentError("cannot open output file '" + out_path + "'");
    out << payload.dump(2) << "\n";
  }
  if (table_mode) {
    std::cout << table;
  } else if (out_path.empty()) {
    std::cout << payload.dump(2) << "\n";
  }
}

// Flags override config-file keys: any option the user did not pass on the
// command line is backfilled from the JSON config.
void merge_config_file(CLI::App& cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw wb::ArgumentError("cannot open config file '" + path + "'");
  ordered_json cfg;
  try {
    in >> cfg;
  } catch (const std::exception& e) {
    throw wb::ParseError("config file '" + path + "': " + e.what());
  }
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = cmd.get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw wb::ArgumentError("config file key '" + key + "' is not a flag of this "
                              "command");
    }
    if (opt->count() > 0) continue;  // explicit flag wins
    std::vector<std::string> values;
    if (value.is_array()) {
      for (const auto& item : value) {
        values.push_back(item.is_string() ? item.get<std::string>() : item.dump());
      }
    } else if (value.is_string()) {
      values.push_back(value.get<std::string>());
    } else {
      values.push_back(value.dump());
    }
    for (const auto& v : values) opt->add_result(v);
    opt->run_callback();
  }
}

struct EstimateArgs {
  std::string data_path;
  std::string y_col, d_col, z_col;
  std::vector<std::string> x_cols;
  std::string policy_star, policy;
  std::string regime = "worst-case";
  std::vector<double> support;
  std::string first_stage = "cell-means";
  int degree = 2;
  std::string empty_cell = "error";
  std::size_t k = 2;
  std::uint64_t seed = kDefaultEstimateSeed;
  double alpha = 0.95;
  std::string adjustment = "instrument-weighted";
  std::string iv_mode = "binary-monotone";
  int miv_bins = 5;
  std::string out_path;
  bool table = false;
  std::string config_path;
};

// Quantile-bins a continuous instrument into ordered levels and returns the
// rebuilt dataset plus the level weights.
std::pair<wb::Dataset, std::vector<wb::MivLevel>> bin_instrument(
    const wb::Dataset& data, int bins) {
  if (bins < 2) throw wb::ArgumentError("--miv-bins must be at least 2");
  const std::size_t n = data.n();
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = data.z(i);
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> codes(n);
  if (distinct.size() <= static_cast<std::size_t>(bins)) {
    // Already discrete: keep the observed values as the levels.
    codes = values;
  } else {
    std::vector<double> edges;
    for (int j = 1; j < bins; ++j) {
      edges.push_back(sorted[static_cast<std::size_t>(j) * n / bins]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      codes[i] = static_cast<double>(
          std::upper_bound(edges.begin(), edges.end(), values[i]) - edges.begin());
    }
  }

  std::map<double, std::size_t> counts;
  for (double c : codes) ++counts[c];
  std::vector<wb::MivLevel> levels;
  for (const auto& [z, count] : counts) {
    levels.push_back({z, static_cast<double>(count) / static_cast<double>(n)});
  }

  std::vector<double> y(n), xr;
  std::vector<std::uint8_t> d(n);
  xr.reserve(n * data.n_covariates());
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = data.y(i);
    d[i] = static_cast<std::uint8_t>(data.d(i));
    const auto row = data.x_row(i);
    xr.insert(xr.end(), row.begin(), row.end());
  }
  wb::Dataset rebinned(std::move(y), std::move(d), std::move(xr), data.x_names(),
                       std::move(codes), data.support());
  return {std::move(rebinned), std::move(levels)};
}

int run_estimate(const EstimateArgs& args) {
  if (args.data_path.empty()) throw wb::ArgumentError("--data is required");
  if (args.y_col.empty()) throw wb::ArgumentError("--y is required");
  if (args.d_col.empty()) throw wb::ArgumentError("--d is required");
  if (args.x_cols.empty()) throw wb::ArgumentError("--x is required");
  if (args.policy_star.empty()) throw wb::ArgumentError("--policy-star is required");
  if (args.policy.empty()) throw wb::ArgumentError("--policy is required");
  if (args.support.size() != 2) {
    throw wb::ArgumentError("--support expects two values: LO HI");
  }
  const wb::Regime regime = wb::regime_from_name(args.regime);
  if (wb::regime_uses_instrument(regime) && args.z_col.empty()) {
    throw wb::ArgumentError("regime '" + args.regime +
                            "' needs an instrument: map it with --z COLUMN");
  }

  wb::Schema schema;
  schema.y = args.y_col;
  schema.d = args.d_col;
  schema.x = args.x_cols;
  if (!args.z_col.empty()) schema.z = args.z_col;

  wb::Dataset data = wb::load_dataset(args.data_path, schema,
                                      {args.support[0], args.support[1]});

  wb::AssumptionSpec spec;
  spec.regime = regime;
  if (wb::regime_is_miv(regime)) {
    auto [rebinned, levels] = bin_instrument(data, args.miv_bins);
    data = std::move(rebinned);
    spec.miv_levels = std::move(levels);
    spec.iv_mode = wb::IvMode::GeneralDiscrete;
  } else if (wb::regime_uses_instrument(regime)) {
    spec.iv_mode = args.iv_mode == "general-discrete" ? wb::IvMode::GeneralDiscrete
                                                      : wb::IvMode::BinaryMonotone;
  }

  wb::PolicyPair pair{wb::PolicyRule::parse(args.policy_star),
                      wb::PolicyRule::parse(args.policy)};

  wb::EstimatorConfig config;
  config.spec = spec;
  config.first_stage.method = args.first_stage == "polynomial"
                                  ? wb::FirstStageMethod::Polynomial
                                  : wb::FirstStageMethod::CellMeans;
  config.first_stage.degree = args.degree;
  config.first_stage.empty_cell = args.empty_cell == "zero"
                                      ? wb::EmptyCellPolicy::Zero
                                      : wb::EmptyCellPolicy::Error;
  config.k = args.k;
  config.seed = args.seed;
  config.alpha = args.alpha;
  config.adjustment = wb::adjustment_mode_from_name(args.adjustment);

  const wb::BoundsEstimate est = wb::lr_estimate(data, pair, config);

  ordered_json payload;
  payload["spec_version"] = kSpecVersion;
  payload["command"] = "estimate";
  payload["regime"] = wb::regime_name(est.regime);
  payload["n"] = est.n;
  payload["beta_l"] = est.beta_l;
  payload["beta_u"] = est.beta_u;
  payload["has_ci"] = est.has_ci;
  if (est.has_ci) {
    payload["omega_l"] = est.omega_l;
    payload["omega_u"] = est.omega_u;
    payload["ci_l"] = {est.ci_l.first, est.ci_l.second};
    payload["ci_u"] = {est.ci_u.first, est.ci_u.second};
  }
  payload["alpha"] = est.alpha;
  payload["k"] = est.k;
  payload["seed"] = est.seed;
  payload["first_stage"] = {
      {"method", args.first_stage},
      {"degree", args.first_stage == "polynomial" ? ordered_json(args.degree)
                                                  : ordered_json(nullptr)},
      {"empty_cell_policy", args.empty_cell}};
  payload["adjustment_mode"] = est.adjustment_mode;
  payload["policy_star"] = pair.delta_star.pretty_print();
  payload["policy"] = pair.delta.pretty_print();
  payload["diagnostics"] = est.diagnostics;

  std::ostringstream table;
  table << std::fixed << std::setprecision(0);
  table << std::setw(18) << "" << std::setw(14) << "lower bound" << std::setw(14)
        << "upper bound" << "\n";
  table << std::setw(18) << wb::regime_name(est.regime) << std::setw(14) << est.beta_l
        << std::setw(14) << est.beta_u << "\n";
  if (est.has_ci) {
    std::ostringstream cil, ciu;
    cil << std::fixed << std::setprecision(0) << "(" << est.ci_l.first << ", "
        << est.ci_l.second << ")";
    ciu << std::fixed << std::setprecision(0) << "(" << est.ci_u.first << ", "
        << est.ci_u.second << ")";
    table << std::setw(18) << "" << std::setw(14) << cil.str() << std::setw(14)
          << ciu.str() << "\n";
  } else {
    table << std::setw(18) << "" << std::setw(28) << "(point estimates only)" << "\n";
  }

  write_output(payload, args.out_path, args.table, table.str());
  return 0;
}

struct SimulateArgs {
  std::vector<std::size_t> ns{100, 1000, 5000, 10000};
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string regime = "worst-case";
  std::string side = "lower";
  std::string policy_star = "x <= 11";
  std::string policy = "x <= 12";
  std::size_t k = 2;
  double alpha = 0.95;
  std::vector<std::string> variants;
  int threads = thread_default();
  std::string out_path;
  bool table = false;
  std::string config_path;
};

int run_simulate(const SimulateArgs& args) {
  wb::MonteCarloConfig config;
  config.regime = wb::regime_from_name(args.regime);
  config.side = args.side == "upper" ? wb::Side::Upper : wb::Side::Lower;
  config.policy_star = args.policy_star;
  config.policy = args.policy;
  config.sample_sizes = args.ns;
  config.replications = args.reps;
  config.seed = args.seed;
  config.folds = args.k;
  config.alpha = args.alpha;
  config.threads = args.threads <= 0 ? 0 : static_cast<std::size_t>(args.threads);
  for (const auto& text : args.variants) {
    const auto sep = text.find(':');
    if (sep == std::string::npos) {
      throw wb::ArgumentError("--variants entries look like estimator:fitting, e.g. "
                              "debiased:crossfit");
    }
    wb::McVariant v;
    const std::string estimator = text.substr(0, sep);
    const std::string fitting = text.substr(sep + 1);
    if (estimator == "original") {
      v.estimator = wb::McEstimator::Original;
    } else if (estimator == "debiased") {
      v.estimator = wb::McEstimator::Debiased;
    } else {
      throw wb::ArgumentError("unknown estimator '" + estimator + "'");
    }
    if (fitting == "no-crossfit") {
      v.fitting = wb::McFitting::NoCrossfit;
    } else if (fitting == "crossfit") {
      v.fitting = wb::McFitting::Crossfit;
    } else if (fitting == "true-nuisance") {
      v.fitting = wb::McFitting::TrueNuisance;
    } else {
      throw wb::ArgumentError("unknown fitting '" + fitting + "'");
    }
    config.variants.push_back(v);
  }

  const wb::CoverageReport report = wb::monte_carlo(config);

  ordered_json payload;
  payload["spec_version"] = kSpecVersion;
  payload["command"] = "simulate";
  payload["regime"] = wb::regime_name(report.regime);
  payload["side"] = report.side == wb::Side::Lower ? "lower" : "upper";
  payload["oracle_value"] = report.oracle_value;
  payload["seed"] = report.seed;
  payload["replications"] = report.requested_replications;
  payload["cells"] = ordered_json::array();
  for (const auto& cell : report.cells) {
    payload["cells"].push_back({{"estimator", wb::mc_estimator_name(cell.variant.estimator)},
                                {"fitting", wb::mc_fitting_name(cell.variant.fitting)},
                                {"n", cell.n},
                                {"coverage", cell.coverage},
                                {"avg_length", cell.avg_length},
                                {"replications_used", cell.replications},
                                {"failed", cell.failed}});
  }

  write_output(payload, args.out_path, args.table, report.to_table());
  return 0;
}

struct OracleArgs {
  std::string dgp = "builtin";
  std::string policy_star = "x <= 11";
  std::string policy = "x <= 12";
  std::string target = "gain";
  std::string out_path;
};

int run_oracle(const OracleArgs& args) {
  if (args.dgp != "builtin") {
    throw wb::ArgumentError("the only available process is --dgp builtin");
  }
  const wb::DgpSpec spec;
  // Bind the policies against the single synthetic covariate "x".
  wb::PolicyRule star = wb::PolicyRule::parse(args.policy_star);
  wb::PolicyRule rule = wb::PolicyRule::parse(args.policy);
  const wb::Dataset probe = wb::dgp_sample(spec, 1, 1);
  star.bind(probe);
  rule.bind(probe);
  wb::PopulationPolicyPair pair;
  pair.delta_star = [&star](std::span<const double> x) { return star.evaluate(x); };
  pair.delta = [&rule](std::span<const double> x) { return rule.evaluate(x); };

  const wb::OracleTarget target = wb::oracle_target_from_name(args.target);
  ordered_json payload;
  payload["spec_version"] = kSpecVersion;
  payload["command"] = "oracle";
  payload["target"] = args.target;
  if (target == wb::OracleTarget::Gain) {
    payload["value"] = wb::population_oracle_gain(spec, pair);
  } else {
    const wb::GainBounds bounds = wb::population_oracle_bounds(spec, pair, target);
    payload["beta_l"] = bounds.beta_l;
    payload["beta_u"] = bounds.beta_u;
  }
  write_output(payload, args.out_path, false, "");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-identification bounds on policy welfare gains"};
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "Estimate welfare-gain bounds from a CSV dataset");
  // Required inputs are validated after the config-file merge, so a config
  // file can stand in for any flag.
  estimate->add_option("--data", est.data_path, "CSV file");
  estimate->add_option("--y", est.y_col, "outcome column");
  estimate->add_option("--d", est.d_col, "treatment column (0/1)");
  estimate->add_option("--x", est.x_cols, "covariate columns");
  estimate->add_option("--z", est.z_col, "instrument column");
  estimate->add_option("--policy-star", est.policy_star, "benchmark policy");
  estimate->add_option("--policy", est.policy, "candidate policy");
  estimate->add_option("--regime", est.regime,
                       "worst-case|mtr|iv-worst-case|iv-mtr|miv-worst-case|miv-mtr");
  estimate->add_option("--support", est.support, "outcome support: LO HI")
      ->expected(2);
  estimate->add_option("--first-stage", est.first_stage, "cell-means|polynomial");
  estimate->add_option("--degree", est.degree, "polynomial degree");
  estimate->add_option("--empty-cell", est.empty_cell, "error|zero");
  estimate->add_option("--k", est.k, "number of cross-fitting folds");
  estimate->add_option("--seed", est.seed, "fold-split seed");
  estimate->add_option("--alpha", est.alpha, "confidence level");
  estimate->add_option("--adjustment-mode", est.adjustment,
                       "instrument-weighted|unweighted");
  estimate->add_option("--iv-mode", est.iv_mode, "binary-monotone|general-discrete");
  estimate->add_option("--miv-bins", est.miv_bins,
                       "quantile bins for a continuous monotone instrument");
  estimate->add_option("--out", est.out_path, "write JSON here");
  estimate->add_flag("--table", est.table, "print an aligned text table");
  estimate->add_option("--config", est.config_path, "JSON config file");

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte Carlo coverage study on the built-in process");
  CLI::Option* sim_seed = simulate->add_option("--seed", sim.seed, "master seed");
  simulate->add_option("--ns", sim.ns, "sample sizes")->delimiter(',');
  simulate->add_option("--reps", sim.reps, "replications per sample size");
  simulate->add_option("--regime", sim.regime, "worst-case|iv-worst-case");
  simulate->add_option("--side", sim.side, "lower|upper");
  simulate->add_option("--policy-star", sim.policy_star, "benchmark policy over x");
  simulate->add_option("--policy", sim.policy, "candidate policy over x");
  simulate->add_option("--k", sim.k, "cross-fitting folds");
  simulate->add_option("--alpha", sim.alpha, "confidence level");
  simulate->add_option("--variants", sim.variants,
                       "estimator:fitting pairs (default: all six)")
      ->delimiter(',');
  simulate->add_option("--threads", sim.threads, "worker cap (0 = hardware)");
  simulate->add_option("--out", sim.out_path, "write JSON here");
  simulate->add_flag("--table", sim.table, "print an aligned text table");
  simulate->add_option("--config", sim.config_path, "JSON config file");

  OracleArgs ora;
  CLI::App* oracle = app.add_subcommand(
      "oracle", "Exact population values for the built-in process");
  oracle->add_option("--dgp", ora.dgp, "process name (builtin)");
  oracle->add_option("--policy-star", ora.policy_star, "benchmark policy over x");
  oracle->add_option("--policy", ora.policy, "candidate policy over x");
  oracle->add_option("--regime", ora.target, "gain|worst-case|iv-worst-case");
  oracle->add_option("--out", ora.out_path, "write JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (estimate->parsed()) {
      if (!est.config_path.empty()) merge_config_file(*estimate, est.config_path);
      if (estimate->get_option("--seed")->count() == 0) {
        std::cerr << "note: --seed not given; fold splitting uses the fixed "
                     "default seed "
                  << kDefaultEstimateSeed << "\n";
      }
      return run_estimate(est);
    }
    if (simulate->parsed()) {
      if (!sim.config_path.empty()) merge_config_file(*simulate, sim.config_path);
      if (sim_seed->count() == 0) {
        throw wb::ArgumentError("simulate requires an explicit --seed (silent "
                                "nondeterminism is not allowed)");
      }
      return run_simulate(sim);
    }
    if (oracle->parsed()) return run_oracle(ora);
  } catch (const wb::ArgumentError& e) {
    std::cerr << "error (usage): " << e.what() << "\n";
    return 1;
  } catch (const wb::NumericError& e) {
    std::cerr << "error (numeric): " << e.what() << "\n";
    return 3;
  } catch (const wb::SchemaError& e) {
    std::cerr << "error (data): " << e.what() << "\n";
    return 2;
  } catch (const wb::ParseError& e) {
    std::cerr << "error (data): " << e.what() << "\n";
    return 2;
  } catch (const wb::DomainError& e) {
    std::cerr << "error (data): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
