#include "wb/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "wb/errors.hpp"
#include "wb/policy.hpp"
#include "wb/rng.hpp"
#include "wb/stats.hpp"

namespace wb {

void DgpSpec::validate() const {
  if (x_levels.empty() || x_levels.size() != x_pmf.size()) {
    throw ArgumentError("dgp: x levels and pmf sizes disagree");
  }
  double total = 0.0;
  for (double p : x_pmf) {
    if (p < 0.0) throw ArgumentError("dgp: negative pmf entry");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-12) {
    throw ArgumentError("dgp: x pmf sums to " + std::to_string(total));
  }
  if (!(z_prob > 0.0 && z_prob < 1.0)) {
    throw ArgumentError("dgp: z probability must lie in (0,1)");
  }
  if (!(sigma1 > 0.0 && sigma0 > 0.0)) {
    throw ArgumentError("dgp: outcome standard deviations must be positive");
  }
  if (!(support.lo < support.hi)) {
    throw ArgumentError("dgp: degenerate outcome support");
  }
}

double DgpSpec::propensity(double x, double z) const {
  const double lin = propensity_coef[0] + propensity_coef[1] * x + propensity_coef[2] * z;
  return 1.0 / (1.0 + std::exp(-lin));
}

double DgpSpec::mean_outcome(int d, double x, double u) const {
  const auto& c = d == 1 ? m1_coef : m0_coef;
  return c[0] + c[1] * x + c[2] * u;
}

double lognormal_draw(double mean, double sd, SplitMix64& rng) {
  const double var = sd * sd;
  const double mu = std::log(mean * mean / std::sqrt(var + mean * mean));
  const double s = std::sqrt(std::log(var / (mean * mean) + 1.0));
  // Inverse-CDF sampling keeps the draw a pure function of the uniform.
  const double normal = inverse_normal_cdf(rng.next_uniform());
  return std::exp(mu + s * normal);
}

Dataset dgp_sample(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw ArgumentError("dgp_sample: n must be at least 1");

  std::vector<double> cum(spec.x_pmf.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < spec.x_pmf.size(); ++j) {
    acc += spec.x_pmf[j];
    cum[j] = acc;
  }
  cum.back() = 1.0;

  SplitMix64 rng(seed);
  std::vector<double> y(n), x(n);
  std::vector<std::uint8_t> d(n);
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ux = rng.next_uniform();
    const std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(cum.begin(), cum.end(), ux) - cum.begin());
    const double xv = spec.x_levels[std::min(idx, spec.x_levels.size() - 1)];
    const double zv = rng.next_uniform() < spec.z_prob ? 1.0 : 0.0;
    const double u = rng.next_uniform();
    const int dv = spec.propensity(xv, zv) >= u ? 1 : 0;
    const double mean = spec.mean_outcome(dv, xv, u);
    const double sd = dv == 1 ? spec.sigma1 : spec.sigma0;
    double yv = lognormal_draw(mean, sd, rng);
    // The lognormal has unbounded support; the declared bounds are part of
    // the estimand, so censor the rare exceedances onto the support edge.
    yv = std::clamp(yv, spec.support.lo, spec.support.hi);
    y[i] = yv;
    x[i] = xv;
    d[i] = static_cast<std::uint8_t>(dv);
    z[i] = zv;
  }
  return Dataset(std::move(y), std::move(d), std::move(x), {"x"}, std::move(z),
                 spec.support);
}

OracleTarget oracle_target_from_name(const std::string& name) {
  if (name == "gain") return OracleTarget::Gain;
  if (name == "worst-case") return OracleTarget::WorstCase;
  if (name == "iv-worst-case") return OracleTarget::IvWorstCase;
  throw ArgumentError("unknown oracle target '" + name +
                      "' (expected gain, worst-case or iv-worst-case)");
}

std::string oracle_target_name(OracleTarget target) {
  switch (target) {
    case OracleTarget::Gain: return "gain";
    case OracleTarget::WorstCase: return "worst-case";
    case OracleTarget::IvWorstCase: return "iv-worst-case";
  }
  return "?";
}

namespace {

// Everything the oracle needs about one covariate level, derived from the
// selection structure: conditional on (x,z), D picks u <= p(x,z), so the
// treated arm averages the outcome mean over u in [0, p] and the control arm
// over [p, 1]; x-marginal quantities mix over z with Bayes weights.
struct DgpCell {
  double p_z[2];     // p(x,z)
  double eta1_z[2];  // E[Y|D=1,x,z]
  double eta0_z[2];  // E[Y|D=0,x,z]
  double mean_y_z[2];
  double p_x;        // P(D=1|x)
  double eta1_x, eta0_x;
  double cate;       // E[Y1-Y0|x]
};

DgpCell dgp_cell(const DgpSpec& spec, double x) {
  DgpCell cell{};
  const double pz1 = spec.z_prob;
  for (int z : {0, 1}) {
    const double p = spec.propensity(x, static_cast<double>(z));
    cell.p_z[z] = p;
    if (p <= 0.0) {
      throw DomainError("oracle: p(x=" + std::to_string(x) + ", z=" +
                        std::to_string(z) + ") is zero; E[Y|D=1,...] undefined");
    }
    if (p >= 1.0) {
      throw DomainError("oracle: p(x=" + std::to_string(x) + ", z=" +
                        std::to_string(z) + ") is one; E[Y|D=0,...] undefined");
    }
    const double treated =
        integrate([&](double u) { return spec.mean_outcome(1, x, u); }, 0.0, p) / p;
    const double control =
        integrate([&](double u) { return spec.mean_outcome(0, x, u); }, p, 1.0) /
        (1.0 - p);
    cell.eta1_z[z] = treated;
    cell.eta0_z[z] = control;
    cell.mean_y_z[z] = p * treated + (1.0 - p) * control;
  }
  cell.p_x = pz1 * cell.p_z[1] + (1.0 - pz1) * cell.p_z[0];
  const double w1_d1 = pz1 * cell.p_z[1] / cell.p_x;
  const double w0_d1 = (1.0 - pz1) * cell.p_z[0] / cell.p_x;
  const double w1_d0 = pz1 * (1.0 - cell.p_z[1]) / (1.0 - cell.p_x);
  const double w0_d0 = (1.0 - pz1) * (1.0 - cell.p_z[0]) / (1.0 - cell.p_x);
  cell.eta1_x = w1_d1 * cell.eta1_z[1] + w0_d1 * cell.eta1_z[0];
  cell.eta0_x = w1_d0 * cell.eta0_z[1] + w0_d0 * cell.eta0_z[0];
  cell.cate = integrate(
      [&](double u) { return spec.mean_outcome(1, x, u) - spec.mean_outcome(0, x, u); },
      0.0, 1.0);
  return cell;
}

struct PolicySplit {
  int theta10;
  int theta01;
};

PolicySplit policy_split(const PopulationPolicyPair& pair, double x) {
  const double xv = x;
  const std::span<const double> span(&xv, 1);
  const int a = pair.delta(span);
  const int b = pair.delta_star(span);
  return {a == 1 && b == 0, a == 0 && b == 1};
}

}  // namespace

double population_oracle_gain(const DgpSpec& spec, const PopulationPolicyPair& pair) {
  spec.validate();
  double gain = 0.0;
  for (std::size_t j = 0; j < spec.x_levels.size(); ++j) {
    const double x = spec.x_levels[j];
    const PolicySplit split = policy_split(pair, x);
    if (split.theta10 == 0 && split.theta01 == 0) continue;
    const double cate = integrate(
        [&](double u) { return spec.mean_outcome(1, x, u) - spec.mean_outcome(0, x, u); },
        0.0, 1.0);
    gain += spec.x_pmf[j] * cate * (split.theta10 - split.theta01);
  }
  return gain;
}

GainBounds population_oracle_bounds(const DgpSpec& spec,
                                    const PopulationPolicyPair& pair,
                                    OracleTarget target) {
  spec.validate();
  if (target == OracleTarget::Gain) {
    throw ArgumentError("population_oracle_bounds: 'gain' is a point target, "
                        "use population_oracle_gain");
  }
  const OutcomeSupport s = spec.support;
  GainBounds out;
  for (std::size_t j = 0; j < spec.x_levels.size(); ++j) {
    const double x = spec.x_levels[j];
    const PolicySplit split = policy_split(pair, x);
    if (split.theta10 == 0 && split.theta01 == 0) continue;
    const DgpCell cell = dgp_cell(spec, x);
    double lower, upper;
    if (target == OracleTarget::WorstCase) {
      lower = (cell.eta1_x - s.hi) * cell.p_x + (s.lo - cell.eta0_x) * (1.0 - cell.p_x);
      upper = (cell.eta1_x - s.lo) * cell.p_x + (s.hi - cell.eta0_x) * (1.0 - cell.p_x);
    } else {
      double sup_lt = -1e308, sup_uc = -1e308, inf_lc = 1e308, inf_ut = 1e308;
      for (int z : {0, 1}) {
        const double p = cell.p_z[z];
        const double e1 = cell.eta1_z[z];
        const double e0 = cell.eta0_z[z];
        sup_lt = std::max(sup_lt, e1 * p + s.lo * (1.0 - p));
        inf_lc = std::min(inf_lc, s.hi * p + e0 * (1.0 - p));
        inf_ut = std::min(inf_ut, e1 * p + s.hi * (1.0 - p));
        sup_uc = std::max(sup_uc, s.lo * p + e0 * (1.0 - p));
      }
      lower = sup_lt - inf_lc;
      upper = inf_ut - sup_uc;
    }
    out.beta_l += spec.x_pmf[j] * (lower * split.theta10 - upper * split.theta01);
    out.beta_u += spec.x_pmf[j] * (upper * split.theta10 - lower * split.theta01);
  }
  return out;
}

namespace {

class DgpNuisance final : public NuisanceFit {
 public:
  explicit DgpNuisance(const DgpSpec& spec) : z_prob_(spec.z_prob) {
    for (double x : spec.x_levels) cells_[x] = dgp_cell(spec, x);
  }

  double eta(int d, std::span<const double> x) const override {
    const DgpCell& c = cell(x);
    return d == 1 ? c.eta1_x : c.eta0_x;
  }
  double propensity(std::span<const double> x) const override { return cell(x).p_x; }
  bool has_instrument() const override { return true; }
  double eta_z(int d, std::span<const double> x, double z) const override {
    const DgpCell& c = cell(x);
    return d == 1 ? c.eta1_z[index(z)] : c.eta0_z[index(z)];
  }
  double propensity_z(std::span<const double> x, double z) const override {
    return cell(x).p_z[index(z)];
  }
  double instrument_share(double z, std::span<const double>) const override {
    return index(z) == 1 ? z_prob_ : 1.0 - z_prob_;
  }
  double outcome_mean_z(std::span<const double> x, double z) const override {
    return cell(x).mean_y_z[index(z)];
  }
  std::vector<double> z_levels() const override { return {0.0, 1.0}; }
  std::string describe() const override { return "true-nuisance"; }

 private:
  static int index(double z) {
    if (z == 0.0) return 0;
    if (z == 1.0) return 1;
    throw DomainError("true nuisance: instrument level must be 0 or 1");
  }
  const DgpCell& cell(std::span<const double> x) const {
    const auto it = cells_.find(x[0]);
    if (it == cells_.end()) {
      throw DomainError("true nuisance: x=" + std::to_string(x[0]) +
                        " is not a level of the process");
    }
    return it->second;
  }

  double z_prob_;
  std::map<double, DgpCell> cells_;
};

}  // namespace

std::shared_ptr<const NuisanceFit> dgp_true_nuisance(const DgpSpec& spec) {
  spec.validate();
  return std::make_shared<DgpNuisance>(spec);
}

std::string mc_estimator_name(McEstimator e) {
  return e == McEstimator::Original ? "original" : "debiased";
}

std::string mc_fitting_name(McFitting f) {
  switch (f) {
    case McFitting::NoCrossfit: return "no-crossfit";
    case McFitting::Crossfit: return "crossfit";
    case McFitting::TrueNuisance: return "true-nuisance";
  }
  return "?";
}

namespace {

struct RepOutcome {
  bool failed = false;
  bool covered = false;
  double length = 0.0;
};

struct VariantKey {
  McFitting fitting;
  McEstimator estimator;
  bool operator<(const VariantKey& other) const {
    if (fitting != other.fitting) return fitting < other.fitting;
    return estimator < other.estimator;
  }
};

}  // namespace

std::string CoverageReport::to_table() const {
  std::ostringstream out;
  out << "coverage of " << std::fixed << std::setprecision(0)
      << (side == Side::Lower ? "lower" : "upper") << " bound, regime "
      << regime_name(regime) << ", target " << std::setprecision(1) << oracle_value
      << "\n\n";
  std::map<McFitting, std::map<std::pair<std::size_t, McEstimator>, const CoverageCell*>>
      grid;
  std::vector<std::size_t> ns;
  for (const auto& cell : cells) {
    grid[cell.variant.fitting][{cell.n, cell.variant.estimator}] = &cell;
    if (std::find(ns.begin(), ns.end(), cell.n) == ns.end()) ns.push_back(cell.n);
  }
  std::sort(ns.begin(), ns.end());
  out << std::setw(16) << "" << std::setw(12) << "original" << std::setw(12) << ""
      << std::setw(12) << "debiased" << std::setw(12) << "" << "\n";
  out << std::setw(16) << "sample size" << std::setw(12) << "coverage" << std::setw(12)
      << "length" << std::setw(12) << "coverage" << std::setw(12) << "length"
      << "\n";
  for (const auto& [fitting, rows] : grid) {
    out << mc_fitting_name(fitting) << "\n";
    for (std::size_t n : ns) {
      out << std::setw(16) << n;
      for (McEstimator est : {McEstimator::Original, McEstimator::Debiased}) {
        const auto it = rows.find({n, est});
        if (it == rows.end()) {
          out << std::setw(12) << "-" << std::setw(12) << "-";
        } else {
          out << std::setw(12) << std::setprecision(3) << it->second->coverage
              << std::setw(12) << std::setprecision(0) << it->second->avg_length;
        }
      }
      out << "\n";
    }
  }
  return out.str();
}

CoverageReport monte_carlo(const MonteCarloConfig& config) {
  config.dgp.validate();
  if (config.regime != Regime::WorstCase && config.regime != Regime::IvWorstCase) {
    throw ArgumentError("monte_carlo: oracle targets exist for worst-case and "
                        "iv-worst-case only");
  }
  if (config.replications == 0) throw ArgumentError("monte_carlo: zero replications");

  std::vector<McVariant> variants = config.variants;
  if (variants.empty()) {
    for (McFitting f : {McFitting::NoCrossfit, McFitting::Crossfit,
                        McFitting::TrueNuisance}) {
      for (McEstimator e : {McEstimator::Original, McEstimator::Debiased}) {
        variants.push_back({e, f});
      }
    }
  }

  // Policies over the single covariate "x"; bind against a probe sample.
  PolicyPair pair{PolicyRule::parse(config.policy_star),
                  PolicyRule::parse(config.policy)};

  PopulationPolicyPair oracle_pair;
  {
    PolicyRule star = pair.delta_star;
    PolicyRule rule = pair.delta;
    const Dataset probe = dgp_sample(config.dgp, 1, 1);
    star.bind(probe);
    rule.bind(probe);
    oracle_pair.delta_star = [star](std::span<const double> x) {
      return star.evaluate(x);
    };
    oracle_pair.delta = [rule](std::span<const double> x) { return rule.evaluate(x); };
  }
  const OracleTarget target = config.regime == Regime::WorstCase
                                  ? OracleTarget::WorstCase
                                  : OracleTarget::IvWorstCase;
  const GainBounds oracle = population_oracle_bounds(config.dgp, oracle_pair, target);
  const double truth = config.side == Side::Lower ? oracle.beta_l : oracle.beta_u;

  const double critical = normal_quantile(config.alpha);
  std::shared_ptr<const NuisanceFit> true_fit;
  for (const auto& v : variants) {
    if (v.fitting == McFitting::TrueNuisance) {
      true_fit = dgp_true_nuisance(config.dgp);
      break;
    }
  }

  FirstStageConfig fs;
  fs.method = FirstStageMethod::CellMeans;
  fs.empty_cell = EmptyCellPolicy::Error;
  fs.with_instrument = regime_uses_instrument(config.regime);

  CoverageReport report;
  report.oracle_value = truth;
  report.regime = config.regime;
  report.side = config.side;
  report.seed = config.seed;
  report.requested_replications = config.replications;

  for (std::size_t n : config.sample_sizes) {
    // One slot per (replication, variant); filled concurrently, reduced in
    // replication order afterwards.
    std::map<VariantKey, std::vector<RepOutcome>> outcomes;
    for (const auto& v : variants) {
      outcomes[{v.fitting, v.estimator}].resize(config.replications);
    }

    auto mark_all_failed = [&](std::size_t rep) {
      for (auto& [key, slots] : outcomes) slots[rep].failed = true;
    };

    auto run_rep = [&](std::size_t rep) {
      const std::uint64_t rep_seed =
          SplitMix64::mix(config.seed) ^ SplitMix64::mix(rep + 1);
      const std::uint64_t sample_seed = SplitMix64::mix(rep_seed ^ 0xA5);
      const std::uint64_t fold_seed = SplitMix64::mix(rep_seed ^ 0x5A);

      Dataset sample = dgp_sample(config.dgp, n, sample_seed);
      const IndicatorVectors ind = policy_indicators(pair, sample);

      for (McFitting fitting : {McFitting::NoCrossfit, McFitting::Crossfit,
                                McFitting::TrueNuisance}) {
        bool wanted = false;
        for (const auto& v : variants) wanted |= v.fitting == fitting;
        if (!wanted) continue;
        try {
          FoldAssignment folds = fitting == McFitting::Crossfit
                                     ? make_folds(n, config.folds, fold_seed)
                                     : trivial_fold(n);
          std::vector<std::shared_ptr<const NuisanceFit>> fits;
          if (fitting == McFitting::TrueNuisance) {
            fits.assign(folds.k, true_fit);
          } else {
            fits = fit_cross_fitted(sample, folds, fs);
          }
          for (McEstimator estimator : {McEstimator::Original, McEstimator::Debiased}) {
            const VariantKey key{fitting, estimator};
            const auto slot = outcomes.find(key);
            if (slot == outcomes.end()) continue;
            const CrossFitMoments m = crossfit_moments(
                sample, ind, fits, folds, config.regime,
                AdjustmentMode::InstrumentWeighted,
                estimator == McEstimator::Debiased);
            const SideEstimate est =
                config.side == Side::Lower ? m.lower : m.upper;
            const double half =
                critical * std::sqrt(est.omega / static_cast<double>(n));
            RepOutcome& out = slot->second[rep];
            out.failed = false;
            out.covered = est.beta - half <= truth && truth <= est.beta + half;
            out.length = 2.0 * half;
          }
        } catch (const std::exception&) {
          for (McEstimator estimator : {McEstimator::Original, McEstimator::Debiased}) {
            const auto slot = outcomes.find(VariantKey{fitting, estimator});
            if (slot != outcomes.end()) slot->second[rep].failed = true;
          }
        }
      }
    };

    std::size_t workers = config.threads == 0
                              ? std::max<std::size_t>(1, std::thread::hardware_concurrency())
                              : config.threads;
    workers = std::min(workers, config.replications);
    auto run_rep_guarded = [&](std::size_t rep) {
      try {
        run_rep(rep);
      } catch (const std::exception&) {
        mark_all_failed(rep);
      }
    };

    if (workers <= 1) {
      for (std::size_t rep = 0; rep < config.replications; ++rep) run_rep_guarded(rep);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (;;) {
            const std::size_t rep = next.fetch_add(1);
            if (rep >= config.replications) return;
            run_rep_guarded(rep);
          }
        });
      }
      for (auto& t : pool) t.join();
    }

    for (const auto& v : variants) {
      const auto& slots = outcomes.at({v.fitting, v.estimator});
      CoverageCell cell;
      cell.variant = v;
      cell.n = n;
      std::size_t covered = 0;
      double total_length = 0.0;
      for (const RepOutcome& r : slots) {  // replication order
        if (r.failed) {
          ++cell.failed;
          continue;
        }
        ++cell.replications;
        covered += r.covered ? 1 : 0;
        total_length += r.length;
      }
      if (static_cast<double>(cell.failed) >
          config.max_failure_share * static_cast<double>(config.replications)) {
        throw NumericError("monte_carlo: " + std::to_string(cell.failed) + " of " +
                           std::to_string(config.replications) +
                           " replications failed for variant " +
                           mc_estimator_name(v.estimator) + "/" +
                           mc_fitting_name(v.fitting) + " at n=" + std::to_string(n));
      }
      cell.coverage = cell.replications == 0
                          ? 0.0
                          : static_cast<double>(covered) /
                                static_cast<double>(cell.replications);
      cell.avg_length = cell.replications == 0
                            ? 0.0
                            : total_length / static_cast<double>(cell.replications);
      report.cells.push_back(cell);
    }
  }
  return report;
}

}  // namespace wb
