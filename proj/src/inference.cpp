#include "wb/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wb/errors.hpp"
#include "wb/stats.hpp"

namespace wb {

std::string adjustment_mode_name(AdjustmentMode mode) {
  return mode == AdjustmentMode::InstrumentWeighted ? "instrument-weighted"
                                                    : "unweighted";
}

AdjustmentMode adjustment_mode_from_name(const std::string& name) {
  if (name == "instrument-weighted") return AdjustmentMode::InstrumentWeighted;
  if (name == "unweighted") return AdjustmentMode::Unweighted;
  throw ArgumentError("unknown adjustment mode '" + name +
                      "' (expected instrument-weighted or unweighted)");
}

bool regime_supports_ci(Regime regime, IvMode iv_mode) {
  switch (regime) {
    case Regime::WorstCase:
    case Regime::Mtr:
      return true;
    case Regime::IvWorstCase:
    case Regime::IvMtr:
      return iv_mode == IvMode::BinaryMonotone;
    case Regime::MivWorstCase:
    case Regime::MivMtr:
      return false;
  }
  return false;
}

void MomentContext::validate() const {
  switch (regime) {
    case Regime::WorstCase:
    case Regime::Mtr:
    case Regime::IvWorstCase:
    case Regime::IvMtr:
      break;
    default:
      throw ArgumentError("moment context: regime '" + regime_name(regime) +
                          "' has no orthogonalized moment (plug-in only)");
  }
  if (!(support.lo < support.hi)) {
    throw ArgumentError("moment context: degenerate outcome support");
  }
}

namespace {

bool is_iv(Regime regime) {
  return regime == Regime::IvWorstCase || regime == Regime::IvMtr;
}

// Delta-combination of the side's moment, without the -beta term.
double moment_core(const Observation& w, const NuisanceFit& fit,
                   const MomentContext& ctx, int theta10, int theta01) {
  if (theta10 == 0 && theta01 == 0) return 0.0;
  const OutcomeSupport s = ctx.support;
  double lower, upper;
  if (!is_iv(ctx.regime)) {
    const double e1 = fit.eta(1, w.x);
    const double e0 = fit.eta(0, w.x);
    const double p = fit.propensity(w.x);
    lower = (e1 - s.hi) * p + (s.lo - e0) * (1.0 - p);
    upper = (e1 - s.lo) * p + (s.hi - e0) * (1.0 - p);
    if (ctx.regime == Regime::Mtr) lower = 0.0;
  } else {
    const double e1 = fit.eta_z(1, w.x, 1.0);
    const double e0 = fit.eta_z(0, w.x, 0.0);
    const double p1 = fit.propensity_z(w.x, 1.0);
    const double p0 = fit.propensity_z(w.x, 0.0);
    const double treated_lo = e1 * p1 + s.lo * (1.0 - p1);
    const double treated_hi = e1 * p1 + s.hi * (1.0 - p1);
    const double control_lo = s.lo * p0 + e0 * (1.0 - p0);
    const double control_hi = s.hi * p0 + e0 * (1.0 - p0);
    lower = ctx.regime == Regime::IvMtr ? 0.0 : treated_lo - control_hi;
    upper = treated_hi - control_lo;
  }
  return ctx.side == Side::Lower ? lower * theta10 - upper * theta01
                                 : upper * theta10 - lower * theta01;
}

double adjustment_core(const Observation& w, const NuisanceFit& fit,
                       const MomentContext& ctx, int theta10, int theta01) {
  if (theta10 == 0 && theta01 == 0) return 0.0;
  const OutcomeSupport s = ctx.support;

  if (!is_iv(ctx.regime)) {
    // Common scaling of the eta- and p-derivatives of the side's moment.
    // Under worst-case the lower and upper Delta share those derivatives, so
    // one functional form serves both sides; under MTR the constant side
    // contributes nothing.
    double c;
    if (ctx.regime == Regime::WorstCase) {
      c = theta10 - theta01;
    } else {
      c = ctx.side == Side::Lower ? -theta01 : theta10;
    }
    if (c == 0.0) return 0.0;
    const double e1 = fit.eta(1, w.x);
    const double e0 = fit.eta(0, w.x);
    const double p = fit.propensity(w.x);
    const double phi1 = (e1 + e0 - (s.lo + s.hi)) * (w.d - p);
    const double phi2 = w.d == 1 ? (w.y - e1) : -(w.y - e0);
    return c * (phi1 + phi2);
  }

  if (!w.z.has_value()) {
    throw ArgumentError("adjustment: IV regime needs the observation's z");
  }
  const double e1 = fit.eta_z(1, w.x, 1.0);
  const double e0 = fit.eta_z(0, w.x, 0.0);
  const int z = *w.z == 1.0 ? 1 : 0;
  double branch_weight = 1.0;
  if (ctx.adjustment == AdjustmentMode::InstrumentWeighted) {
    const double share = fit.instrument_share(static_cast<double>(z), w.x);
    if (!(share > 0.0)) {
      throw DomainError("adjustment: estimated instrument share P(Z=" +
                        std::to_string(z) + "|x) is zero");
    }
    branch_weight = 1.0 / share;
  }

  // d(moment)/d p(x,1) and d(moment)/d p(x,0) for the side in play.
  double a1, a0, c;
  const bool mtr = ctx.regime == Regime::IvMtr;
  if (ctx.side == Side::Lower) {
    if (mtr) {
      a1 = -(e1 - s.hi) * theta01;
      a0 = -(e0 - s.lo) * theta01;
      c = -theta01;
    } else {
      a1 = (e1 - s.lo) * theta10 - (e1 - s.hi) * theta01;
      a0 = (e0 - s.hi) * theta10 - (e0 - s.lo) * theta01;
      c = theta10 - theta01;
    }
  } else {
    if (mtr) {
      a1 = (e1 - s.hi) * theta10;
      a0 = (e0 - s.lo) * theta10;
      c = theta10;
    } else {
      a1 = (e1 - s.hi) * theta10 - (e1 - s.lo) * theta01;
      a0 = (e0 - s.lo) * theta10 - (e0 - s.hi) * theta01;
      c = theta10 - theta01;
    }
  }

  double phi1;
  if (z == 1) {
    phi1 = a1 * (w.d - fit.propensity_z(w.x, 1.0)) * branch_weight;
  } else {
    phi1 = a0 * (w.d - fit.propensity_z(w.x, 0.0)) * branch_weight;
  }
  double phi2 = 0.0;
  if (w.d == 1 && z == 1) {
    phi2 = c * (w.y - e1) * branch_weight;
  } else if (w.d == 0 && z == 0) {
    phi2 = -c * (w.y - e0) * branch_weight;
  }
  return phi1 + phi2;
}

}  // namespace

double moment_m(const Observation& w, double beta, const NuisanceFit& fit,
                const MomentContext& ctx, int theta10, int theta01) {
  ctx.validate();
  return moment_core(w, fit, ctx, theta10, theta01) - beta;
}

double adjustment_phi(const Observation& w, const NuisanceFit& fit,
                      const MomentContext& ctx, int theta10, int theta01) {
  ctx.validate();
  return adjustment_core(w, fit, ctx, theta10, theta01);
}

CrossFitMoments crossfit_moments(const Dataset& data, const IndicatorVectors& ind,
                                 std::span<const std::shared_ptr<const NuisanceFit>> fits,
                                 const FoldAssignment& folds, Regime regime,
                                 AdjustmentMode adjustment, bool debiased) {
  if (fits.size() != folds.k || folds.fold_of.size() != data.n()) {
    throw ArgumentError("crossfit_moments: fits/folds do not match the data");
  }
  MomentContext lower{Side::Lower, regime, data.support(), adjustment};
  MomentContext upper{Side::Upper, regime, data.support(), adjustment};
  lower.validate();
  upper.validate();

  const std::size_t n = data.n();
  std::vector<double> contrib_l(n, 0.0), contrib_u(n, 0.0);
  CrossFitMoments out;
  double sum_l = 0.0, sum_u = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int t10 = ind.theta10[i];
    const int t01 = ind.theta01[i];
    if (t10 == 0 && t01 == 0) continue;
    const NuisanceFit& fit = *fits[folds.fold_of[i]];
    Observation w{data.y(i), data.d(i), data.x_row(i),
                  data.has_z() ? std::optional<double>(data.z(i)) : std::nullopt};
    double cl = moment_core(w, fit, lower, t10, t01);
    double cu = moment_core(w, fit, upper, t10, t01);
    if (cl > cu) {
      std::ostringstream msg;
      msg << "estimated CATE interval crosses at row " << i + 1 << ": lower "
          << cl << " > upper " << cu << " (kept as-is)";
      out.diagnostics.push_back({i, msg.str()});
    }
    if (debiased) {
      cl += adjustment_core(w, fit, lower, t10, t01);
      cu += adjustment_core(w, fit, upper, t10, t01);
    }
    contrib_l[i] = cl;
    contrib_u[i] = cu;
    sum_l += cl;
    sum_u += cu;
  }
  const double dn = static_cast<double>(n);
  out.lower.beta = sum_l / dn;
  out.upper.beta = sum_u / dn;
  double ss_l = 0.0, ss_u = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double rl = contrib_l[i] - out.lower.beta;
    const double ru = contrib_u[i] - out.upper.beta;
    ss_l += rl * rl;
    ss_u += ru * ru;
  }
  out.lower.omega = ss_l / dn;
  out.upper.omega = ss_u / dn;
  return out;
}

BoundsEstimate lr_estimate(const Dataset& data, const PolicyPair& pair,
                           const EstimatorConfig& config) {
  config.spec.validate();
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
    throw ArgumentError("lr_estimate: alpha must lie strictly in (0,1)");
  }
  if (data.n() < config.k) {
    throw ArgumentError("lr_estimate: need at least K observations");
  }

  BoundsEstimate out;
  out.regime = config.spec.regime;
  out.alpha = config.alpha;
  out.n = data.n();
  out.k = config.k;
  out.seed = config.seed;
  out.adjustment_mode = adjustment_mode_name(config.adjustment);

  FirstStageConfig fs = config.first_stage;
  fs.with_instrument = regime_uses_instrument(config.spec.regime);
  {
    std::ostringstream desc;
    desc << (fs.method == FirstStageMethod::CellMeans ? "cell-means" : "polynomial");
    if (fs.method == FirstStageMethod::Polynomial) desc << "(degree " << fs.degree << ")";
    out.first_stage = desc.str();
  }

  const FoldAssignment folds = make_folds(data.n(), config.k, config.seed);
  const auto fits = fit_cross_fitted(data, folds, fs);
  const IndicatorVectors ind = policy_indicators(pair, data);

  if (regime_supports_ci(config.spec.regime, config.spec.iv_mode)) {
    const CrossFitMoments moments = crossfit_moments(
        data, ind, fits, folds, config.spec.regime, config.adjustment, true);
    out.beta_l = moments.lower.beta;
    out.beta_u = moments.upper.beta;
    out.omega_l = moments.lower.omega;
    out.omega_u = moments.upper.omega;
    out.has_ci = true;
    const double c = normal_quantile(config.alpha);
    const double half_l = c * std::sqrt(out.omega_l / static_cast<double>(out.n));
    const double half_u = c * std::sqrt(out.omega_u / static_cast<double>(out.n));
    out.ci_l = {out.beta_l - half_l, out.beta_l + half_l};
    out.ci_u = {out.beta_u - half_u, out.beta_u + half_u};
    for (const auto& diag : moments.diagnostics) out.diagnostics.push_back(diag.message);
  } else {
    std::vector<BoundDiagnostic> diags;
    const GainBounds bounds =
        plug_in_gain_bounds(data, pair, config.spec, fits, folds, &diags);
    out.beta_l = bounds.beta_l;
    out.beta_u = bounds.beta_u;
    out.has_ci = false;
    out.diagnostics.push_back(
        "regime '" + regime_name(config.spec.regime) +
        "' has no orthogonalized moment: point estimates only, no confidence "
        "intervals");
    for (const auto& diag : diags) out.diagnostics.push_back(diag.message);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orthogonality diagnostics

namespace {

// Exact nuisances shifted by tau * direction on selected cells.
class PerturbedNuisance final : public NuisanceFit {
 public:
  PerturbedNuisance(const ExactNuisance& base, const NuisancePerturbation& dir,
                    double tau)
      : base_(base), dir_(dir), tau_(tau) {}

  double eta(int d, std::span<const double> x) const override {
    return base_.eta(d, x) + tau_ * lookup(d == 1 ? dir_.d_eta1 : dir_.d_eta0, x);
  }
  double propensity(std::span<const double> x) const override {
    return base_.propensity(x) + tau_ * lookup(dir_.d_p, x);
  }
  bool has_instrument() const override { return base_.has_instrument(); }
  double eta_z(int d, std::span<const double> x, double z) const override {
    return base_.eta_z(d, x, z) +
           tau_ * lookup_z(d == 1 ? dir_.d_eta1_z : dir_.d_eta0_z, x, z);
  }
  double propensity_z(std::span<const double> x, double z) const override {
    return base_.propensity_z(x, z) + tau_ * lookup_z(dir_.d_p_z, x, z);
  }
  double instrument_share(double z, std::span<const double> x) const override {
    return base_.instrument_share(z, x);
  }
  double outcome_mean_z(std::span<const double> x, double z) const override {
    return base_.outcome_mean_z(x, z);
  }
  std::vector<double> z_levels() const override { return base_.z_levels(); }
  std::string describe() const override { return "perturbed-exact"; }

 private:
  static double lookup(const std::map<std::vector<double>, double>& m,
                       std::span<const double> x) {
    const auto it = m.find(std::vector<double>(x.begin(), x.end()));
    return it == m.end() ? 0.0 : it->second;
  }
  static double lookup_z(
      const std::map<std::pair<std::vector<double>, double>, double>& m,
      std::span<const double> x, double z) {
    const auto it = m.find({std::vector<double>(x.begin(), x.end()), z});
    return it == m.end() ? 0.0 : it->second;
  }

  const ExactNuisance& base_;
  const NuisancePerturbation& dir_;
  double tau_;
};

void check_in_range(const DiscretePopulation& population, const MomentContext& ctx,
                    const PerturbedNuisance& fit) {
  const OutcomeSupport s = population.support();
  for (const auto& [x_key, prob] : population.x_cells()) {
    const std::span<const double> x(x_key.data(), x_key.size());
    if (!is_iv(ctx.regime)) {
      for (int d : {0, 1}) {
        const double e = fit.eta(d, x);
        if (e < s.lo || e > s.hi) {
          throw ArgumentError("orthogonality_check: perturbed eta leaves the "
                              "outcome support");
        }
      }
      const double p = fit.propensity(x);
      if (p < 0.0 || p > 1.0) {
        throw ArgumentError("orthogonality_check: perturbed propensity leaves "
                            "[0,1]");
      }
    } else {
      for (double z : {0.0, 1.0}) {
        const double p = fit.propensity_z(x, z);
        if (p < 0.0 || p > 1.0) {
          throw ArgumentError("orthogonality_check: perturbed propensity leaves "
                              "[0,1]");
        }
      }
      const double e1 = fit.eta_z(1, x, 1.0);
      const double e0 = fit.eta_z(0, x, 0.0);
      if (e1 < s.lo || e1 > s.hi || e0 < s.lo || e0 > s.hi) {
        throw ArgumentError("orthogonality_check: perturbed eta leaves the "
                            "outcome support");
      }
    }
  }
}

}  // namespace

OrthogonalityReport orthogonality_check(const DiscretePopulation& population,
                                        const PopulationPolicyPair& pair,
                                        const MomentContext& ctx,
                                        const NuisancePerturbation& direction,
                                        std::span<const double> taus, bool adjusted) {
  ctx.validate();
  AssumptionSpec spec;
  spec.regime = ctx.regime;
  if (is_iv(ctx.regime)) spec.iv_mode = IvMode::BinaryMonotone;
  const GainBounds truth = population_gain_bounds(population, pair, spec);
  const double beta0 = ctx.side == Side::Lower ? truth.beta_l : truth.beta_u;

  const ExactNuisance exact(population);

  auto population_mean = [&](double tau) {
    const PerturbedNuisance fit(exact, direction, tau);
    check_in_range(population, ctx, fit);
    double total = 0.0;
    for (const auto& atom : population.atoms()) {
      const std::span<const double> x(atom.x.data(), atom.x.size());
      const int t10 = pair.delta(x) == 1 && pair.delta_star(x) == 0;
      const int t01 = pair.delta(x) == 0 && pair.delta_star(x) == 1;
      Observation w{atom.y, atom.d, x, atom.z};
      double psi = moment_core(w, fit, ctx, t10, t01) - beta0;
      if (adjusted) psi += adjustment_core(w, fit, ctx, t10, t01);
      total += atom.prob * psi;
    }
    return total;
  };

  OrthogonalityReport report;
  report.beta0 = beta0;
  report.scale = population.support().hi - population.support().lo;

  const double g0 = population_mean(0.0);
  std::vector<std::pair<double, double>> curve;
  curve.reserve(taus.size());
  for (double tau : taus) {
    if (tau == 0.0) continue;
    curve.emplace_back(tau, population_mean(tau));
  }
  report.curve = curve;
  report.curve.insert(report.curve.begin(), {0.0, g0});
  if (curve.size() < 2) {
    throw ArgumentError("orthogonality_check: need at least two nonzero tau values");
  }

  // Least-squares fit of g(tau) = a + b tau + c tau^2 through the grid.
  // E[psi(gamma_tau)] is an exact quadratic in tau for these moments, so the
  // fitted b is the Gateaux derivative at 0 up to roundoff.
  {
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0, r0 = 0, r1 = 0, r2 = 0;
    const double m = static_cast<double>(curve.size() + 1);
    for (const auto& [t, g] : report.curve) {
      s1 += t;
      s2 += t * t;
      s3 += t * t * t;
      s4 += t * t * t * t;
      r0 += g;
      r1 += g * t;
      r2 += g * t * t;
    }
    // Solve the 3x3 normal equations by Cramer's rule.
    const double a11 = m, a12 = s1, a13 = s2;
    const double a22 = s2, a23 = s3, a33 = s4;
    const double det = a11 * (a22 * a33 - a23 * a23) - a12 * (a12 * a33 - a23 * a13) +
                       a13 * (a12 * a23 - a22 * a13);
    const double det_b = a11 * (r1 * a33 - a23 * r2) - r0 * (a12 * a33 - a23 * a13) +
                         a13 * (a12 * r2 - r1 * a13);
    report.slope = det_b / det;
  }

  // Residual decay order from |g(tau) - g(0)| across the grid; everything at
  // the numerical noise floor counts as "flat", reported as +inf.
  {
    const double floor = 1e-13 * std::max(report.scale, std::fabs(beta0));
    double sxx = 0, sxy = 0, sx = 0, sy = 0;
    std::size_t used = 0;
    for (const auto& [t, g] : curve) {
      const double r = std::fabs(g - g0);
      if (r <= floor) continue;
      const double lx = std::log(std::fabs(t));
      const double ly = std::log(r);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++used;
    }
    if (used < 2) {
      report.residual_order = std::numeric_limits<double>::infinity();
    } else {
      const double du = static_cast<double>(used);
      report.residual_order = (du * sxy - sx * sy) / (du * sxx - sx * sx);
    }
  }

  report.pass = std::fabs(report.slope) <= 1e-8 * report.scale &&
                report.residual_order >= 1.9;
  return report;
}

}  // namespace wb
