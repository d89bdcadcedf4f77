#include "wb/identification.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "wb/errors.hpp"

namespace wb {

bool regime_uses_instrument(Regime regime) {
  return regime != Regime::WorstCase && regime != Regime::Mtr;
}

bool regime_is_miv(Regime regime) {
  return regime == Regime::MivWorstCase || regime == Regime::MivMtr;
}

std::string regime_name(Regime regime) {
  switch (regime) {
    case Regime::WorstCase: return "worst-case";
    case Regime::Mtr: return "mtr";
    case Regime::IvWorstCase: return "iv-worst-case";
    case Regime::IvMtr: return "iv-mtr";
    case Regime::MivWorstCase: return "miv-worst-case";
    case Regime::MivMtr: return "miv-mtr";
  }
  return "?";
}

Regime regime_from_name(const std::string& name) {
  if (name == "worst-case") return Regime::WorstCase;
  if (name == "mtr") return Regime::Mtr;
  if (name == "iv-worst-case") return Regime::IvWorstCase;
  if (name == "iv-mtr") return Regime::IvMtr;
  if (name == "miv-worst-case") return Regime::MivWorstCase;
  if (name == "miv-mtr") return Regime::MivMtr;
  throw ArgumentError("unknown regime '" + name +
                      "' (expected worst-case, mtr, iv-worst-case, iv-mtr, "
                      "miv-worst-case or miv-mtr)");
}

void AssumptionSpec::validate() const {
  if (!regime_uses_instrument(regime)) return;
  if (regime_is_miv(regime)) {
    if (miv_levels.size() < 2) {
      throw ArgumentError("MIV regimes need at least two ordered instrument "
                          "levels with weights");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < miv_levels.size(); ++i) {
      if (miv_levels[i].prob < 0.0) throw ArgumentError("MIV level weight < 0");
      if (i > 0 && !(miv_levels[i - 1].z < miv_levels[i].z)) {
        throw ArgumentError("MIV levels must be strictly ascending");
      }
      total += miv_levels[i].prob;
    }
    if (std::fabs(total - 1.0) > 1e-12) {
      throw ArgumentError("MIV level weights must sum to 1");
    }
    return;
  }
  if (iv_mode == IvMode::None) {
    throw ArgumentError("IV regimes require an iv_mode (binary-monotone or "
                        "general-discrete)");
  }
}

namespace {

// The four z-conditional pieces every IV/MIV bound is assembled from.
struct IvPieces {
  double lower_treated;  // eta(1,x,z) p(x,z) + ylo (1-p(x,z))
  double lower_control;  // yhi p(x,z) + eta(0,x,z) (1-p(x,z))
  double upper_treated;  // eta(1,x,z) p(x,z) + yhi (1-p(x,z))
  double upper_control;  // ylo p(x,z) + eta(0,x,z) (1-p(x,z))
};

IvPieces iv_pieces(const NuisanceFit& fit, std::span<const double> x, double z,
                   OutcomeSupport s) {
  const double e1 = fit.eta_z(1, x, z);
  const double e0 = fit.eta_z(0, x, z);
  const double p = fit.propensity_z(x, z);
  return {e1 * p + s.lo * (1.0 - p), s.hi * p + e0 * (1.0 - p),
          e1 * p + s.hi * (1.0 - p), s.lo * p + e0 * (1.0 - p)};
}

CateBounds worst_case_bounds(const NuisanceFit& fit, std::span<const double> x,
                             OutcomeSupport s) {
  const double e1 = fit.eta(1, x);
  const double e0 = fit.eta(0, x);
  const double p = fit.propensity(x);
  return {(e1 - s.hi) * p + (s.lo - e0) * (1.0 - p),
          (e1 - s.lo) * p + (s.hi - e0) * (1.0 - p)};
}

std::vector<double> instrument_levels(const AssumptionSpec& spec,
                                      const NuisanceFit& fit) {
  if (spec.iv_mode == IvMode::BinaryMonotone) {
    const auto levels = fit.z_levels();
    if (levels.size() != 2 || levels[0] != 0.0 || levels[1] != 1.0) {
      throw ArgumentError("binary-monotone IV mode expects an instrument with "
                          "values {0,1}");
    }
    return levels;
  }
  const auto levels = fit.z_levels();
  if (levels.size() > 64) {
    throw ArgumentError("instrument has " + std::to_string(levels.size()) +
                        " distinct levels; the general-discrete IV mode expects "
                        "a genuinely discrete instrument");
  }
  return levels;
}

CateBounds iv_bounds(const AssumptionSpec& spec, const NuisanceFit& fit,
                     std::span<const double> x, OutcomeSupport s) {
  double sup_lt, inf_lc, inf_ut, sup_uc;
  if (spec.iv_mode == IvMode::BinaryMonotone) {
    instrument_levels(spec, fit);
    // Monotone first step pins the optimizers: the treated pieces at z=1,
    // the control pieces at z=0.
    const IvPieces hi = iv_pieces(fit, x, 1.0, s);
    const IvPieces lo = iv_pieces(fit, x, 0.0, s);
    sup_lt = hi.lower_treated;
    inf_lc = lo.lower_control;
    inf_ut = hi.upper_treated;
    sup_uc = lo.upper_control;
  } else {
    sup_lt = -std::numeric_limits<double>::infinity();
    sup_uc = -std::numeric_limits<double>::infinity();
    inf_lc = std::numeric_limits<double>::infinity();
    inf_ut = std::numeric_limits<double>::infinity();
    for (double z : instrument_levels(spec, fit)) {
      const IvPieces piece = iv_pieces(fit, x, z, s);
      sup_lt = std::max(sup_lt, piece.lower_treated);
      inf_lc = std::min(inf_lc, piece.lower_control);
      inf_ut = std::min(inf_ut, piece.upper_treated);
      sup_uc = std::max(sup_uc, piece.upper_control);
    }
  }
  const double upper = inf_ut - sup_uc;
  if (spec.regime == Regime::IvMtr) return {0.0, upper};
  return {sup_lt - inf_lc, upper};
}

CateBounds miv_bounds(const AssumptionSpec& spec, const NuisanceFit& fit,
                      std::span<const double> x, OutcomeSupport s) {
  const std::size_t m = spec.miv_levels.size();
  std::vector<IvPieces> pieces(m);
  std::vector<double> outcome_mean(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    pieces[j] = iv_pieces(fit, x, spec.miv_levels[j].z, s);
    if (spec.regime == Regime::MivMtr) {
      outcome_mean[j] = fit.outcome_mean_z(x, spec.miv_levels[j].z);
    }
  }
  // Running extrema: sup over levels below, inf over levels above.
  std::vector<double> run_sup_lt(m), run_sup_uc(m), run_sup_mu(m);
  std::vector<double> run_inf_lc(m), run_inf_ut(m), run_inf_mu(m);
  for (std::size_t j = 0; j < m; ++j) {
    run_sup_lt[j] = pieces[j].lower_treated;
    run_sup_uc[j] = pieces[j].upper_control;
    run_sup_mu[j] = outcome_mean[j];
    if (j > 0) {
      run_sup_lt[j] = std::max(run_sup_lt[j], run_sup_lt[j - 1]);
      run_sup_uc[j] = std::max(run_sup_uc[j], run_sup_uc[j - 1]);
      run_sup_mu[j] = std::max(run_sup_mu[j], run_sup_mu[j - 1]);
    }
  }
  for (std::size_t jj = m; jj-- > 0;) {
    run_inf_lc[jj] = pieces[jj].lower_control;
    run_inf_ut[jj] = pieces[jj].upper_treated;
    run_inf_mu[jj] = outcome_mean[jj];
    if (jj + 1 < m) {
      run_inf_lc[jj] = std::min(run_inf_lc[jj], run_inf_lc[jj + 1]);
      run_inf_ut[jj] = std::min(run_inf_ut[jj], run_inf_ut[jj + 1]);
      run_inf_mu[jj] = std::min(run_inf_mu[jj], run_inf_mu[jj + 1]);
    }
  }
  double lower = 0.0, upper = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double w = spec.miv_levels[j].prob;
    upper += w * (run_inf_ut[j] - run_sup_uc[j]);
    if (spec.regime == Regime::MivMtr) {
      lower += w * (run_sup_mu[j] - run_inf_mu[j]);
    } else {
      lower += w * (run_sup_lt[j] - run_inf_lc[j]);
    }
  }
  return {lower, upper};
}

}  // namespace

CateBounds cate_bounds(const AssumptionSpec& spec, const NuisanceFit& fit,
                       std::span<const double> x, OutcomeSupport support) {
  spec.validate();
  switch (spec.regime) {
    case Regime::WorstCase:
      return worst_case_bounds(fit, x, support);
    case Regime::Mtr: {
      const CateBounds wc = worst_case_bounds(fit, x, support);
      return {0.0, wc.upper};
    }
    case Regime::IvWorstCase:
    case Regime::IvMtr:
      return iv_bounds(spec, fit, x, support);
    case Regime::MivWorstCase:
    case Regime::MivMtr:
      return miv_bounds(spec, fit, x, support);
  }
  throw ArgumentError("cate_bounds: unknown regime");
}

namespace {

template <typename Fn>
auto with_row_context(std::size_t row, Fn&& fn) {
  try {
    return fn();
  } catch (const DomainError& e) {
    throw DomainError("row " + std::to_string(row + 1) + ": " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError("row " + std::to_string(row + 1) + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ArgumentError("row " + std::to_string(row + 1) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("row " + std::to_string(row + 1) + ": " + e.what());
  }
}

void note_crossing(std::vector<BoundDiagnostic>* diagnostics, std::size_t row,
                   const CateBounds& bounds) {
  if (bounds.lower <= bounds.upper || diagnostics == nullptr) return;
  std::ostringstream msg;
  msg << "estimated CATE interval crosses at row " << row + 1 << ": lower "
      << bounds.lower << " > upper " << bounds.upper
      << " (kept as-is; inconsistent first-stage estimates)";
  diagnostics->push_back({row, msg.str()});
}

}  // namespace

GainBounds plug_in_gain_bounds(const Dataset& data, const PolicyPair& pair,
                               const AssumptionSpec& spec,
                               std::span<const std::shared_ptr<const NuisanceFit>> fits,
                               const FoldAssignment& folds,
                               std::vector<BoundDiagnostic>* diagnostics) {
  spec.validate();
  if (fits.size() != folds.k) {
    throw ArgumentError("plug_in_gain_bounds: one fit per fold required");
  }
  if (folds.fold_of.size() != data.n()) {
    throw ArgumentError("plug_in_gain_bounds: fold assignment does not match data");
  }
  const IndicatorVectors ind = policy_indicators(pair, data);
  double sum_l = 0.0, sum_u = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const int t10 = ind.theta10[i];
    const int t01 = ind.theta01[i];
    if (t10 == 0 && t01 == 0) continue;  // contributes exactly zero
    const NuisanceFit& fit = *fits[folds.fold_of[i]];
    const CateBounds b = with_row_context(
        i, [&] { return cate_bounds(spec, fit, data.x_row(i), data.support()); });
    note_crossing(diagnostics, i, b);
    sum_l += b.lower * t10 - b.upper * t01;
    sum_u += b.upper * t10 - b.lower * t01;
  }
  const double n = static_cast<double>(data.n());
  return {sum_l / n, sum_u / n};
}

GainBounds plug_in_gain_bounds(const Dataset& data, const PolicyPair& pair,
                               const AssumptionSpec& spec, const NuisanceFit& fit,
                               std::vector<BoundDiagnostic>* diagnostics) {
  std::vector<std::shared_ptr<const NuisanceFit>> fits = {
      std::shared_ptr<const NuisanceFit>(&fit, [](const NuisanceFit*) {})};
  return plug_in_gain_bounds(data, pair, spec, fits, trivial_fold(data.n()),
                             diagnostics);
}

GainBounds weighted_gain_bounds(const Dataset& data, const RandomizedRule& delta,
                                const RandomizedRule& delta_star,
                                const WeightFunction& w, const AssumptionSpec& spec,
                                std::span<const std::shared_ptr<const NuisanceFit>> fits,
                                const FoldAssignment& folds) {
  spec.validate();
  if (fits.size() != folds.k) {
    throw ArgumentError("weighted_gain_bounds: one fit per fold required");
  }
  double sum_l = 0.0, sum_u = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto x = data.x_row(i);
    const double weight = w(x);
    if (weight < 0.0) {
      throw ArgumentError("weighted_gain_bounds: negative weight at row " +
                          std::to_string(i + 1));
    }
    const double a = delta(x);
    const double b = delta_star(x);
    if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) {
      throw ArgumentError("weighted_gain_bounds: rule output outside [0,1] at row " +
                          std::to_string(i + 1));
    }
    const double psi = weight * (a - b);
    if (psi == 0.0) continue;
    const NuisanceFit& fit = *fits[folds.fold_of[i]];
    const CateBounds cb = with_row_context(
        i, [&] { return cate_bounds(spec, fit, x, data.support()); });
    const double mag = std::fabs(psi);
    if (psi > 0.0) {
      sum_l += cb.lower * mag;
      sum_u += cb.upper * mag;
    } else {
      sum_l -= cb.upper * mag;
      sum_u -= cb.lower * mag;
    }
  }
  const double n = static_cast<double>(data.n());
  return {sum_l / n, sum_u / n};
}

// ---------------------------------------------------------------------------
// Exact populations

DiscretePopulation::DiscretePopulation(std::vector<PopulationAtom> atoms,
                                       OutcomeSupport support)
    : atoms_(std::move(atoms)), support_(support) {
  if (atoms_.empty()) throw ArgumentError("population: no atoms");
  double total = 0.0;
  const std::size_t dim = atoms_.front().x.size();
  has_z_ = atoms_.front().z.has_value();
  std::map<std::vector<double>, double> cells;
  for (const auto& atom : atoms_) {
    if (atom.prob <= 0.0) throw ArgumentError("population: atom with prob <= 0");
    if (atom.x.size() != dim) throw ArgumentError("population: ragged x vectors");
    if (atom.z.has_value() != has_z_) {
      throw ArgumentError("population: z must be present on all atoms or none");
    }
    if (atom.d != 0 && atom.d != 1) throw ArgumentError("population: d not binary");
    if (atom.y < support_.lo || atom.y > support_.hi) {
      throw ArgumentError("population: outcome outside declared support");
    }
    total += atom.prob;
    cells[atom.x] += atom.prob;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw ArgumentError("population: probabilities sum to " + std::to_string(total));
  }
  x_cells_.assign(cells.begin(), cells.end());
}

std::vector<double> DiscretePopulation::z_values() const {
  std::vector<double> out;
  if (!has_z_) return out;
  for (const auto& atom : atoms_) out.push_back(*atom.z);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<MivLevel> DiscretePopulation::z_marginal() const {
  std::map<double, double> mass;
  for (const auto& atom : atoms_) {
    if (!atom.z) throw ArgumentError("population: no instrument present");
    mass[*atom.z] += atom.prob;
  }
  std::vector<MivLevel> out;
  for (const auto& [z, p] : mass) out.push_back({z, p});
  return out;
}

Dataset DiscretePopulation::to_dataset(std::size_t copies_per_unit_mass,
                                       std::vector<std::string> x_names) const {
  std::vector<double> y;
  std::vector<std::uint8_t> d;
  std::vector<double> xr;
  std::optional<std::vector<double>> z;
  if (has_z_) z.emplace();
  for (const auto& atom : atoms_) {
    const double count_real = atom.prob * static_cast<double>(copies_per_unit_mass);
    const auto count = static_cast<std::size_t>(std::llround(count_real));
    if (std::fabs(count_real - static_cast<double>(count)) > 1e-6) {
      throw ArgumentError("population: copies_per_unit_mass does not make atom "
                          "counts integral");
    }
    for (std::size_t c = 0; c < count; ++c) {
      y.push_back(atom.y);
      d.push_back(static_cast<std::uint8_t>(atom.d));
      xr.insert(xr.end(), atom.x.begin(), atom.x.end());
      if (has_z_) z->push_back(*atom.z);
    }
  }
  return Dataset(std::move(y), std::move(d), std::move(xr), std::move(x_names),
                 std::move(z), support_);
}

ExactNuisance::ExactNuisance(const DiscretePopulation& population)
    : has_z_(population.has_z()) {
  struct Accum {
    double prob = 0.0;
    double prob_d[2] = {0, 0};
    double sum_y[2] = {0, 0};
  };
  std::map<std::vector<double>, Accum> by_x;
  std::map<std::pair<std::vector<double>, double>, Accum> by_xz;
  std::set<double> levels;
  for (const auto& atom : population.atoms()) {
    Accum& a = by_x[atom.x];
    a.prob += atom.prob;
    a.prob_d[atom.d] += atom.prob;
    a.sum_y[atom.d] += atom.prob * atom.y;
    if (has_z_) {
      Accum& az = by_xz[{atom.x, *atom.z}];
      az.prob += atom.prob;
      az.prob_d[atom.d] += atom.prob;
      az.sum_y[atom.d] += atom.prob * atom.y;
      z_share_[atom.x][*atom.z] += atom.prob;
      levels.insert(*atom.z);
    }
  }
  auto to_moments = [](const Accum& a) {
    Moments m;
    m.prob = a.prob;
    m.p1 = a.prob_d[1] / a.prob;
    for (int d : {0, 1}) {
      m.has_arm[d] = a.prob_d[d] > 0.0;
      m.mean_y[d] = m.has_arm[d] ? a.sum_y[d] / a.prob_d[d] : 0.0;
    }
    m.mean_y_all = (a.sum_y[0] + a.sum_y[1]) / a.prob;
    return m;
  };
  for (const auto& [key, a] : by_x) by_x_[key] = to_moments(a);
  for (const auto& [key, a] : by_xz) by_xz_[key] = to_moments(a);
  for (auto& [x, shares] : z_share_) {
    const double total = by_x_[x].prob;
    for (auto& [z, p] : shares) p /= total;
  }
  levels_.assign(levels.begin(), levels.end());
}

const ExactNuisance::Moments& ExactNuisance::x_moment(std::span<const double> x) const {
  const std::vector<double> key(x.begin(), x.end());
  const auto it = by_x_.find(key);
  if (it == by_x_.end()) {
    throw DomainError("exact population: covariate cell not in the population");
  }
  return it->second;
}

const ExactNuisance::Moments& ExactNuisance::xz_moment(std::span<const double> x,
                                                       double z) const {
  const std::pair<std::vector<double>, double> key{{x.begin(), x.end()}, z};
  const auto it = by_xz_.find(key);
  if (it == by_xz_.end()) {
    throw DomainError("exact population: cell has zero probability at Z=" +
                      std::to_string(z));
  }
  return it->second;
}

double ExactNuisance::eta(int d, std::span<const double> x) const {
  const Moments& m = x_moment(x);
  if (!m.has_arm[d]) {
    throw DomainError("exact population: P(D=" + std::to_string(d) +
                      ") is zero in this cell");
  }
  return m.mean_y[d];
}

double ExactNuisance::propensity(std::span<const double> x) const {
  return x_moment(x).p1;
}

double ExactNuisance::eta_z(int d, std::span<const double> x, double z) const {
  const Moments& m = xz_moment(x, z);
  if (!m.has_arm[d]) {
    throw DomainError("exact population: P(D=" + std::to_string(d) +
                      ", Z=" + std::to_string(z) + ") is zero in this cell");
  }
  return m.mean_y[d];
}

double ExactNuisance::propensity_z(std::span<const double> x, double z) const {
  return xz_moment(x, z).p1;
}

double ExactNuisance::instrument_share(double z, std::span<const double> x) const {
  const std::vector<double> key(x.begin(), x.end());
  const auto it = z_share_.find(key);
  if (it == z_share_.end()) {
    throw DomainError("exact population: covariate cell not in the population");
  }
  const auto zt = it->second.find(z);
  return zt == it->second.end() ? 0.0 : zt->second;
}

double ExactNuisance::outcome_mean_z(std::span<const double> x, double z) const {
  return xz_moment(x, z).mean_y_all;
}

std::vector<double> ExactNuisance::z_levels() const {
  if (!has_z_) return NuisanceFit::z_levels();
  return levels_;
}

// ---------------------------------------------------------------------------
// Brute-force oracle: everything below recomputes conditional means and the
// bound formulas directly from the enumerated distribution, independent of
// cate_bounds and the NuisanceFit machinery.

namespace {

struct CellTable {
  double prob = 0.0;
  double prob_d[2] = {0, 0};
  double sum_y[2] = {0, 0};
  std::map<double, std::array<double, 5>> z;  // z -> {prob, probd0, probd1, sy0, sy1}
};

double oracle_eta(const CellTable& c, int d) {
  if (c.prob_d[d] <= 0.0) {
    throw DomainError("population bounds: a required conditioning cell has zero "
                      "probability (D=" + std::to_string(d) + ")");
  }
  return c.sum_y[d] / c.prob_d[d];
}

struct ZCellView {
  double p = 0.0;      // P(D=1 | x, z)
  double eta1 = 0.0;   // E[Y | D=1, x, z] (valid when pd1 > 0)
  double eta0 = 0.0;
  double mean_y = 0.0; // E[Y | x, z]
  bool has1 = false, has0 = false;
};

ZCellView z_view(const CellTable& cell, double z) {
  const auto it = cell.z.find(z);
  if (it == cell.z.end() || it->second[0] <= 0.0) {
    throw DomainError("population bounds: instrument level " + std::to_string(z) +
                      " has zero probability in a required covariate cell");
  }
  const auto& a = it->second;
  ZCellView v;
  v.p = a[2] / a[0];
  v.has0 = a[1] > 0.0;
  v.has1 = a[2] > 0.0;
  if (v.has0) v.eta0 = a[3] / a[1];
  if (v.has1) v.eta1 = a[4] / a[2];
  v.mean_y = (a[3] + a[4]) / a[0];
  return v;
}

// The same four pieces as in estimation, recomputed from first principles.
// An empty arm always carries coefficient zero (p or 1-p vanishes with it),
// so the stored 0 mean is never weighted in.
double piece_lower_treated(const ZCellView& v, OutcomeSupport s) {
  return v.eta1 * v.p + s.lo * (1.0 - v.p);
}
double piece_lower_control(const ZCellView& v, OutcomeSupport s) {
  return s.hi * v.p + v.eta0 * (1.0 - v.p);
}
double piece_upper_treated(const ZCellView& v, OutcomeSupport s) {
  return v.eta1 * v.p + s.hi * (1.0 - v.p);
}
double piece_upper_control(const ZCellView& v, OutcomeSupport s) {
  return s.lo * v.p + v.eta0 * (1.0 - v.p);
}

}  // namespace

GainBounds population_gain_bounds(const DiscretePopulation& population,
                                  const PopulationPolicyPair& pair,
                                  const AssumptionSpec& spec) {
  spec.validate();
  if (regime_uses_instrument(spec.regime) && !population.has_z()) {
    throw ArgumentError("population bounds: regime needs an instrument but the "
                        "population has none");
  }

  std::map<std::vector<double>, CellTable> cells;
  std::map<double, double> z_marginal;
  for (const auto& atom : population.atoms()) {
    CellTable& c = cells[atom.x];
    c.prob += atom.prob;
    c.prob_d[atom.d] += atom.prob;
    c.sum_y[atom.d] += atom.prob * atom.y;
    if (atom.z) {
      auto& a = c.z[*atom.z];
      a[0] += atom.prob;
      a[1 + atom.d] += atom.prob;
      a[3 + atom.d] += atom.prob * atom.y;
      z_marginal[*atom.z] += atom.prob;
    }
  }

  const OutcomeSupport s = population.support();
  std::vector<double> all_z;
  for (const auto& [z, p] : z_marginal) all_z.push_back(z);

  double beta_l = 0.0, beta_u = 0.0;
  for (const auto& [x_key, cell] : cells) {
    const std::span<const double> x(x_key.data(), x_key.size());
    const int t10 = pair.delta(x) == 1 && pair.delta_star(x) == 0;
    const int t01 = pair.delta(x) == 0 && pair.delta_star(x) == 1;
    if (t10 == 0 && t01 == 0) continue;

    double lower = 0.0, upper = 0.0;
    switch (spec.regime) {
      case Regime::WorstCase:
      case Regime::Mtr: {
        const double p = cell.prob_d[1] / cell.prob;
        const double e1 = p > 0.0 ? oracle_eta(cell, 1) : 0.0;
        const double e0 = p < 1.0 ? oracle_eta(cell, 0) : 0.0;
        lower = (e1 - s.hi) * p + (s.lo - e0) * (1.0 - p);
        upper = (e1 - s.lo) * p + (s.hi - e0) * (1.0 - p);
        if (spec.regime == Regime::Mtr) lower = 0.0;
        break;
      }
      case Regime::IvWorstCase:
      case Regime::IvMtr: {
        double sup_lt = -std::numeric_limits<double>::infinity();
        double sup_uc = -std::numeric_limits<double>::infinity();
        double inf_lc = std::numeric_limits<double>::infinity();
        double inf_ut = std::numeric_limits<double>::infinity();
        for (double z : all_z) {
          const ZCellView v = z_view(cell, z);
          sup_lt = std::max(sup_lt, piece_lower_treated(v, s));
          inf_lc = std::min(inf_lc, piece_lower_control(v, s));
          inf_ut = std::min(inf_ut, piece_upper_treated(v, s));
          sup_uc = std::max(sup_uc, piece_upper_control(v, s));
        }
        lower = spec.regime == Regime::IvMtr ? 0.0 : sup_lt - inf_lc;
        upper = inf_ut - sup_uc;
        break;
      }
      case Regime::MivWorstCase:
      case Regime::MivMtr: {
        for (const auto& [z, pz] : z_marginal) {
          double sup_lt = -std::numeric_limits<double>::infinity();
          double sup_uc = -std::numeric_limits<double>::infinity();
          double sup_mu = -std::numeric_limits<double>::infinity();
          double inf_lc = std::numeric_limits<double>::infinity();
          double inf_ut = std::numeric_limits<double>::infinity();
          double inf_mu = std::numeric_limits<double>::infinity();
          for (double other : all_z) {
            const ZCellView v = z_view(cell, other);
            if (other <= z) {
              sup_lt = std::max(sup_lt, piece_lower_treated(v, s));
              sup_uc = std::max(sup_uc, piece_upper_control(v, s));
              sup_mu = std::max(sup_mu, v.mean_y);
            }
            if (other >= z) {
              inf_lc = std::min(inf_lc, piece_lower_control(v, s));
              inf_ut = std::min(inf_ut, piece_upper_treated(v, s));
              inf_mu = std::min(inf_mu, v.mean_y);
            }
          }
          upper += pz * (inf_ut - sup_uc);
          lower += pz * (spec.regime == Regime::MivMtr ? sup_mu - inf_mu
                                                       : sup_lt - inf_lc);
        }
        break;
      }
    }
    beta_l += cell.prob * (lower * t10 - upper * t01);
    beta_u += cell.prob * (upper * t10 - lower * t01);
  }
  return {beta_l, beta_u};
}

}  // namespace wb
