#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wb/dataset.hpp"
#include "wb/folds.hpp"
#include "wb/nuisance.hpp"
#include "wb/policy.hpp"

namespace wb {

enum class Regime {
  WorstCase,
  Mtr,
  IvWorstCase,
  IvMtr,
  MivWorstCase,
  MivMtr,
};

enum class IvMode { None, BinaryMonotone, GeneralDiscrete };

bool regime_uses_instrument(Regime regime);
bool regime_is_miv(Regime regime);
std::string regime_name(Regime regime);
Regime regime_from_name(const std::string& name);

struct MivLevel {
  double z = 0.0;
  double prob = 0.0;  // P(Z = z)
};

struct AssumptionSpec {
  Regime regime = Regime::WorstCase;
  IvMode iv_mode = IvMode::None;
  std::vector<MivLevel> miv_levels;  // ascending z, probs summing to 1

  void validate() const;
};

// Per-covariate-value bounds on the conditional average treatment effect.
struct CateBounds {
  double lower = 0.0;
  double upper = 0.0;
};

struct GainBounds {
  double beta_l = 0.0;
  double beta_u = 0.0;
};

// Diagnostics raised while evaluating bounds (e.g. an estimated interval
// with lower > upper, which is possible under IV intersections in finite
// samples). Values are reported, never clamped.
struct BoundDiagnostic {
  std::size_t row = 0;
  std::string message;
};

CateBounds cate_bounds(const AssumptionSpec& spec, const NuisanceFit& fit,
                       std::span<const double> x, OutcomeSupport support);

// Sample-analog bounds on the welfare gain; each row is evaluated under the
// fit of its own fold.
GainBounds plug_in_gain_bounds(const Dataset& data, const PolicyPair& pair,
                               const AssumptionSpec& spec,
                               std::span<const std::shared_ptr<const NuisanceFit>> fits,
                               const FoldAssignment& folds,
                               std::vector<BoundDiagnostic>* diagnostics = nullptr);

// Convenience overload: one fit for every row.
GainBounds plug_in_gain_bounds(const Dataset& data, const PolicyPair& pair,
                               const AssumptionSpec& spec, const NuisanceFit& fit,
                               std::vector<BoundDiagnostic>* diagnostics = nullptr);

// Weighted / randomized-rule generalization: rules map x to [0,1] and w is a
// nonnegative weight; psi(x) = w(x) * (delta(x) - delta_star(x)).
using RandomizedRule = std::function<double(std::span<const double>)>;
using WeightFunction = std::function<double(std::span<const double>)>;

GainBounds weighted_gain_bounds(const Dataset& data, const RandomizedRule& delta,
                                const RandomizedRule& delta_star,
                                const WeightFunction& w, const AssumptionSpec& spec,
                                std::span<const std::shared_ptr<const NuisanceFit>> fits,
                                const FoldAssignment& folds);

// -------------------------------------------------------------------------
// Exact finite populations. These provide both the brute-force oracle used
// by tests and exact nuisance functions gamma_0.

struct PopulationAtom {
  double y = 0.0;
  int d = 0;
  std::vector<double> x;
  std::optional<double> z;
  double prob = 0.0;
};

class DiscretePopulation {
 public:
  DiscretePopulation(std::vector<PopulationAtom> atoms, OutcomeSupport support);

  const std::vector<PopulationAtom>& atoms() const { return atoms_; }
  OutcomeSupport support() const { return support_; }
  bool has_z() const { return has_z_; }

  // Enumerated covariate cells with their marginal probabilities.
  const std::vector<std::pair<std::vector<double>, double>>& x_cells() const {
    return x_cells_;
  }
  std::vector<double> z_values() const;
  std::vector<MivLevel> z_marginal() const;

  // A dataset that enumerates the population with the given number of copies
  // per unit of probability; probs * copies must be integral.
  Dataset to_dataset(std::size_t copies_per_unit_mass,
                     std::vector<std::string> x_names) const;

 private:
  std::vector<PopulationAtom> atoms_;
  OutcomeSupport support_;
  bool has_z_ = false;
  std::vector<std::pair<std::vector<double>, double>> x_cells_;
};

// Exact conditional means and shares of a DiscretePopulation, exposed through
// the NuisanceFit interface.
class ExactNuisance final : public NuisanceFit {
 public:
  explicit ExactNuisance(const DiscretePopulation& population);

  double eta(int d, std::span<const double> x) const override;
  double propensity(std::span<const double> x) const override;
  bool has_instrument() const override { return has_z_; }
  double eta_z(int d, std::span<const double> x, double z) const override;
  double propensity_z(std::span<const double> x, double z) const override;
  double instrument_share(double z, std::span<const double> x) const override;
  double outcome_mean_z(std::span<const double> x, double z) const override;
  std::vector<double> z_levels() const override;
  std::string describe() const override { return "exact-population"; }

 private:
  struct Moments {
    double prob = 0.0;
    double p1 = 0.0;           // P(D=1 | cell)
    double mean_y[2] = {0, 0}; // E[Y | D=d, cell]
    bool has_arm[2] = {false, false};
    double mean_y_all = 0.0;   // E[Y | cell]
  };

  const Moments& x_moment(std::span<const double> x) const;
  const Moments& xz_moment(std::span<const double> x, double z) const;

  bool has_z_ = false;
  std::map<std::vector<double>, Moments> by_x_;
  std::map<std::pair<std::vector<double>, double>, Moments> by_xz_;
  std::map<std::vector<double>, std::map<double, double>> z_share_;
  std::vector<double> levels_;
};

// Deterministic policies evaluated on population covariate vectors.
struct PopulationPolicyPair {
  std::function<int(std::span<const double>)> delta_star;
  std::function<int(std::span<const double>)> delta;
};

// Exact bounds on the welfare gain, computed directly from enumerated
// conditional means (independent of the estimation code path).
GainBounds population_gain_bounds(const DiscretePopulation& population,
                                  const PopulationPolicyPair& pair,
                                  const AssumptionSpec& spec);

}  // namespace wb
