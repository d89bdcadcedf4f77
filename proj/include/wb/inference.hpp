#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wb/dataset.hpp"
#include "wb/folds.hpp"
#include "wb/identification.hpp"
#include "wb/nuisance.hpp"
#include "wb/policy.hpp"

namespace wb {

enum class Side { Lower, Upper };

// How the influence adjustment treats the instrument under the binary
// monotone IV regimes. InstrumentWeighted divides each z-branch by the
// estimated share P(Z=z|X); Unweighted keeps the branches as they are.
// InstrumentWeighted is the default: it is the variant that passes the
// orthogonality check on enumerated populations (see orthogonality_check).
enum class AdjustmentMode { Unweighted, InstrumentWeighted };

std::string adjustment_mode_name(AdjustmentMode mode);
AdjustmentMode adjustment_mode_from_name(const std::string& name);

// Everything the moment function needs besides the observation itself.
// Only WorstCase, Mtr, and the binary-monotone IV regimes are allowed here;
// the other regimes have no orthogonalized moments and are plug-in only.
struct MomentContext {
  Side side = Side::Lower;
  Regime regime = Regime::WorstCase;
  OutcomeSupport support;
  AdjustmentMode adjustment = AdjustmentMode::InstrumentWeighted;

  void validate() const;
};

bool regime_supports_ci(Regime regime, IvMode iv_mode);

struct Observation {
  double y = 0.0;
  int d = 0;
  std::span<const double> x;
  std::optional<double> z;
};

// Original moment m(w, beta, gamma): the Delta-combination for the chosen
// side minus beta. Linear in beta with slope -1.
double moment_m(const Observation& w, double beta, const NuisanceFit& fit,
                const MomentContext& ctx, int theta10, int theta01);

// Influence-function adjustment phi(w, gamma) for first-stage estimation.
double adjustment_phi(const Observation& w, const NuisanceFit& fit,
                      const MomentContext& ctx, int theta10, int theta01);

// ---------------------------------------------------------------------------
// Cross-fitted estimation

struct SideEstimate {
  double beta = 0.0;
  double omega = 0.0;  // variance of the per-observation moment
};

struct CrossFitMoments {
  SideEstimate lower, upper;
  std::vector<BoundDiagnostic> diagnostics;
};

// Closed-form solution of the empirical moment equation for both sides in a
// single pass: beta = mean of (moment without beta) + adjustment (when
// debiased), omega = mean of the squared centered moment.
CrossFitMoments crossfit_moments(const Dataset& data, const IndicatorVectors& ind,
                                 std::span<const std::shared_ptr<const NuisanceFit>> fits,
                                 const FoldAssignment& folds, Regime regime,
                                 AdjustmentMode adjustment, bool debiased);

struct EstimatorConfig {
  AssumptionSpec spec;
  FirstStageConfig first_stage;
  std::size_t k = 2;
  std::uint64_t seed = 0;
  double alpha = 0.95;
  AdjustmentMode adjustment = AdjustmentMode::InstrumentWeighted;
};

struct BoundsEstimate {
  Regime regime = Regime::WorstCase;
  double beta_l = 0.0, beta_u = 0.0;
  double omega_l = 0.0, omega_u = 0.0;
  bool has_ci = false;  // false for plug-in-only regimes
  std::pair<double, double> ci_l{0, 0}, ci_u{0, 0};
  double alpha = 0.95;
  std::size_t n = 0, k = 0;
  std::uint64_t seed = 0;
  std::string first_stage;
  std::string adjustment_mode;
  std::vector<std::string> diagnostics;
};

// Locally robust cross-fitted estimate with confidence intervals where the
// regime supports them; MIV and general-discrete IV fall back to plug-in
// point estimates with has_ci = false.
BoundsEstimate lr_estimate(const Dataset& data, const PolicyPair& pair,
                           const EstimatorConfig& config);

// ---------------------------------------------------------------------------
// Orthogonality diagnostics on exact populations

// Additive perturbation of the nuisance functions, specified cell by cell.
// Cells absent from a map are left at their true value.
struct NuisancePerturbation {
  std::map<std::vector<double>, double> d_eta1, d_eta0, d_p;
  std::map<std::pair<std::vector<double>, double>, double> d_eta1_z, d_eta0_z, d_p_z;
};

struct OrthogonalityReport {
  double beta0 = 0.0;
  double scale = 0.0;           // (yhi - ylo), the unit for the slope test
  double slope = 0.0;           // fitted d/dtau E[psi] at tau = 0
  double residual_order = 0.0;  // decay order of |E psi(tau) - E psi(0)|;
                                // +inf when flat at machine precision
  bool pass = false;
  std::vector<std::pair<double, double>> curve;  // (tau, E[psi(tau)])
};

// Exact Gateaux-derivative check of the (adjusted or bare) moment along a
// nuisance direction: gamma_tau = gamma_0 + tau * direction, expectations
// taken exactly over the enumerated population at the true bound beta_0.
OrthogonalityReport orthogonality_check(const DiscretePopulation& population,
                                        const PopulationPolicyPair& pair,
                                        const MomentContext& ctx,
                                        const NuisancePerturbation& direction,
                                        std::span<const double> taus, bool adjusted);

}  // namespace wb
