#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "wb/dataset.hpp"
#include "wb/identification.hpp"
#include "wb/inference.hpp"

namespace wb {

// Synthetic data-generating process: discrete X, Bernoulli instrument Z,
// selection D = 1{p(X,Z) >= U} with U ~ Uniform[0,1], and lognormal potential
// outcomes whose conditional mean is linear in (x, u).
struct DgpSpec {
  std::vector<double> x_levels{7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18};
  std::vector<double> x_pmf{0.01, 0.06, 0.07, 0.11, 0.13, 0.43,
                            0.07, 0.06, 0.02, 0.02, 0.01, 0.01};
  double z_prob = 2.0 / 3.0;
  std::array<double, 3> propensity_coef{-4.89, 0.05, 5.0};  // intercept, x, z
  std::array<double, 3> m1_coef{5591.0, 1027.0, 2000.0};    // intercept, x, u
  std::array<double, 3> m0_coef{-1127.0, 1389.0, 1000.0};
  double sigma1 = 11000.0;
  double sigma0 = 11000.0;
  OutcomeSupport support{0.0, 160000.0};

  void validate() const;
  double propensity(double x, double z) const;
  double mean_outcome(int d, double x, double u) const;
};

// One observation costs exactly four uniform draws (X, Z, U, and the normal
// behind the lognormal outcome), so samples are reproducible draw-for-draw.
Dataset dgp_sample(const DgpSpec& spec, std::size_t n, std::uint64_t seed);

// Draw from a lognormal with the given mean and standard deviation (moment
// parameterization); exposed for the distribution-check tests.
double lognormal_draw(double mean, double sd, class SplitMix64& rng);

enum class OracleTarget { Gain, WorstCase, IvWorstCase };

OracleTarget oracle_target_from_name(const std::string& name);
std::string oracle_target_name(OracleTarget target);

// Exact population quantities for the DGP, by one-dimensional quadrature
// over the selection rank u plus the Bayes decompositions across z.
double population_oracle_gain(const DgpSpec& spec, const PopulationPolicyPair& pair);
GainBounds population_oracle_bounds(const DgpSpec& spec,
                                    const PopulationPolicyPair& pair,
                                    OracleTarget target);

// True nuisance functions of the DGP (x-marginal and z-conditional), for the
// true-nuisance simulation variants and for oracle-vs-estimate tests.
std::shared_ptr<const NuisanceFit> dgp_true_nuisance(const DgpSpec& spec);

// ---------------------------------------------------------------------------
// Coverage study

enum class McEstimator { Original, Debiased };
enum class McFitting { NoCrossfit, Crossfit, TrueNuisance };

std::string mc_estimator_name(McEstimator e);
std::string mc_fitting_name(McFitting f);

struct McVariant {
  McEstimator estimator = McEstimator::Debiased;
  McFitting fitting = McFitting::Crossfit;
};

struct MonteCarloConfig {
  DgpSpec dgp;
  // Policies over the single covariate "x".
  std::string policy_star = "x <= 11";
  std::string policy = "x <= 12";
  Regime regime = Regime::WorstCase;
  Side side = Side::Lower;
  std::vector<std::size_t> sample_sizes{100, 1000, 5000, 10000};
  std::size_t replications = 1000;
  std::uint64_t seed = 0;
  std::size_t folds = 2;
  double alpha = 0.95;
  std::vector<McVariant> variants;  // empty = all six
  std::size_t threads = 0;          // 0 = hardware concurrency
  double max_failure_share = 0.01;
};

struct CoverageCell {
  McVariant variant;
  std::size_t n = 0;
  std::size_t replications = 0;  // successful ones
  std::size_t failed = 0;
  double coverage = 0.0;
  double avg_length = 0.0;
};

struct CoverageReport {
  double oracle_value = 0.0;
  Regime regime = Regime::WorstCase;
  Side side = Side::Lower;
  std::uint64_t seed = 0;
  std::size_t requested_replications = 0;
  std::vector<CoverageCell> cells;

  std::string to_table() const;
};

// Coverage and average length of the confidence intervals for the chosen
// bound across replications. Replication r draws its sample from RNG stream
// (seed, r); aggregation runs in replication order, so the report does not
// depend on the number of worker threads.
CoverageReport monte_carlo(const MonteCarloConfig& config);

}  // namespace wb
