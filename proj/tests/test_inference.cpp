#include <doctest.h>

#include <cmath>
#include <numeric>

#include "test_helpers.hpp"
#include "wb/errors.hpp"
#include "wb/inference.hpp"
#include "wb/simulation.hpp"
#include "wb/stats.hpp"

using wb::AdjustmentMode;
using wb::AssumptionSpec;
using wb::IvMode;
using wb::MomentContext;
using wb::NuisancePerturbation;
using wb::Observation;
using wb::Regime;
using wb::Side;
using wb_test::TableNuisance;

namespace {

// Policies with both a newly treated cell (x=0) and a no-longer-treated
// cell (x=2), so every theta pattern is exercised.
wb::PopulationPolicyPair swap_policies() {
  wb::PopulationPolicyPair pair;
  pair.delta_star = [](std::span<const double> x) { return x[0] >= 1.0 ? 1 : 0; };
  pair.delta = [](std::span<const double> x) { return x[0] <= 1.0 ? 1 : 0; };
  return pair;
}

NuisancePerturbation direction_for(const wb::DiscretePopulation& population,
                                   bool eta1, bool eta0, bool prop, bool iv) {
  NuisancePerturbation dir;
  for (const auto& [x_key, mass] : population.x_cells()) {
    const double bump = 0.4 + 0.2 * x_key[0];
    if (!iv) {
      if (eta1) dir.d_eta1[x_key] = bump;
      if (eta0) dir.d_eta0[x_key] = -0.8 * bump;
      if (prop) dir.d_p[x_key] = 0.05 + 0.03 * x_key[0];
    } else {
      if (eta1) dir.d_eta1_z[{x_key, 1.0}] = bump;
      if (eta0) dir.d_eta0_z[{x_key, 0.0}] = -0.8 * bump;
      if (prop) {
        dir.d_p_z[{x_key, 1.0}] = 0.05 + 0.03 * x_key[0];
        dir.d_p_z[{x_key, 0.0}] = -0.04;
      }
    }
  }
  return dir;
}

const std::vector<double> kTaus{-0.4, -0.2, -0.1, -0.05, 0.05, 0.1, 0.2, 0.4};

}  // namespace

TEST_CASE("moment_m worked examples") {
  TableNuisance fit;
  fit.eta1[1.0] = 10.0;
  fit.eta0[1.0] = 5.0;
  fit.p[1.0] = 0.5;
  const double x1[] = {1.0};
  MomentContext ctx{Side::Lower, Regime::WorstCase, {0, 20},
                    AdjustmentMode::InstrumentWeighted};
  Observation w{7.0, 1, x1, std::nullopt};

  // with both indicators off, m reduces to -beta
  CHECK(wb::moment_m(w, 3.0, fit, ctx, 0, 0) == doctest::Approx(-3.0));
  // worst-case lower with theta10 = 1 equals the lower CATE bound
  CHECK(wb::moment_m(w, 0.0, fit, ctx, 1, 0) == doctest::Approx(-7.5));

  TableNuisance ivfit;
  ivfit.levels = {0.0, 1.0};
  ivfit.eta1z[{1.0, 1.0}] = 10.0;
  ivfit.pz[{1.0, 1.0}] = 0.9;
  ivfit.eta0z[{1.0, 0.0}] = 5.0;
  ivfit.pz[{1.0, 0.0}] = 0.1;
  MomentContext iv_ctx{Side::Lower, Regime::IvWorstCase, {0, 20},
                       AdjustmentMode::InstrumentWeighted};
  Observation wz{7.0, 1, x1, 1.0};
  CHECK(wb::moment_m(wz, 1.0, ivfit, iv_ctx, 1, 0) == doctest::Approx(1.5));
}

TEST_CASE("adjustment_phi worked examples") {
  TableNuisance fit;
  fit.eta1[1.0] = 8.0;
  fit.eta0[1.0] = 4.0;
  fit.p[1.0] = 0.5;
  const double x1[] = {1.0};
  MomentContext ctx{Side::Lower, Regime::WorstCase, {0, 20},
                    AdjustmentMode::InstrumentWeighted};

  Observation w{10.0, 1, x1, std::nullopt};
  // phi1 = (8+4-20)*(1-0.5) = -4, phi2 = 10-8 = 2
  CHECK(wb::adjustment_phi(w, fit, ctx, 1, 0) == doctest::Approx(-2.0));
  CHECK(wb::adjustment_phi(w, fit, ctx, 0, 0) == 0.0);

  TableNuisance degenerate;
  degenerate.eta1[1.0] = 10.0;
  degenerate.eta0[1.0] = 4.0;
  degenerate.p[1.0] = 1.0;
  Observation at_mean{10.0, 1, x1, std::nullopt};
  CHECK(wb::adjustment_phi(at_mean, degenerate, ctx, 1, 0) == 0.0);
}

TEST_CASE("moment context rejects plug-in-only regimes") {
  MomentContext ctx{Side::Lower, Regime::MivWorstCase, {0, 20},
                    AdjustmentMode::InstrumentWeighted};
  CHECK_THROWS_AS(ctx.validate(), wb::ArgumentError);
}

TEST_CASE("adjustment has exact mean zero at the true nuisances") {
  const auto population =
      wb_test::make_threshold_population(wb_test::default_threshold_model());
  const wb::ExactNuisance fit(population);
  const auto pair = swap_policies();

  for (Regime regime : {Regime::WorstCase, Regime::Mtr, Regime::IvWorstCase,
                        Regime::IvMtr}) {
    for (Side side : {Side::Lower, Side::Upper}) {
      for (AdjustmentMode mode :
           {AdjustmentMode::InstrumentWeighted, AdjustmentMode::Unweighted}) {
        MomentContext ctx{side, regime, population.support(), mode};
        double mean_phi = 0.0;
        for (const auto& atom : population.atoms()) {
          const std::span<const double> x(atom.x.data(), atom.x.size());
          const int t10 = pair.delta(x) == 1 && pair.delta_star(x) == 0;
          const int t01 = pair.delta(x) == 0 && pair.delta_star(x) == 1;
          Observation w{atom.y, atom.d, x, atom.z};
          mean_phi += atom.prob * wb::adjustment_phi(w, fit, ctx, t10, t01);
        }
        CHECK(std::fabs(mean_phi) < 1e-12 * 20.0);
      }
    }
  }
}

TEST_CASE("the orthogonalized moment still identifies the bound") {
  const auto population =
      wb_test::make_threshold_population(wb_test::default_threshold_model());
  const wb::ExactNuisance fit(population);
  const auto pair = swap_policies();

  for (Regime regime : {Regime::WorstCase, Regime::Mtr, Regime::IvWorstCase,
                        Regime::IvMtr}) {
    AssumptionSpec spec;
    spec.regime = regime;
    if (regime == Regime::IvWorstCase || regime == Regime::IvMtr) {
      spec.iv_mode = IvMode::BinaryMonotone;
    }
    const wb::GainBounds truth = wb::population_gain_bounds(population, pair, spec);
    for (Side side : {Side::Lower, Side::Upper}) {
      MomentContext ctx{side, regime, population.support(),
                        AdjustmentMode::InstrumentWeighted};
      const double beta0 = side == Side::Lower ? truth.beta_l : truth.beta_u;
      double mean_psi = 0.0;
      for (const auto& atom : population.atoms()) {
        const std::span<const double> x(atom.x.data(), atom.x.size());
        const int t10 = pair.delta(x) == 1 && pair.delta_star(x) == 0;
        const int t01 = pair.delta(x) == 0 && pair.delta_star(x) == 1;
        Observation w{atom.y, atom.d, x, atom.z};
        mean_psi += atom.prob * (wb::moment_m(w, beta0, fit, ctx, t10, t01) +
                                 wb::adjustment_phi(w, fit, ctx, t10, t01));
      }
      CHECK(std::fabs(mean_psi) < 1e-12 * 20.0);
    }
  }
}

TEST_CASE("orthogonality check passes for the adjusted worst-case and MTR "
          "moments in every nuisance direction") {
  const auto population =
      wb_test::make_threshold_population(wb_test::default_threshold_model());
  const auto pair = swap_policies();

  for (Regime regime : {Regime::WorstCase, Regime::Mtr}) {
    for (Side side : {Side::Lower, Side::Upper}) {
      MomentContext ctx{side, regime, population.support(),
                        AdjustmentMode::InstrumentWeighted};
      const struct {
        bool e1, e0, p;
      } combos[] = {{true, false, false},
                    {false, true, false},
                    {false, false, true},
                    {true, true, true}};
      for (const auto& combo : combos) {
        const auto dir =
            direction_for(population, combo.e1, combo.e0, combo.p, false);
        const auto report =
            wb::orthogonality_check(population, pair, ctx, dir, kTaus, true);
        CAPTURE(wb::regime_name(regime));
        CAPTURE(combo.e1);
        CAPTURE(combo.e0);
        CAPTURE(combo.p);
        CHECK(report.pass);
        CHECK(std::fabs(report.slope) <= 1e-8 * report.scale);
        CHECK(report.residual_order >= 1.9);
      }
    }
  }
}

TEST_CASE("the bare moment fails the orthogonality check with the analytic "
          "slope in the propensity direction") {
  const auto population =
      wb_test::make_threshold_population(wb_test::default_threshold_model());
  const wb::ExactNuisance fit(population);
  const auto pair = swap_policies();
  MomentContext ctx{Side::Lower, Regime::WorstCase, population.support(),
                    AdjustmentMode::InstrumentWeighted};

  const auto dir = direction_for(population, false, false, true, false);
  const auto report =
      wb::orthogonality_check(population, pair, ctx, dir, kTaus, false);
  CHECK_FALSE(report.pass);

  // analytic d/dtau: E[(theta10-theta01)(eta1+eta0-ylo-yhi) dir_p(x)]
  double analytic = 0.0;
  for (const auto& [x_key, mass] : population.x_cells()) {
    const std::span<const double> x(x_key.data(), x_key.size());
    const int t10 = pair.delta(x) == 1 && pair.delta_star(x) == 0;
    const int t01 = pair.delta(x) == 0 && pair.delta_star(x) == 1;
    if (t10 == 0 && t01 == 0) continue;
    const double e1 = fit.eta(1, x);
    const double e0 = fit.eta(0, x);
    const double coef = (t10 - t01) * (e1 + e0 - 0.0 - 20.0);
    analytic += mass * coef * dir.d_p.at(x_key);
  }
  REQUIRE(std::fabs(analytic) > 1e-6);
  CHECK(report.slope == doctest::Approx(analytic).epsilon(1e-6));
}

TEST_CASE("zero direction gives exactly zero slope") {
  const auto population =
      wb_test::make_threshold_population(wb_test::default_threshold_model());
  const auto pair = swap_policies();
  MomentContext ctx{Side::Lower, Regime::WorstCase, population.support(),
                    AdjustmentMode::InstrumentWeighted};
  const NuisancePerturbation none;
  const auto report =
      wb::orthogonality_check(population, pair, ctx, none, kTaus, true);
  CHECK(report.slope == 0.0);
  CHECK(report.pass);
}

TEST_CASE("perturbations leaving the admissible range are rejected") {
  const auto population =
      wb_test::make_threshold_population(wb_test::default_threshold_model());
  const auto pair = swap_policies();
  MomentContext ctx{Side::Lower, Regime::WorstCase, population.support(),
                    AdjustmentMode::InstrumentWeighted};
  NuisancePerturbation wild;
  for (const auto& [x_key, mass] : population.x_cells()) wild.d_p[x_key] = 5.0;
  CHECK_THROWS_AS(
      wb::orthogonality_check(population, pair, ctx, wild, kTaus, true),
      wb::ArgumentError);
}

TEST_CASE("IV adjustment: instrument weighting decides orthogonality") {
  const auto population =
      wb_test::make_threshold_population(wb_test::default_threshold_model());
  const auto pair = swap_policies();

  for (Regime regime : {Regime::IvWorstCase, Regime::IvMtr}) {
    for (Side side : {Side::Lower, Side::Upper}) {
      const auto dir = direction_for(population, true, true, true, true);

      MomentContext weighted{side, regime, population.support(),
                             AdjustmentMode::InstrumentWeighted};
      const auto good =
          wb::orthogonality_check(population, pair, weighted, dir, kTaus, true);
      CAPTURE(wb::regime_name(regime));
      CHECK(good.pass);

      MomentContext plain{side, regime, population.support(),
                          AdjustmentMode::Unweighted};
      const auto bad =
          wb::orthogonality_check(population, pair, plain, dir, kTaus, true);
      CHECK_FALSE(bad.pass);
      CHECK(std::fabs(bad.slope) > 1e-6);
    }
  }
}

TEST_CASE("identical policies estimate to zero with zero-width intervals") {
  const wb::DgpSpec spec;
  const wb::Dataset data = wb::dgp_sample(spec, 500, 3);
  wb::PolicyPair pair{wb::PolicyRule::parse("x <= 12"),
                      wb::PolicyRule::parse("x <= 12")};
  wb::EstimatorConfig config;
  config.spec.regime = Regime::WorstCase;
  config.seed = 4;
  const wb::BoundsEstimate est = wb::lr_estimate(data, pair, config);
  CHECK(est.beta_l == 0.0);
  CHECK(est.beta_u == 0.0);
  CHECK(est.omega_l == 0.0);
  CHECK(est.omega_u == 0.0);
  CHECK(est.ci_l.first == 0.0);
  CHECK(est.ci_l.second == 0.0);
}

TEST_CASE("lr_estimate solves the empirical moment equation to machine "
          "precision and builds symmetric intervals") {
  const wb::DgpSpec dgp;
  const wb::Dataset data = wb::dgp_sample(dgp, 2000, 8);
  wb::PolicyPair pair{wb::PolicyRule::parse("x <= 11"),
                      wb::PolicyRule::parse("x <= 12")};
  wb::EstimatorConfig config;
  config.spec.regime = Regime::WorstCase;
  config.k = 2;
  config.seed = 8;
  const wb::BoundsEstimate est = wb::lr_estimate(data, pair, config);
  REQUIRE(est.has_ci);

  // Recompute the moment residual at beta-hat under the same folds/fits.
  const auto folds = wb::make_folds(data.n(), config.k, config.seed);
  wb::FirstStageConfig fs;
  const auto fits = wb::fit_cross_fitted(data, folds, fs);
  const auto ind = wb::policy_indicators(pair, data);
  MomentContext lower{Side::Lower, Regime::WorstCase, data.support(),
                      AdjustmentMode::InstrumentWeighted};
  double residual = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    Observation w{data.y(i), data.d(i), data.x_row(i), data.z(i)};
    residual += wb::moment_m(w, est.beta_l, *fits[folds.fold_of[i]], lower,
                             ind.theta10[i], ind.theta01[i]) +
                wb::adjustment_phi(w, *fits[folds.fold_of[i]], lower,
                                   ind.theta10[i], ind.theta01[i]);
  }
  residual /= static_cast<double>(data.n());
  CHECK(std::fabs(residual) < 1e-12 * std::fabs(est.beta_l));

  // CI symmetry around the point estimate
  const double mid_l = 0.5 * (est.ci_l.first + est.ci_l.second);
  CHECK(mid_l == doctest::Approx(est.beta_l).epsilon(1e-12));
  const double width = est.ci_l.second - est.ci_l.first;
  const double expected =
      2.0 * wb::normal_quantile(0.95) * std::sqrt(est.omega_l / data.n());
  CHECK(width == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("with exact nuisances the estimator reproduces the population "
          "bounds on an enumerated dataset") {
  const auto population =
      wb_test::make_threshold_population(wb_test::default_threshold_model());
  const wb::Dataset data = population.to_dataset(128, {"x"});
  const auto fit = std::make_shared<wb::ExactNuisance>(population);
  const auto folds = wb::trivial_fold(data.n());
  std::vector<std::shared_ptr<const wb::NuisanceFit>> fits{fit};

  wb::PolicyPair pair{wb::PolicyRule::parse("x >= 1"),
                      wb::PolicyRule::parse("x <= 1")};
  const auto ind = wb::policy_indicators(pair, data);

  for (Regime regime : {Regime::WorstCase, Regime::Mtr, Regime::IvWorstCase,
                        Regime::IvMtr}) {
    AssumptionSpec spec;
    spec.regime = regime;
    if (regime == Regime::IvWorstCase || regime == Regime::IvMtr) {
      spec.iv_mode = IvMode::BinaryMonotone;
    }
    const wb::GainBounds truth =
        wb::population_gain_bounds(population, swap_policies(), spec);
    const auto moments = wb::crossfit_moments(data, ind, fits, folds, regime,
                                              AdjustmentMode::InstrumentWeighted,
                                              true);
    CHECK(moments.lower.beta == doctest::Approx(truth.beta_l).epsilon(1e-10));
    CHECK(moments.upper.beta == doctest::Approx(truth.beta_u).epsilon(1e-10));
  }
}

TEST_CASE("worst-case lower estimate lands near the process value") {
  // Stochastic check with a fixed seed: the estimate must sit within three
  // standard errors of the published population figure.
  const wb::DgpSpec dgp;
  const wb::Dataset data = wb::dgp_sample(dgp, 10000, 601);
  wb::PolicyPair pair{wb::PolicyRule::parse("x <= 11"),
                      wb::PolicyRule::parse("x <= 12")};
  wb::EstimatorConfig config;
  config.spec.regime = Regime::WorstCase;
  config.k = 2;
  config.seed = 601;
  const wb::BoundsEstimate est = wb::lr_estimate(data, pair, config);
  const double se = std::sqrt(est.omega_l / static_cast<double>(est.n));
  CHECK(std::fabs(est.beta_l - (-31191.0)) < 3.0 * se);
}

TEST_CASE("plug-in-only regimes come back without intervals") {
  const wb::DgpSpec dgp;
  const wb::Dataset data = wb::dgp_sample(dgp, 1000, 21);
  wb::PolicyPair pair{wb::PolicyRule::parse("x <= 11"),
                      wb::PolicyRule::parse("x <= 12")};
  wb::EstimatorConfig config;
  config.spec.regime = Regime::MivWorstCase;
  config.spec.iv_mode = IvMode::GeneralDiscrete;
  config.spec.miv_levels = {{0.0, 1.0 / 3.0}, {1.0, 2.0 / 3.0}};
  // The (d=1, z=0) cells are nearly empty under this process; keep the
  // convention that displays such cells as zero.
  config.first_stage.empty_cell = wb::EmptyCellPolicy::Zero;
  config.seed = 21;
  const wb::BoundsEstimate est = wb::lr_estimate(data, pair, config);
  CHECK_FALSE(est.has_ci);
  REQUIRE(!est.diagnostics.empty());
  CHECK(est.diagnostics.front().find("point estimates only") != std::string::npos);
}

TEST_CASE("general-discrete IV estimation is plug-in only") {
  const wb::DgpSpec dgp;
  const wb::Dataset data = wb::dgp_sample(dgp, 1000, 22);
  wb::PolicyPair pair{wb::PolicyRule::parse("x <= 11"),
                      wb::PolicyRule::parse("x <= 12")};
  wb::EstimatorConfig config;
  config.spec.regime = Regime::IvWorstCase;
  config.spec.iv_mode = IvMode::GeneralDiscrete;
  config.seed = 22;
  const wb::BoundsEstimate est = wb::lr_estimate(data, pair, config);
  CHECK_FALSE(est.has_ci);
}
