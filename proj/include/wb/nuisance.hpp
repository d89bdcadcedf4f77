#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wb/dataset.hpp"
#include "wb/folds.hpp"

namespace wb {

// First-stage estimates consumed by the bound formulas. Implementations are
// immutable after fitting and safe to share across threads. The z-conditional
// evaluators exist only when the fit was trained with an instrument.
class NuisanceFit {
 public:
  virtual ~NuisanceFit() = default;

  // eta(d,x) = E[Y | D=d, X=x]
  virtual double eta(int d, std::span<const double> x) const = 0;
  // p(x) = P(D=1 | X=x)
  virtual double propensity(std::span<const double> x) const = 0;

  virtual bool has_instrument() const { return false; }
  virtual double eta_z(int d, std::span<const double> x, double z) const;
  virtual double propensity_z(std::span<const double> x, double z) const;
  // r_z(z|x) = P(Z=z | X=x)
  virtual double instrument_share(double z, std::span<const double> x) const;
  // E[Y | X=x, Z=z]
  virtual double outcome_mean_z(std::span<const double> x, double z) const;
  // Distinct instrument values seen in training, ascending.
  virtual std::vector<double> z_levels() const;

  virtual std::string describe() const = 0;
};

enum class EmptyCellPolicy { Error, Zero };

enum class FirstStageMethod { CellMeans, Polynomial };

struct FirstStageConfig {
  FirstStageMethod method = FirstStageMethod::CellMeans;
  int degree = 2;  // polynomial method only
  EmptyCellPolicy empty_cell = EmptyCellPolicy::Error;
  bool with_instrument = false;  // also fit z-conditional evaluators
};

// Empirical means within cells of the (discrete) conditioning columns.
// `keys` selects the covariate columns forming the cell; pass all covariate
// indices for a saturated fit.
std::unique_ptr<NuisanceFit> fit_cell_means(const Dataset& train,
                                            std::span<const std::size_t> keys,
                                            bool with_instrument,
                                            EmptyCellPolicy empty_cell);

// Least-squares polynomial regression of y on all monomials of the selected
// covariates up to the given total degree, one fit per treatment arm,
// computed by Householder QR on the standardized design.
class PolynomialRegression {
 public:
  PolynomialRegression(const std::vector<double>& y,
                       const std::vector<std::span<const double>>& rows,
                       std::span<const std::size_t> covariates, int degree,
                       std::vector<std::string> column_names = {});

  double predict(std::span<const double> x) const;

 private:
  std::vector<std::size_t> covariates_;
  int degree_;
  std::vector<std::vector<int>> monomials_;  // exponent vectors
  std::vector<double> center_, scale_;
  std::vector<double> coef_;

  friend class PolynomialNuisanceFit;
  std::vector<double> features(std::span<const double> x) const;
};

// Logistic regression fit by iteratively reweighted least squares on the
// same monomial design. Throws NumericError on separation/non-convergence.
class LogisticRegression {
 public:
  LogisticRegression(const std::vector<std::uint8_t>& labels,
                     const std::vector<std::span<const double>>& rows,
                     std::span<const std::size_t> covariates, int degree);

  double predict(std::span<const double> x) const;
  const std::vector<double>& coefficients() const { return coef_; }

 private:
  std::vector<std::size_t> covariates_;
  int degree_;
  std::vector<std::vector<int>> monomials_;
  std::vector<double> center_, scale_;
  std::vector<double> coef_;
  std::vector<double> features(std::span<const double> x) const;
};

// Polynomial outcome regressions per arm plus a logistic propensity.
std::unique_ptr<NuisanceFit> fit_polynomial(const Dataset& train,
                                            std::span<const std::size_t> covariates,
                                            int degree, bool with_instrument);

// Fits the configured first stage on the given training rows.
std::unique_ptr<NuisanceFit> fit_first_stage(const Dataset& data,
                                             std::span<const std::size_t> train_rows,
                                             const FirstStageConfig& config);

// One fit per fold, each trained on the fold's complement.
std::vector<std::shared_ptr<const NuisanceFit>> fit_cross_fitted(
    const Dataset& data, const FoldAssignment& folds, const FirstStageConfig& config);

}  // namespace wb
