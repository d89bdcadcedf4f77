#include "wb/nuisance.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "wb/errors.hpp"

namespace wb {

double NuisanceFit::eta_z(int, std::span<const double>, double) const {
  throw ArgumentError("first stage was fit without an instrument: eta(d,x,z) "
                      "is unavailable");
}
double NuisanceFit::propensity_z(std::span<const double>, double) const {
  throw ArgumentError("first stage was fit without an instrument: p(x,z) is "
                      "unavailable");
}
double NuisanceFit::instrument_share(double, std::span<const double>) const {
  throw ArgumentError("first stage was fit without an instrument: P(Z=z|x) is "
                      "unavailable");
}
double NuisanceFit::outcome_mean_z(std::span<const double>, double) const {
  throw ArgumentError("first stage was fit without an instrument: E[Y|x,z] is "
                      "unavailable");
}
std::vector<double> NuisanceFit::z_levels() const {
  throw ArgumentError("first stage was fit without an instrument");
}

namespace {

using CellKey = std::vector<double>;

struct ArmStats {
  std::size_t n = 0;
  double sum_y = 0.0;
};

struct CellStats {
  std::size_t n = 0;
  ArmStats arm[2];
  std::map<double, CellStats> by_z;  // only on the x-level cells
};

std::string cell_text(const std::vector<std::string>& names,
                      std::span<const std::size_t> keys, const CellKey& key) {
  std::ostringstream out;
  out << "(";
  for (std::size_t j = 0; j < keys.size(); ++j) {
    if (j > 0) out << ", ";
    out << names[keys[j]] << "=" << key[j];
  }
  out << ")";
  return out.str();
}

class CellMeanFit final : public NuisanceFit {
 public:
  CellMeanFit(const Dataset& train, std::span<const std::size_t> keys,
              bool with_instrument, EmptyCellPolicy empty_cell)
      : keys_(keys.begin(), keys.end()),
        names_(train.x_names()),
        with_instrument_(with_instrument),
        empty_cell_(empty_cell) {
    if (train.n() == 0) throw ArgumentError("cell means: empty training set");
    if (with_instrument_ && !train.has_z()) {
      throw SchemaError("cell means: instrument requested but the dataset has "
                        "no z column");
    }
    CellKey key(keys_.size());
    for (std::size_t i = 0; i < train.n(); ++i) {
      const auto x = train.x_row(i);
      for (std::size_t j = 0; j < keys_.size(); ++j) key[j] = x[keys_[j]];
      CellStats& cell = cells_[key];
      add(cell, train.y(i), train.d(i));
      if (with_instrument_) {
        const double z = train.z(i);
        add(cell.by_z[z], train.y(i), train.d(i));
        levels_.insert(z);
      }
    }
  }

  double eta(int d, std::span<const double> x) const override {
    const CellStats* cell = find(x);
    if (cell == nullptr || cell->arm[d].n == 0) {
      return fallback("E[Y|D=" + std::to_string(d) + ", X] in cell " + describe_key(x));
    }
    return cell->arm[d].sum_y / static_cast<double>(cell->arm[d].n);
  }

  double propensity(std::span<const double> x) const override {
    const CellStats* cell = find(x);
    if (cell == nullptr) return fallback("P(D=1|X) in cell " + describe_key(x));
    return static_cast<double>(cell->arm[1].n) / static_cast<double>(cell->n);
  }

  bool has_instrument() const override { return with_instrument_; }

  double eta_z(int d, std::span<const double> x, double z) const override {
    const CellStats* sub = find_z(x, z);
    if (sub == nullptr || sub->arm[d].n == 0) {
      return fallback("E[Y|D=" + std::to_string(d) + ", X, Z=" + std::to_string(z) +
                      "] in cell " + describe_key(x));
    }
    return sub->arm[d].sum_y / static_cast<double>(sub->arm[d].n);
  }

  double propensity_z(std::span<const double> x, double z) const override {
    const CellStats* sub = find_z(x, z);
    if (sub == nullptr) {
      return fallback("P(D=1|X, Z=" + std::to_string(z) + ") in cell " +
                      describe_key(x));
    }
    return static_cast<double>(sub->arm[1].n) / static_cast<double>(sub->n);
  }

  double instrument_share(double z, std::span<const double> x) const override {
    const CellStats* cell = find(x);
    if (cell == nullptr) {
      return fallback("P(Z=" + std::to_string(z) + "|X) in cell " + describe_key(x));
    }
    const auto it = cell->by_z.find(z);
    const std::size_t nz = it == cell->by_z.end() ? 0 : it->second.n;
    return static_cast<double>(nz) / static_cast<double>(cell->n);
  }

  double outcome_mean_z(std::span<const double> x, double z) const override {
    const CellStats* sub = find_z(x, z);
    if (sub == nullptr) {
      return fallback("E[Y|X, Z=" + std::to_string(z) + "] in cell " +
                      describe_key(x));
    }
    return (sub->arm[0].sum_y + sub->arm[1].sum_y) / static_cast<double>(sub->n);
  }

  std::vector<double> z_levels() const override {
    if (!with_instrument_) return NuisanceFit::z_levels();
    return {levels_.begin(), levels_.end()};
  }

  std::string describe() const override { return "cell-means"; }

 private:
  static void add(CellStats& cell, double y, int d) {
    ++cell.n;
    ++cell.arm[d].n;
    cell.arm[d].sum_y += y;
  }

  const CellStats* find(std::span<const double> x) const {
    CellKey key(keys_.size());
    for (std::size_t j = 0; j < keys_.size(); ++j) key[j] = x[keys_[j]];
    const auto it = cells_.find(key);
    return it == cells_.end() ? nullptr : &it->second;
  }

  const CellStats* find_z(std::span<const double> x, double z) const {
    if (!with_instrument_) {
      throw ArgumentError("cell means: fit carries no z-conditional cells");
    }
    const CellStats* cell = find(x);
    if (cell == nullptr) return nullptr;
    const auto it = cell->by_z.find(z);
    return it == cell->by_z.end() ? nullptr : &it->second;
  }

  std::string describe_key(std::span<const double> x) const {
    CellKey key(keys_.size());
    for (std::size_t j = 0; j < keys_.size(); ++j) key[j] = x[keys_[j]];
    return cell_text(names_, keys_, key);
  }

  double fallback(const std::string& what) const {
    if (empty_cell_ == EmptyCellPolicy::Zero) return 0.0;
    throw DomainError("cell means: no training observations for " + what +
                      " (empty-cell policy is 'error')");
  }

  std::vector<std::size_t> keys_;
  std::vector<std::string> names_;
  bool with_instrument_;
  EmptyCellPolicy empty_cell_;
  std::map<CellKey, CellStats> cells_;
  std::set<double> levels_;
};

// Exponent vectors of all monomials in `k` variables with total degree <= d,
// in graded lexicographic order (intercept first).
std::vector<std::vector<int>> enumerate_monomials(std::size_t k, int degree) {
  std::vector<std::vector<int>> out;
  for (int total = 0; total <= degree; ++total) {
    // enumerate compositions of `total` into k parts
    std::vector<int> expo(k, 0);
    if (k == 0) {
      if (total == 0) out.push_back(expo);
      continue;
    }
    expo[0] = total;
    for (;;) {
      out.push_back(expo);
      // next composition
      std::size_t j = 0;
      while (j + 1 < k && expo[j] == 0) ++j;
      if (j + 1 >= k) break;
      const int v = expo[j];
      expo[j] = 0;
      expo[0] = v - 1;
      ++expo[j + 1];
    }
  }
  return out;
}

std::string monomial_text(const std::vector<int>& expo,
                          const std::vector<std::string>& names,
                          std::span<const std::size_t> covariates) {
  if (std::all_of(expo.begin(), expo.end(), [](int e) { return e == 0; })) {
    return "1";
  }
  std::ostringstream out;
  bool first = true;
  for (std::size_t j = 0; j < expo.size(); ++j) {
    if (expo[j] == 0) continue;
    if (!first) out << "*";
    out << names[covariates[j]];
    if (expo[j] > 1) out << "^" << expo[j];
    first = false;
  }
  return out.str();
}

struct StandardizedDesign {
  std::vector<double> center, scale;
  Eigen::MatrixXd matrix;
};

void standardization_moments(const std::vector<std::span<const double>>& rows,
                             std::span<const std::size_t> covariates,
                             std::vector<double>& center, std::vector<double>& scale) {
  const std::size_t k = covariates.size();
  center.assign(k, 0.0);
  scale.assign(k, 1.0);
  const double n = static_cast<double>(rows.size());
  for (std::size_t j = 0; j < k; ++j) {
    double mean = 0.0;
    for (const auto& row : rows) mean += row[covariates[j]];
    mean /= n;
    double var = 0.0;
    for (const auto& row : rows) {
      const double c = row[covariates[j]] - mean;
      var += c * c;
    }
    var /= n;
    center[j] = mean;
    scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
}

double monomial_value(const std::vector<int>& expo, std::span<const double> x,
                      std::span<const std::size_t> covariates,
                      const std::vector<double>& center,
                      const std::vector<double>& scale) {
  double v = 1.0;
  for (std::size_t j = 0; j < expo.size(); ++j) {
    if (expo[j] == 0) continue;
    const double s = (x[covariates[j]] - center[j]) / scale[j];
    for (int e = 0; e < expo[j]; ++e) v *= s;
  }
  return v;
}

Eigen::MatrixXd build_design(const std::vector<std::span<const double>>& rows,
                             std::span<const std::size_t> covariates,
                             const std::vector<std::vector<int>>& monomials,
                             const std::vector<double>& center,
                             const std::vector<double>& scale) {
  Eigen::MatrixXd design(rows.size(), monomials.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t m = 0; m < monomials.size(); ++m) {
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) =
          monomial_value(monomials[m], rows[i], covariates, center, scale);
    }
  }
  return design;
}

void check_rank(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                const std::vector<std::vector<int>>& monomials,
                const std::vector<std::string>& names,
                std::span<const std::size_t> covariates) {
  const auto cols = static_cast<Eigen::Index>(monomials.size());
  if (qr.rank() == cols) return;
  // Columns permuted past the rank are the (numerically) collinear ones.
  const auto& perm = qr.colsPermutation().indices();
  std::ostringstream out;
  out << "polynomial regression: design is rank deficient (rank " << qr.rank()
      << " of " << cols << "); collinear monomials:";
  for (Eigen::Index j = qr.rank(); j < cols; ++j) {
    out << " " << monomial_text(monomials[static_cast<std::size_t>(perm[j])], names,
                                covariates);
  }
  throw NumericError(out.str());
}

}  // namespace

namespace {

std::vector<std::string> default_names(std::span<const std::size_t> covariates,
                                       std::vector<std::string> names) {
  std::size_t max_index = 0;
  for (std::size_t c : covariates) max_index = std::max(max_index, c + 1);
  names.resize(std::max(names.size(), max_index));
  for (std::size_t c : covariates) {
    if (names[c].empty()) names[c] = "x" + std::to_string(c);
  }
  return names;
}

}  // namespace

PolynomialRegression::PolynomialRegression(
    const std::vector<double>& y, const std::vector<std::span<const double>>& rows,
    std::span<const std::size_t> covariates, int degree,
    std::vector<std::string> column_names)
    : covariates_(covariates.begin(), covariates.end()), degree_(degree) {
  if (rows.empty()) throw ArgumentError("polynomial regression: empty training arm");
  if (degree < 0) throw ArgumentError("polynomial regression: negative degree");
  monomials_ = enumerate_monomials(covariates_.size(), degree_);
  standardization_moments(rows, covariates_, center_, scale_);
  const Eigen::MatrixXd design =
      build_design(rows, covariates_, monomials_, center_, scale_);
  Eigen::VectorXd rhs(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = y[i];

  const auto names = default_names(covariates, std::move(column_names));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  check_rank(qr, monomials_, names, covariates_);
  const Eigen::VectorXd beta = qr.solve(rhs);
  coef_.assign(beta.data(), beta.data() + beta.size());
}

std::vector<double> PolynomialRegression::features(std::span<const double> x) const {
  std::vector<double> out(monomials_.size());
  for (std::size_t m = 0; m < monomials_.size(); ++m) {
    out[m] = monomial_value(monomials_[m], x, covariates_, center_, scale_);
  }
  return out;
}

double PolynomialRegression::predict(std::span<const double> x) const {
  const auto f = features(x);
  return std::inner_product(f.begin(), f.end(), coef_.begin(), 0.0);
}

LogisticRegression::LogisticRegression(
    const std::vector<std::uint8_t>& labels,
    const std::vector<std::span<const double>>& rows,
    std::span<const std::size_t> covariates, int degree)
    : covariates_(covariates.begin(), covariates.end()), degree_(degree) {
  if (rows.empty()) throw ArgumentError("logistic regression: empty training set");
  const std::size_t ones =
      static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (ones == 0 || ones == labels.size()) {
    throw NumericError("logistic regression: single-class training sample");
  }
  monomials_ = enumerate_monomials(covariates_.size(), degree_);
  standardization_moments(rows, covariates_, center_, scale_);
  const Eigen::MatrixXd design =
      build_design(rows, covariates_, monomials_, center_, scale_);
  const auto n = design.rows();
  const auto k = design.cols();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double loglik_prev = -std::numeric_limits<double>::infinity();
  constexpr double kCoefTol = 1e-8;
  constexpr double kLoglikTol = 1e-10;
  constexpr double kDivergence = 1e4;
  constexpr int kMaxIter = 100;

  bool converged = false;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    const Eigen::VectorXd lin = design * beta;
    Eigen::VectorXd mu(n), w(n), working(n);
    double loglik = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = 1.0 / (1.0 + std::exp(-lin(i)));
      const double mc = std::clamp(m, 1e-10, 1.0 - 1e-10);
      const double yi = labels[static_cast<std::size_t>(i)];
      mu(i) = mc;
      w(i) = mc * (1.0 - mc);
      working(i) = lin(i) + (yi - mc) / w(i);
      loglik += yi * std::log(mc) + (1.0 - yi) * std::log(1.0 - mc);
    }
    // A log-likelihood at (numerically) zero means every observation is fit
    // perfectly, which only separation can achieve.
    if (loglik > -1e-8) {
      throw NumericError(
          "logistic regression: perfect fit of the training labels (complete "
          "separation); use cell means for this conditioning set");
    }
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::MatrixXd wx = sw.asDiagonal() * design;
    const Eigen::VectorXd wz = sw.asDiagonal() * working;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wx);
    if (qr.rank() < k) {
      throw NumericError(
          "logistic regression: weighted design is rank deficient; reduce the "
          "polynomial degree or use cell means");
    }
    const Eigen::VectorXd beta_next = qr.solve(wz);
    const double step = (beta_next - beta).cwiseAbs().maxCoeff();
    beta = beta_next;
    if (beta.cwiseAbs().maxCoeff() > kDivergence) {
      throw NumericError(
          "logistic regression: coefficients diverging (complete or "
          "quasi-complete separation); use cell means for this conditioning set");
    }
    // The likelihood plateau only counts as convergence once the
    // coefficients have settled too; under quasi-separation the likelihood
    // flattens while the coefficients still drift.
    if (step < kCoefTol ||
        (std::fabs(loglik - loglik_prev) < kLoglikTol && step < 1e-4)) {
      converged = true;
      break;
    }
    loglik_prev = loglik;
  }
  if (!converged) {
    throw NumericError(
        "logistic regression: IRLS did not converge in 100 iterations "
        "(possible separation); use cell means for this conditioning set");
  }
  coef_.assign(beta.data(), beta.data() + beta.size());
}

std::vector<double> LogisticRegression::features(std::span<const double> x) const {
  std::vector<double> out(monomials_.size());
  for (std::size_t m = 0; m < monomials_.size(); ++m) {
    out[m] = monomial_value(monomials_[m], x, covariates_, center_, scale_);
  }
  return out;
}

double LogisticRegression::predict(std::span<const double> x) const {
  const auto f = features(x);
  const double lin = std::inner_product(f.begin(), f.end(), coef_.begin(), 0.0);
  return 1.0 / (1.0 + std::exp(-lin));
}

namespace {

class PolynomialNuisanceFit final : public NuisanceFit {
 public:
  PolynomialNuisanceFit(const Dataset& train, std::span<const std::size_t> covariates,
                        int degree, bool with_instrument)
      : with_instrument_(with_instrument) {
    if (with_instrument_ && !train.has_z()) {
      throw SchemaError("polynomial first stage: instrument requested but the "
                        "dataset has no z column");
    }
    std::vector<std::span<const double>> rows[2];
    std::vector<double> y[2];
    std::vector<std::span<const double>> all_rows;
    std::vector<std::uint8_t> all_d;
    for (std::size_t i = 0; i < train.n(); ++i) {
      const int d = train.d(i);
      rows[d].push_back(train.x_row(i));
      y[d].push_back(train.y(i));
      all_rows.push_back(train.x_row(i));
      all_d.push_back(static_cast<std::uint8_t>(d));
    }
    for (int d : {0, 1}) {
      if (rows[d].empty()) {
        throw NumericError("polynomial first stage: no training rows with D=" +
                           std::to_string(d));
      }
      arm_[d] = std::make_unique<PolynomialRegression>(y[d], rows[d], covariates,
                                                       degree, train.x_names());
    }
    propensity_ = std::make_unique<LogisticRegression>(all_d, all_rows, covariates,
                                                       degree);

    if (with_instrument_) {
      std::set<double> levels;
      for (std::size_t i = 0; i < train.n(); ++i) levels.insert(train.z(i));
      levels_.assign(levels.begin(), levels.end());
      for (double z : levels_) {
        std::vector<std::span<const double>> zrows[2], zall;
        std::vector<double> zy[2], zy_all;
        std::vector<std::uint8_t> zd;
        for (std::size_t i = 0; i < train.n(); ++i) {
          if (train.z(i) != z) continue;
          const int d = train.d(i);
          zrows[d].push_back(train.x_row(i));
          zy[d].push_back(train.y(i));
          zall.push_back(train.x_row(i));
          zy_all.push_back(train.y(i));
          zd.push_back(static_cast<std::uint8_t>(d));
        }
        ZSlice slice;
        for (int d : {0, 1}) {
          if (zrows[d].empty()) {
            throw NumericError("polynomial first stage: no training rows with D=" +
                               std::to_string(d) + ", Z=" + std::to_string(z));
          }
          slice.arm[d] = std::make_shared<PolynomialRegression>(
              zy[d], zrows[d], covariates, degree, train.x_names());
        }
        slice.propensity = std::make_shared<LogisticRegression>(zd, zall, covariates,
                                                                degree);
        slice.outcome = std::make_shared<PolynomialRegression>(
            zy_all, zall, covariates, degree, train.x_names());
        slices_[z] = std::move(slice);
      }
      if (levels_.size() == 2) {
        std::vector<std::uint8_t> is_hi;
        is_hi.reserve(train.n());
        for (std::size_t i = 0; i < train.n(); ++i) {
          is_hi.push_back(static_cast<std::uint8_t>(train.z(i) == levels_[1]));
        }
        share_hi_ = std::make_unique<LogisticRegression>(is_hi, all_rows, covariates,
                                                         degree);
      }
    }
  }

  double eta(int d, std::span<const double> x) const override {
    return arm_[d]->predict(x);
  }
  double propensity(std::span<const double> x) const override {
    return propensity_->predict(x);
  }
  bool has_instrument() const override { return with_instrument_; }

  double eta_z(int d, std::span<const double> x, double z) const override {
    return slice(z).arm[d]->predict(x);
  }
  double propensity_z(std::span<const double> x, double z) const override {
    return slice(z).propensity->predict(x);
  }
  double instrument_share(double z, std::span<const double> x) const override {
    if (share_hi_ == nullptr) {
      throw NumericError("polynomial first stage: instrument-share model is only "
                         "available for a binary instrument");
    }
    const double hi = share_hi_->predict(x);
    if (z == levels_[1]) return hi;
    if (z == levels_[0]) return 1.0 - hi;
    throw DomainError("polynomial first stage: unseen instrument level " +
                      std::to_string(z));
  }
  double outcome_mean_z(std::span<const double> x, double z) const override {
    return slice(z).outcome->predict(x);
  }
  std::vector<double> z_levels() const override {
    if (!with_instrument_) return NuisanceFit::z_levels();
    return levels_;
  }
  std::string describe() const override { return "polynomial"; }

 private:
  struct ZSlice {
    std::shared_ptr<PolynomialRegression> arm[2];
    std::shared_ptr<LogisticRegression> propensity;
    std::shared_ptr<PolynomialRegression> outcome;
  };

  const ZSlice& slice(double z) const {
    const auto it = slices_.find(z);
    if (it == slices_.end()) {
      throw DomainError("polynomial first stage: unseen instrument level " +
                        std::to_string(z));
    }
    return it->second;
  }

  bool with_instrument_;
  std::unique_ptr<PolynomialRegression> arm_[2];
  std::unique_ptr<LogisticRegression> propensity_;
  std::vector<double> levels_;
  std::map<double, ZSlice> slices_;
  std::unique_ptr<LogisticRegression> share_hi_;
};

}  // namespace

std::unique_ptr<NuisanceFit> fit_cell_means(const Dataset& train,
                                            std::span<const std::size_t> keys,
                                            bool with_instrument,
                                            EmptyCellPolicy empty_cell) {
  return std::make_unique<CellMeanFit>(train, keys, with_instrument, empty_cell);
}

std::unique_ptr<NuisanceFit> fit_polynomial(const Dataset& train,
                                            std::span<const std::size_t> covariates,
                                            int degree, bool with_instrument) {
  return std::make_unique<PolynomialNuisanceFit>(train, covariates, degree,
                                                 with_instrument);
}

std::unique_ptr<NuisanceFit> fit_first_stage(const Dataset& data,
                                             std::span<const std::size_t> train_rows,
                                             const FirstStageConfig& config) {
  const Dataset train = data.subset(train_rows);
  std::vector<std::size_t> all(data.n_covariates());
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (config.method == FirstStageMethod::CellMeans) {
    return fit_cell_means(train, all, config.with_instrument, config.empty_cell);
  }
  return fit_polynomial(train, all, config.degree, config.with_instrument);
}

std::vector<std::shared_ptr<const NuisanceFit>> fit_cross_fitted(
    const Dataset& data, const FoldAssignment& folds, const FirstStageConfig& config) {
  std::vector<std::shared_ptr<const NuisanceFit>> fits;
  fits.reserve(folds.k);
  const auto complements = folds.complements();
  for (std::size_t k = 0; k < folds.k; ++k) {
    try {
      fits.emplace_back(fit_first_stage(data, complements[k], config));
    } catch (const std::exception& e) {
      throw NumericError("first stage failed for fold " + std::to_string(k + 1) +
                         ": " + e.what());
    }
  }
  return fits;
}

}  // namespace wb
