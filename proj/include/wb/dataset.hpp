#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wb {

// Column-role mapping for CSV ingestion. Covariate order in `x` fixes the
// layout of every covariate vector handed to policies and nuisance fits.
struct Schema {
  std::string y;
  std::string d;
  std::vector<std::string> x;
  std::optional<std::string> z;
};

struct OutcomeSupport {
  double lo = 0.0;
  double hi = 0.0;
};

// Immutable sample of observations (y, d, x-vector, optional z) with a
// declared outcome support. Construction validates every invariant; after
// that the object is safe to share across threads.
class Dataset {
 public:
  Dataset(std::vector<double> y, std::vector<std::uint8_t> d,
          std::vector<double> x_rows, std::vector<std::string> x_names,
          std::optional<std::vector<double>> z, OutcomeSupport support);

  std::size_t n() const { return y_.size(); }
  std::size_t n_covariates() const { return x_names_.size(); }

  double y(std::size_t i) const { return y_[i]; }
  int d(std::size_t i) const { return d_[i]; }
  bool has_z() const { return z_.has_value(); }
  double z(std::size_t i) const { return (*z_)[i]; }

  // Covariate vector of row i, in schema order.
  std::span<const double> x_row(std::size_t i) const {
    const std::size_t k = x_names_.size();
    return {x_rows_.data() + i * k, k};
  }

  const std::vector<std::string>& x_names() const { return x_names_; }
  OutcomeSupport support() const { return support_; }

  // Index of a covariate column; throws SchemaError when absent.
  std::size_t x_index(const std::string& name) const;

  // Restriction to a subset of rows (same schema and support).
  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  std::vector<double> y_;
  std::vector<std::uint8_t> d_;
  std::vector<double> x_rows_;  // row-major, n * k
  std::vector<std::string> x_names_;
  std::optional<std::vector<double>> z_;
  OutcomeSupport support_;
};

// Reads a header-first CSV and assembles a Dataset. Unmapped columns are
// ignored; missing cells are rejected, never imputed.
Dataset load_dataset(const std::string& path, const Schema& schema,
                     OutcomeSupport support);

// Same, but from an in-memory buffer (used by tests).
Dataset load_dataset_from_string(const std::string& csv_text, const Schema& schema,
                                 OutcomeSupport support);

}  // namespace wb
