#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wb/dataset.hpp"

namespace wb {

// Deterministic treatment rule over covariates: either a conjunction of
// threshold comparisons ("education <= 12 & prevearn <= 19670") or a direct
// binding to a binary covariate column ("assigned:binary").
class PolicyRule {
 public:
  enum class Op { Le, Lt, Ge, Gt, Eq };

  struct Atom {
    std::string column;
    Op op;
    double threshold;
  };

  static PolicyRule parse(const std::string& text);

  // Canonical text form; parse(pretty_print()) reproduces the rule.
  std::string pretty_print() const;

  // Resolve column names against a dataset schema. Throws SchemaError for
  // unknown columns and DomainError when a :binary column is not 0/1-valued.
  void bind(const Dataset& data);

  // Evaluate on a covariate vector in schema order. Requires bind().
  int evaluate(std::span<const double> x) const;

  bool is_binary_binding() const { return binary_binding_; }
  const std::vector<Atom>& atoms() const { return atoms_; }

 private:
  std::vector<Atom> atoms_;
  bool binary_binding_ = false;
  std::string binary_column_;
  std::vector<std::size_t> atom_index_;  // column index per atom after bind
  std::size_t binary_index_ = 0;
  bool bound_ = false;
};

struct PolicyPair {
  PolicyRule delta_star;  // benchmark
  PolicyRule delta;       // candidate
};

// theta10 marks rows newly treated under delta, theta01 rows no longer
// treated; the two are disjoint by construction.
struct IndicatorVectors {
  std::vector<std::uint8_t> theta10;
  std::vector<std::uint8_t> theta01;
};

IndicatorVectors policy_indicators(const PolicyPair& pair, const Dataset& data);

}  // namespace wb
