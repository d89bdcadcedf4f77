#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace wb {

// Balanced random partition of {0,...,n-1} into K folds. A pure function of
// (n, K, seed): the permutation comes from a Fisher-Yates shuffle driven by
// the project RNG, then fold j takes every K-th element.
struct FoldAssignment {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> fold_of;  // per observation, in {0,...,K-1}

  std::vector<std::vector<std::size_t>> members() const;
  std::vector<std::vector<std::size_t>> complements() const;
};

FoldAssignment make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

// All rows in one "fold" whose complement is also the full sample; used for
// in-sample (no sample splitting) estimation.
FoldAssignment trivial_fold(std::size_t n);

}  // namespace wb
