#include "wb/folds.hpp"

#include <numeric>

#include "wb/errors.hpp"
#include "wb/rng.hpp"

namespace wb {

std::vector<std::vector<std::size_t>> FoldAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(k);
  for (std::size_t i = 0; i < fold_of.size(); ++i) out[fold_of[i]].push_back(i);
  return out;
}

std::vector<std::vector<std::size_t>> FoldAssignment::complements() const {
  std::vector<std::vector<std::size_t>> out(k);
  if (k == 1) {
    // In-sample estimation: the "held-out" fit is trained on everything.
    out[0].resize(fold_of.size());
    std::iota(out[0].begin(), out[0].end(), std::size_t{0});
    return out;
  }
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (j != fold_of[i]) out[j].push_back(i);
    }
  }
  return out;
}

FoldAssignment make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) {
    throw ArgumentError("make_folds: need 2 <= K <= n, got K=" + std::to_string(k) +
                        ", n=" + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(SplitMix64::mix(seed));
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
    std::swap(order[i], order[j]);
  }
  FoldAssignment out;
  out.k = k;
  out.seed = seed;
  out.fold_of.resize(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    out.fold_of[order[pos]] = static_cast<std::uint32_t>(pos % k);
  }
  return out;
}

FoldAssignment trivial_fold(std::size_t n) {
  FoldAssignment out;
  out.k = 1;
  out.seed = 0;
  out.fold_of.assign(n, 0);
  return out;
}

}  // namespace wb
