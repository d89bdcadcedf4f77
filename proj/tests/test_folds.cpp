#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "wb/errors.hpp"
#include "wb/folds.hpp"

TEST_CASE("folds partition the index set with balanced sizes") {
  const auto folds = wb::make_folds(4, 2, 11);
  REQUIRE(folds.fold_of.size() == 4);
  const auto members = folds.members();
  CHECK(members[0].size() == 2);
  CHECK(members[1].size() == 2);

  const auto uneven = wb::make_folds(5, 2, 11).members();
  std::vector<std::size_t> sizes{uneven[0].size(), uneven[1].size()};
  std::sort(sizes.begin(), sizes.end());
  CHECK(sizes[0] == 2);
  CHECK(sizes[1] == 3);

  // union of fold members is {0..4}
  std::vector<std::size_t> all;
  for (const auto& m : uneven) all.insert(all.end(), m.begin(), m.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 5; ++i) CHECK(all[i] == i);
}

TEST_CASE("fold assignment is a pure function of (n, K, seed)") {
  const auto a = wb::make_folds(100, 5, 42);
  const auto b = wb::make_folds(100, 5, 42);
  CHECK(a.fold_of == b.fold_of);
  const auto c = wb::make_folds(100, 5, 43);
  CHECK(a.fold_of != c.fold_of);
}

TEST_CASE("fold preconditions") {
  CHECK_THROWS_AS(wb::make_folds(4, 5, 1), wb::ArgumentError);
  CHECK_THROWS_AS(wb::make_folds(4, 1, 1), wb::ArgumentError);
  CHECK_THROWS_AS(wb::make_folds(4, 0, 1), wb::ArgumentError);
}

TEST_CASE("complements exclude exactly the fold's own rows") {
  const auto folds = wb::make_folds(30, 3, 9);
  const auto members = folds.members();
  const auto complements = folds.complements();
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(members[k].size() + complements[k].size() == 30);
    for (std::size_t i : complements[k]) CHECK(folds.fold_of[i] != k);
  }
}

TEST_CASE("trivial fold trains on everything") {
  const auto folds = wb::trivial_fold(7);
  CHECK(folds.k == 1);
  CHECK(folds.complements()[0].size() == 7);
}
