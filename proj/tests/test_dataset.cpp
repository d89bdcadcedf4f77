#include <doctest.h>

#include "wb/dataset.hpp"
#include "wb/errors.hpp"

using wb::Dataset;
using wb::Schema;

namespace {

Schema yx_schema() {
  Schema s;
  s.y = "y";
  s.d = "d";
  s.x = {"x"};
  return s;
}

}  // namespace

TEST_CASE("three-row csv loads with preserved order") {
  const Dataset data = wb::load_dataset_from_string(
      "y,d,x\n1,1,0\n3,1,0\n2,0,0\n", yx_schema(), {0, 10});
  CHECK(data.n() == 3);
  CHECK(data.y(0) == 1.0);
  CHECK(data.y(1) == 3.0);
  CHECK(data.d(2) == 0);
  CHECK(data.x_row(1)[0] == 0.0);
  CHECK_FALSE(data.has_z());
}

TEST_CASE("outcome outside the declared support names the row") {
  CHECK_THROWS_WITH_AS(
      wb::load_dataset_from_string("y,d,x\n1,1,0\n12,0,0\n", yx_schema(), {0, 10}),
      doctest::Contains("row 2"), wb::DomainError);
}

TEST_CASE("non-binary treatment is rejected") {
  CHECK_THROWS_AS(
      wb::load_dataset_from_string("y,d,x\n1,2,0\n", yx_schema(), {0, 10}),
      wb::DomainError);
}

TEST_CASE("missing column is a schema error") {
  Schema s = yx_schema();
  s.x = {"education"};
  CHECK_THROWS_WITH_AS(
      wb::load_dataset_from_string("y,d,x\n1,1,0\n", s, {0, 10}),
      doctest::Contains("education"), wb::SchemaError);
}

TEST_CASE("unparseable and missing cells are parse errors with location") {
  CHECK_THROWS_WITH_AS(
      wb::load_dataset_from_string("y,d,x\noops,1,0\n", yx_schema(), {0, 10}),
      doctest::Contains("row 1"), wb::ParseError);
  CHECK_THROWS_AS(
      wb::load_dataset_from_string("y,d,x\n1,1,\n", yx_schema(), {0, 10}),
      wb::ParseError);
}

TEST_CASE("degenerate support is rejected") {
  CHECK_THROWS_AS(
      wb::load_dataset_from_string("y,d,x\n1,1,0\n", yx_schema(), {5, 5}),
      wb::DomainError);
}

TEST_CASE("optional z column and unmapped columns") {
  Schema s = yx_schema();
  s.z = "offer";
  const Dataset data = wb::load_dataset_from_string(
      "y,d,offer,x,ignored\n1,1,1,3,99\n2,0,0,4,98\n", s, {0, 10});
  CHECK(data.has_z());
  CHECK(data.z(0) == 1.0);
  CHECK(data.z(1) == 0.0);
  CHECK(data.x_row(0)[0] == 3.0);
}

TEST_CASE("loading is deterministic: same bytes, identical dataset") {
  const std::string csv = "y,d,x\n1.25,1,7\n3.5,0,8\n2,1,9\n";
  const Dataset a = wb::load_dataset_from_string(csv, yx_schema(), {0, 10});
  const Dataset b = wb::load_dataset_from_string(csv, yx_schema(), {0, 10});
  REQUIRE(a.n() == b.n());
  for (std::size_t i = 0; i < a.n(); ++i) {
    CHECK(a.y(i) == b.y(i));
    CHECK(a.d(i) == b.d(i));
    CHECK(a.x_row(i)[0] == b.x_row(i)[0]);
  }
}

TEST_CASE("subset keeps schema and support") {
  const Dataset data = wb::load_dataset_from_string(
      "y,d,x\n1,1,0\n3,1,1\n2,0,2\n", yx_schema(), {0, 10});
  const std::vector<std::size_t> rows{2, 0};
  const Dataset sub = data.subset(rows);
  CHECK(sub.n() == 2);
  CHECK(sub.y(0) == 2.0);
  CHECK(sub.y(1) == 1.0);
  CHECK(sub.support().hi == 10.0);
}
