#include <doctest.h>

#include <cmath>

#include "normal_quantile_oracle.hpp"
#include "wb/errors.hpp"
#include "wb/stats.hpp"

TEST_CASE("normal_quantile matches the frozen high-precision grid") {
  for (const auto& c : wb_test::kNormalQuantileOracle) {
    CHECK(std::fabs(wb::normal_quantile(c.alpha) - c.critical) < 1e-9);
  }
}

TEST_CASE("normal_quantile known values") {
  CHECK(wb::normal_quantile(0.95) == doctest::Approx(1.95996).epsilon(1e-5));
  CHECK(wb::normal_quantile(0.99) == doctest::Approx(2.57583).epsilon(1e-5));
  // alpha -> 0 gives a vanishing critical value
  CHECK(std::fabs(wb::normal_quantile(1e-12)) < 1e-10);
}

TEST_CASE("normal_quantile rejects out-of-range levels") {
  CHECK_THROWS_AS(wb::normal_quantile(0.0), wb::ArgumentError);
  CHECK_THROWS_AS(wb::normal_quantile(1.0), wb::ArgumentError);
  CHECK_THROWS_AS(wb::normal_quantile(-0.5), wb::ArgumentError);
}

TEST_CASE("inverse_normal_cdf round-trips through the normal CDF") {
  auto phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  for (double p : {1e-8, 1e-4, 0.02, 0.31, 0.5, 0.77, 0.999, 1 - 1e-9}) {
    CHECK(phi(wb::inverse_normal_cdf(p)) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("quadrature is exact on polynomials and tight on smooth integrands") {
  const double linear = wb::integrate([](double u) { return 2374.0 + 1000.0 * u; },
                                      0.0, 1.0);
  CHECK(linear == doctest::Approx(2874.0).epsilon(1e-14));

  const double cubic = wb::integrate([](double u) { return u * u * u; }, -1.0, 2.0);
  CHECK(cubic == doctest::Approx(15.0 / 4.0).epsilon(1e-13));

  const double gauss = wb::integrate(
      [](double x) { return std::exp(-x * x / 2.0); }, -8.0, 8.0);
  CHECK(gauss == doctest::Approx(std::sqrt(2.0 * 3.14159265358979323846))
                     .epsilon(1e-10));

  CHECK(wb::integrate([](double) { return 1.0; }, 3.0, 3.0) == 0.0);
  CHECK_THROWS_AS(wb::integrate([](double) { return 1.0; }, 1.0, 0.0),
                  wb::ArgumentError);
}
