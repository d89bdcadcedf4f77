#include "wb/stats.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "wb/errors.hpp"

namespace wb {

// AS 241, PPND16 (Wichura 1988): rational approximations on three regions.
double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ArgumentError("inverse_normal_cdf: p must lie strictly in (0,1)");
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        q * (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                   6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
               1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
    value = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    value = num / den;
  }
  return q < 0.0 ? -value : value;
}

double normal_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ArgumentError("normal_quantile: level must lie strictly in (0,1)");
  }
  return inverse_normal_cdf((alpha + 1.0) / 2.0);
}

namespace {

struct GaussLegendre64 {
  std::array<double, 32> node;    // positive abscissae on (0,1]
  std::array<double, 32> weight;  // matching weights

  // Nodes are roots of P_64; found by Newton from the Chebyshev initial
  // guess, weights w = 2 / ((1-x^2) P'_64(x)^2).
  GaussLegendre64() {
    constexpr int n = 64;
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i < n / 2; ++i) {
      double x = std::cos(pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::fabs(dx) < 1e-15) break;
      }
      node[i] = x;
      weight[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }

  double apply(const std::function<double(double)>& f, double a, double b) const {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < node.size(); ++i) {
      sum += weight[i] * (f(c + h * node[i]) + f(c - h * node[i]));
    }
    return h * sum;
  }
};

const GaussLegendre64& rule64() {
  static const GaussLegendre64 rule;
  return rule;
}

double integrate_panel(const std::function<double(double)>& f, double a, double b,
                       double whole, double rel_tol, int depth) {
  const double mid = 0.5 * (a + b);
  const double left = rule64().apply(f, a, mid);
  const double right = rule64().apply(f, mid, b);
  const double refined = left + right;
  const double scale = std::max(std::fabs(refined), 1e-300);
  if (depth >= 24 || std::fabs(refined - whole) <= rel_tol * scale) {
    return refined;
  }
  return integrate_panel(f, a, mid, left, rel_tol, depth + 1) +
         integrate_panel(f, mid, b, right, rel_tol, depth + 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol) {
  if (!(a <= b)) throw ArgumentError("integrate: interval endpoints out of order");
  if (a == b) return 0.0;
  const double whole = rule64().apply(f, a, b);
  return integrate_panel(f, a, b, whole, rel_tol, 0);
}

}  // namespace wb
