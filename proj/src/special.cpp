#include "mcb/special.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mcb/errors.hpp"

namespace mcb {

namespace {

constexpr double kSeriesCutoff = 20.0;

// Ascending series: I_nu(x) = (x/2)^nu sum_k (x^2/4)^k / (k! Gamma(nu+k+1)).
// All terms positive, no cancellation.
double bessel_series(double nu, double x) {
  const double q = 0.25 * x * x;
  double term = std::exp(nu * std::log(0.5 * x) - std::lgamma(nu + 1.0));
  double sum = term;
  for (int k = 1; k < 600; ++k) {
    term *= q / (k * (k + nu));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

// Hankel asymptotic expansion; adequate for order < 1 once x >= 20.
double bessel_asymptotic_small_order(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 40; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (8.0 * k * x);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return std::exp(x) / std::sqrt(2.0 * std::numbers::pi * x) * sum;
}

// Miller backward recurrence normalized against the small-order anchor.
double bessel_miller(double nu, double x) {
  const double frac = nu - std::floor(nu);
  const int n = static_cast<int>(std::floor(nu));
  const int start = n + 40 + static_cast<int>(std::sqrt(40.0 * (n + 1)));
  double above = 0.0;    // I_{frac + k + 1}, unnormalized
  double current = 1e-280;  // I_{frac + k}
  double target = (n == start) ? current : 0.0;
  bool have_target = (n == start);
  for (int k = start; k >= 1; --k) {
    const double below = above + (2.0 * (frac + k) / x) * current;
    above = current;
    current = below;
    if (k - 1 == n) {
      target = current;
      have_target = true;
    }
    if (std::abs(current) > 1e250) {
      current *= 1e-250;
      above *= 1e-250;
      if (have_target) target *= 1e-250;
    }
  }
  // current is now the unnormalized I_frac.
  return target / current * bessel_asymptotic_small_order(frac, x);
}

}  // namespace

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw Error("empty_reduction", "log_sum_exp: empty reduction");
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;  // all -inf, or a +-inf dominates
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double bessel_i(double order, double x) {
  if (!(order >= 0.0) || !std::isfinite(order))
    throw Error("bessel_domain", "bessel_i: order must be finite and >= 0");
  if (!(x >= 0.0) || !std::isfinite(x))
    throw Error("bessel_domain", "bessel_i: x must be finite and >= 0");
  if (x == 0.0) return order == 0.0 ? 1.0 : 0.0;
  if (x < kSeriesCutoff) return bessel_series(order, x);
  return bessel_miller(order, x);
}

double vmf_log_norm(std::size_t dim, double kappa) {
  if (dim < 2) throw Error("bad_argument", "vmf_log_norm: dimension must be >= 2");
  if (!(kappa >= 0.0) || !std::isfinite(kappa))
    throw Error("bad_argument", "vmf_log_norm: kappa must be finite and >= 0");
  const double p = static_cast<double>(dim);
  const double nu = 0.5 * p - 1.0;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  if (kappa < kSeriesCutoff) {
    // log C = -(p/2) log(2pi) + nu log 2 + lgamma(nu+1) - log S where
    // S = sum_k (kappa^2/4)^k Gamma(nu+1) / (k! Gamma(nu+k+1)); the
    // kappa^nu factors cancel analytically, so kappa -> 0 is exact.
    const double q = 0.25 * kappa * kappa;
    double term = 1.0, s = 1.0;
    for (int k = 1; k < 600; ++k) {
      term *= q / (k * (k + nu));
      s += term;
      if (term < s * 1e-17) break;
    }
    return -0.5 * p * log2pi + nu * std::numbers::ln2 + std::lgamma(nu + 1.0) -
           std::log(s);
  }
  return nu * std::log(kappa) - 0.5 * p * log2pi - std::log(bessel_i(nu, kappa));
}

double log_sphere_area(std::size_t dim) {
  if (dim < 1) throw Error("bad_argument", "log_sphere_area: dimension must be >= 1");
  const double p = static_cast<double>(dim);
  return std::numbers::ln2 + 0.5 * p * std::log(std::numbers::pi) -
         std::lgamma(0.5 * p);
}

}  // namespace mcb
