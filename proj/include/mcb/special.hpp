#pragma once

#include <cstddef>
#include <span>

namespace mcb {

// log(sum_i exp(v_i)) with max-shift; safe for inputs up to +-1e8.
double log_sum_exp(std::span<const double> values);

// Modified Bessel function of the first kind I_nu(x), nu >= 0, x >= 0.
// Ascending series below x = 20, Miller backward recurrence with an
// asymptotic anchor at order nu mod 1 above. Relative accuracy ~1e-10 for
// x <= 50, nu <= 20.
double bessel_i(double order, double x);

// log of the von Mises-Fisher normalizer on S^{dim-1}:
//   C_p(kappa) = kappa^{p/2-1} / ((2 pi)^{p/2} I_{p/2-1}(kappa)).
// Continuous at kappa = 0 where it equals 1 / Area(S^{p-1}).
double vmf_log_norm(std::size_t dim, double kappa);

// log surface area of the unit sphere S^{dim-1} embedded in R^dim.
double log_sphere_area(std::size_t dim);

}  // namespace mcb
