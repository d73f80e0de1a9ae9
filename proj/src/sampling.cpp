#include "mcb/sampling.hpp"

#include <cmath>

#include "mcb/errors.hpp"

namespace mcb {

void fill_gaussian(Rng& rng, Matrix& m) {
  double* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) p[i] = rng.next_gaussian();
}

SphereSample sample_uniform_sphere(Rng& rng, std::size_t dim, std::size_t n) {
  if (dim < 1) throw Error("bad_argument", "sample_uniform_sphere: dim must be >= 1");
  Matrix pts(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = pts.row(i);
    double norm = 0.0;
    do {
      for (std::size_t j = 0; j < dim; ++j) row[j] = rng.next_gaussian();
      norm = norm2(row);
    } while (norm < 1e-12);
    for (std::size_t j = 0; j < dim; ++j) row[j] /= norm;
  }
  return {dim, std::move(pts)};
}

GaussianSample sample_gaussian(Rng& rng, std::size_t dim, std::size_t n,
                               double scale) {
  if (dim < 1) throw Error("bad_argument", "sample_gaussian: dim must be >= 1");
  if (!(scale > 0.0)) throw Error("bad_argument", "sample_gaussian: scale must be > 0");
  Matrix pts(n, dim);
  const double sd = std::sqrt(scale);
  double* p = pts.data();
  for (std::size_t i = 0; i < pts.size(); ++i) p[i] = sd * rng.next_gaussian();
  return {dim, scale, std::move(pts)};
}

}  // namespace mcb
