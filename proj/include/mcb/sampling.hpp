#pragma once

#include <cstddef>

#include "mcb/matrix.hpp"
#include "mcb/rng.hpp"

namespace mcb {

// Rows are unit vectors drawn uniformly from S^{dim-1}.
struct SphereSample {
  std::size_t dim = 0;
  Matrix points;
};

// Rows drawn from N(0, scale * I); scale is the per-coordinate variance.
struct GaussianSample {
  std::size_t dim = 0;
  double scale = 1.0;
  Matrix points;
};

SphereSample sample_uniform_sphere(Rng& rng, std::size_t dim, std::size_t n);
GaussianSample sample_gaussian(Rng& rng, std::size_t dim, std::size_t n,
                               double scale = 1.0);

// Fills an existing matrix with iid standard normals.
void fill_gaussian(Rng& rng, Matrix& m);

}  // namespace mcb
