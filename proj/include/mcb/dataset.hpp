#pragma once

#include <string>

#include "mcb/matrix.hpp"

namespace mcb {

enum class Split { kTrain, kValidation };

// Aligned sample pairs from two modalities; row i of left corresponds to
// row i of right.
struct PairDataset {
  Matrix left;
  Matrix right;
  Split split = Split::kTrain;

  std::size_t size() const { return left.rows(); }
};

// Row-aligned triples, held out for ground-truth training and evaluation.
struct TripleDataset {
  Matrix a;
  Matrix b;
  Matrix c;

  std::size_t size() const { return a.rows(); }
};

}  // namespace mcb
