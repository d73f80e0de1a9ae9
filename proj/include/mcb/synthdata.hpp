#pragma once

#include <cstddef>
#include <vector>

#include "mcb/dataset.hpp"
#include "mcb/matrix.hpp"
#include "mcb/rng.hpp"

namespace mcb {

// Generative process: B ~ N(mu, Sigma); A and C are random linear
// projections of B plus isotropic noise. ci_shift adds a per-row latent
// scalar along the all-ones vector to both A and C, violating A _|_ C | B
// with sweepable magnitude.
struct SynthSpec {
  std::size_t n_a = 16;
  std::size_t n_b = 16;
  std::size_t n_c = 16;
  double noise_sigma = 0.1;
  std::vector<double> mu;  // empty means zero mean
  double ci_shift = 0.0;
};

struct SynthGenerator {
  std::vector<double> mu;
  Matrix sigma;       // n_b x n_b, SPD by construction
  Matrix sigma_chol;  // lower-triangular factor of sigma
  Matrix map_a;       // n_a x n_b
  Matrix map_c;       // n_c x n_b
  double noise_sigma = 0.1;
  double ci_shift = 0.0;
};

// Freezes (mu, Sigma, M_A, M_C) from the stream. Sigma = W W^T + 1e-3 I
// with W iid N(0,1); projection entries are iid N(0, 1/n_b).
SynthGenerator make_generator(Rng& rng, const SynthSpec& spec);

TripleDataset sample_triples(Rng& rng, const SynthGenerator& gen, std::size_t n);

struct SynthSplits {
  PairDataset ab;      // (A, B) training pairs
  PairDataset bc;      // (B, C) training pairs
  TripleDataset eval;  // held-out triples for validation and retrieval
  // The triples behind `ab`, kept so a privileged ground-truth pair can be
  // trained on their (A, C) columns without ever exposing them to the
  // bridge methods.
  TripleDataset ab_block;
};

// AB and BC come from disjoint triples (no shared B rows), eval from a
// third disjoint block. Throws "insufficient_rows" when the population is
// too small.
SynthSplits split_pairs(const TripleDataset& triples, std::size_t train_pairs,
                        std::size_t eval_size);

// Views of a triple dataset as aligned pairs.
PairDataset pairs_ab(const TripleDataset& t, Split split = Split::kValidation);
PairDataset pairs_bc(const TripleDataset& t, Split split = Split::kValidation);
PairDataset pairs_ac(const TripleDataset& t, Split split = Split::kValidation);

}  // namespace mcb
