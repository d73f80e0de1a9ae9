#include "mcb/synthdata.hpp"

#include <cmath>

#include "mcb/errors.hpp"
#include "mcb/sampling.hpp"

namespace mcb {

SynthGenerator make_generator(Rng& rng, const SynthSpec& spec) {
  if (spec.n_a < 1 || spec.n_b < 1 || spec.n_c < 1)
    throw Error("bad_argument", "make_generator: dims must be >= 1");
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma))
    throw Error("bad_argument", "make_generator: noise sigma must be finite and >= 0");
  if (!spec.mu.empty() && spec.mu.size() != spec.n_b)
    throw Error("shape_mismatch", "make_generator: mu length != n_b");

  SynthGenerator gen;
  gen.noise_sigma = spec.noise_sigma;
  gen.ci_shift = spec.ci_shift;
  gen.mu = spec.mu.empty() ? std::vector<double>(spec.n_b, 0.0) : spec.mu;

  Rng rng_w = rng.substream("covariance");
  Matrix w(spec.n_b, spec.n_b);
  fill_gaussian(rng_w, w);
  gen.sigma = matmul_nt(w, w);
  for (std::size_t i = 0; i < spec.n_b; ++i) gen.sigma(i, i) += 1e-3;
  gen.sigma_chol = cholesky(gen.sigma);

  const double proj_sd = 1.0 / std::sqrt(static_cast<double>(spec.n_b));
  Rng rng_a = rng.substream("map-a");
  gen.map_a = Matrix(spec.n_a, spec.n_b);
  for (std::size_t i = 0; i < gen.map_a.size(); ++i)
    gen.map_a.data()[i] = proj_sd * rng_a.next_gaussian();
  Rng rng_c = rng.substream("map-c");
  gen.map_c = Matrix(spec.n_c, spec.n_b);
  for (std::size_t i = 0; i < gen.map_c.size(); ++i)
    gen.map_c.data()[i] = proj_sd * rng_c.next_gaussian();
  return gen;
}

TripleDataset sample_triples(Rng& rng, const SynthGenerator& gen, std::size_t n) {
  if (n < 1) throw Error("bad_argument", "sample_triples: n must be >= 1");
  const std::size_t n_b = gen.sigma.rows();
  const std::size_t n_a = gen.map_a.rows();
  const std::size_t n_c = gen.map_c.rows();

  Matrix z(n, n_b);
  fill_gaussian(rng, z);
  TripleDataset out;
  out.b = matmul_nt(z, gen.sigma_chol);  // rows: mu + L z
  for (std::size_t i = 0; i < n; ++i) {
    double* r = out.b.data() + i * n_b;
    for (std::size_t j = 0; j < n_b; ++j) r[j] += gen.mu[j];
  }

  out.a = matmul_nt(out.b, gen.map_a);
  out.c = matmul_nt(out.b, gen.map_c);
  for (std::size_t i = 0; i < n; ++i) {
    double* ra = out.a.data() + i * n_a;
    double* rc = out.c.data() + i * n_c;
    for (std::size_t j = 0; j < n_a; ++j) ra[j] += gen.noise_sigma * rng.next_gaussian();
    for (std::size_t j = 0; j < n_c; ++j) rc[j] += gen.noise_sigma * rng.next_gaussian();
    if (gen.ci_shift > 0.0) {
      // One latent scalar per row, shared between A and C but unseen by B.
      const double shift = gen.ci_shift * rng.next_gaussian();
      for (std::size_t j = 0; j < n_a; ++j) ra[j] += shift;
      for (std::size_t j = 0; j < n_c; ++j) rc[j] += shift;
    }
  }
  return out;
}

SynthSplits split_pairs(const TripleDataset& triples, std::size_t train_pairs,
                        std::size_t eval_size) {
  const std::size_t need = 2 * train_pairs + eval_size;
  if (triples.size() < need)
    throw Error("insufficient_rows", "split_pairs: need " + std::to_string(need) +
                                         " triples, have " +
                                         std::to_string(triples.size()));
  std::vector<std::size_t> idx_ab, idx_bc, idx_eval;
  for (std::size_t i = 0; i < train_pairs; ++i) idx_ab.push_back(i);
  for (std::size_t i = 0; i < train_pairs; ++i) idx_bc.push_back(train_pairs + i);
  for (std::size_t i = 0; i < eval_size; ++i) idx_eval.push_back(2 * train_pairs + i);

  SynthSplits s;
  s.ab = PairDataset{gather_rows(triples.a, idx_ab), gather_rows(triples.b, idx_ab),
                     Split::kTrain};
  s.bc = PairDataset{gather_rows(triples.b, idx_bc), gather_rows(triples.c, idx_bc),
                     Split::kTrain};
  s.eval = TripleDataset{gather_rows(triples.a, idx_eval),
                         gather_rows(triples.b, idx_eval),
                         gather_rows(triples.c, idx_eval)};
  s.ab_block = TripleDataset{gather_rows(triples.a, idx_ab),
                             gather_rows(triples.b, idx_ab),
                             gather_rows(triples.c, idx_ab)};
  return s;
}

PairDataset pairs_ab(const TripleDataset& t, Split split) {
  return PairDataset{t.a, t.b, split};
}
PairDataset pairs_bc(const TripleDataset& t, Split split) {
  return PairDataset{t.b, t.c, split};
}
PairDataset pairs_ac(const TripleDataset& t, Split split) {
  return PairDataset{t.a, t.c, split};
}

}  // namespace mcb
