#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcb/bridge.hpp"
#include "mcb/contrastive.hpp"
#include "mcb/encoder.hpp"
#include "mcb/matrix.hpp"
#include "mcb/rng.hpp"
#include "mcb/synthdata.hpp"

namespace mcb {

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

using PairScorer =
    std::function<double(std::span<const double>, std::span<const double>)>;

// Per query: the true match (pool index == query index) plus m-1 decoys
// drawn without replacement from the rest of the pool.
std::vector<std::vector<std::size_t>> make_candidate_sets(Rng& rng,
                                                          std::size_t n_queries,
                                                          std::size_t pool_size,
                                                          std::size_t m);

// Fraction of queries whose true match ranks in the top k. Ranking is by
// score descending, ties broken by lowest pool index.
double retrieval_recall(
    const std::vector<std::vector<double>>& candidate_scores,
    const std::vector<std::vector<std::size_t>>& candidate_sets, std::size_t k);

// Convenience wrapper over a per-pair scorer; query i's true match is pool
// row i. Throws "bad_argument" when k > m or the pool is smaller than m.
double recall_at_k(const PairScorer& scorer, const Matrix& queries,
                   const Matrix& pool, std::size_t k, std::size_t m, Rng& rng);

// ---------------------------------------------------------------------------
// Multi-trial synthetic experiment (jointly trained bridge + privileged pair)
// ---------------------------------------------------------------------------

enum class BridgeMethod { kGroundTruth = 0, kDirect = 1, kMonteCarlo = 2 };
inline constexpr std::array<const char*, 3> kBridgeMethodNames = {
    "ground_truth", "direct", "monte_carlo"};

struct RetrievalReport {
  std::string method;
  std::vector<double> per_epoch_mean;
  std::vector<double> per_epoch_std;
  std::vector<std::uint64_t> trial_seeds;
  double final_mean = 0.0;
  double final_std = 0.0;
  std::size_t trials = 0;
  std::size_t k = 1;
  std::size_t candidate_set_size = 32;
};

struct ExperimentConfig {
  SynthSpec synth;
  TrainConfig train;  // per-trial seeds are derived from `seed` below
  std::size_t trials = 20;
  std::size_t train_pairs = 5000;
  std::size_t eval_size = 1000;
  std::size_t candidate_m = 32;
  std::size_t k = 1;
  std::size_t bank_size = 1024;
  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

struct ExperimentReport {
  std::array<RetrievalReport, 3> methods;  // indexed by BridgeMethod
  std::vector<std::string> aborted_trials;
};

// One trial: fresh generator and splits, jointly trained A<->B<->C encoders
// (shared B), a privileged pair trained on (A, C), and per-epoch recall@k
// for all three methods over shared candidate sets.
ExperimentReport run_trials(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Hypersphere uniformity diagnostic
// ---------------------------------------------------------------------------

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
KsResult two_sample_ks(std::vector<double> x, std::vector<double> y);

// Asymptotic KS survival function Q(lambda) = 2 sum (-1)^{j-1} e^{-2 j^2 l^2}.
double ks_asymptotic_q(double lambda);

struct UniformityReport {
  double ks_stat_median = 0.0;
  double p_value = 1.0;  // min over directions, Bonferroni-corrected
  std::size_t directions = 0;
  std::size_t n_sample = 0;
  std::size_t n_reference = 0;
};

// Projects unit-norm rows and a fresh uniform-sphere reference onto random
// directions; per-direction two-sample KS, minimum p Bonferroni-corrected.
// reference_n = 0 means match the sample size.
UniformityReport uniformity_test(Rng& rng, const Matrix& reps,
                                 std::size_t directions = 16,
                                 std::size_t reference_n = 0);

// ---------------------------------------------------------------------------
// 2-D representation dump
// ---------------------------------------------------------------------------

// CSV rows (x, y, modality, critic) for every eval representation; requires
// latent dimension 2.
void dump_representations_2d(const EncoderNet& enc_a, const EncoderNet& enc_b,
                             const EncoderNet& enc_c, const TripleDataset& eval,
                             const std::string& critic_tag, std::ostream& out);

// Mean and (population) standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

}  // namespace mcb
