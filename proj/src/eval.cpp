#include "mcb/eval.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <ostream>
#include <thread>

#include "mcb/errors.hpp"
#include "mcb/sampling.hpp"
#include "mcb/special.hpp"

namespace mcb {

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> make_candidate_sets(Rng& rng,
                                                          std::size_t n_queries,
                                                          std::size_t pool_size,
                                                          std::size_t m) {
  if (m < 1 || m > pool_size)
    throw Error("bad_argument", "candidate sets: need 1 <= m <= pool size");
  std::vector<std::vector<std::size_t>> sets(n_queries);
  for (std::size_t q = 0; q < n_queries; ++q) {
    // Decoys from the pool minus the true match: draw from [0, pool-1) and
    // shift indices at or above q.
    auto decoys = sample_without_replacement(rng, pool_size - 1, m - 1);
    auto& set = sets[q];
    set.reserve(m);
    set.push_back(q);
    for (std::size_t d : decoys) set.push_back(d >= q ? d + 1 : d);
  }
  return sets;
}

double retrieval_recall(
    const std::vector<std::vector<double>>& candidate_scores,
    const std::vector<std::vector<std::size_t>>& candidate_sets, std::size_t k) {
  if (candidate_scores.size() != candidate_sets.size())
    throw Error("shape_mismatch", "retrieval_recall: scores/sets size mismatch");
  if (candidate_sets.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < candidate_sets.size(); ++q) {
    const auto& set = candidate_sets[q];
    const auto& scores = candidate_scores[q];
    if (scores.size() != set.size())
      throw Error("shape_mismatch", "retrieval_recall: ragged candidate scores");
    if (k > set.size())
      throw Error("bad_argument", "retrieval_recall: k exceeds candidate set size");
    const double true_score = scores[0];  // set[0] is the true match (= q)
    // Rank of the true match under (score desc, pool index asc).
    std::size_t rank = 1;
    for (std::size_t j = 1; j < set.size(); ++j) {
      if (scores[j] > true_score || (scores[j] == true_score && set[j] < set[0]))
        ++rank;
    }
    if (rank <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(candidate_sets.size());
}

double recall_at_k(const PairScorer& scorer, const Matrix& queries,
                   const Matrix& pool, std::size_t k, std::size_t m, Rng& rng) {
  if (k < 1 || k > m) throw Error("bad_argument", "recall_at_k: need 1 <= k <= m");
  if (queries.rows() > pool.rows())
    throw Error("bad_argument", "recall_at_k: more queries than pool rows");
  auto sets = make_candidate_sets(rng, queries.rows(), pool.rows(), m);
  std::vector<std::vector<double>> scores(sets.size());
  for (std::size_t q = 0; q < sets.size(); ++q) {
    scores[q].reserve(sets[q].size());
    for (std::size_t idx : sets[q])
      scores[q].push_back(scorer(queries.row(q), pool.row(idx)));
  }
  return retrieval_recall(scores, sets, k);
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

namespace {

// Candidate-restricted LSE scores: for each query, lse_i over the bank of
// f1(q, b1_i) + f2(b2_i, cand) - log N, evaluated only at the candidate
// pool indices. Same numbers as mc_lse_log_ratio.
std::vector<std::vector<double>> mc_scores_subset(
    const Matrix& phi_b1, const Matrix& phi_b2, const CriticKind& f1,
    const CriticKind& f2, const Matrix& phi_as, const Matrix& phi_cs,
    const std::vector<std::vector<std::size_t>>& candidate_sets) {
  const std::size_t bank_n = phi_b1.rows();
  Matrix s1 = critic_score_matrix(f1, phi_as, phi_b1);  // queries x bank
  std::vector<double> rshift(s1.rows());
  for (std::size_t q = 0; q < s1.rows(); ++q) {
    double m = s1(q, 0);
    for (std::size_t i = 1; i < bank_n; ++i) m = std::max(m, s1(q, i));
    rshift[q] = m;
    double* r = s1.data() + q * bank_n;
    for (std::size_t i = 0; i < bank_n; ++i) r[i] = std::exp(r[i] - m);
  }
  Matrix s2t = transpose(critic_score_matrix(f2, phi_b2, phi_cs));  // pool x bank
  std::vector<double> cshift(s2t.rows());
  for (std::size_t c = 0; c < s2t.rows(); ++c) {
    double m = s2t(c, 0);
    for (std::size_t i = 1; i < bank_n; ++i) m = std::max(m, s2t(c, i));
    cshift[c] = m;
    double* r = s2t.data() + c * bank_n;
    for (std::size_t i = 0; i < bank_n; ++i) r[i] = std::exp(r[i] - m);
  }
  const double log_n = std::log(static_cast<double>(bank_n));
  std::vector<std::vector<double>> out(candidate_sets.size());
  for (std::size_t q = 0; q < candidate_sets.size(); ++q) {
    out[q].reserve(candidate_sets[q].size());
    for (std::size_t c : candidate_sets[q]) {
      const double s = dot(s1.row(q), s2t.row(c));
      out[q].push_back(rshift[q] + cshift[c] + std::log(s) - log_n);
    }
  }
  return out;
}

std::vector<std::vector<double>> direct_scores_subset(
    const CriticKind& critic, const Matrix& phi_as, const Matrix& phi_cs,
    const std::vector<std::vector<std::size_t>>& candidate_sets) {
  std::vector<std::vector<double>> out(candidate_sets.size());
  for (std::size_t q = 0; q < candidate_sets.size(); ++q) {
    out[q].reserve(candidate_sets[q].size());
    for (std::size_t c : candidate_sets[q])
      out[q].push_back(critic_score(critic, phi_as.row(q), phi_cs.row(c)));
  }
  return out;
}

struct TrialOutcome {
  bool ok = false;
  std::string message;
  std::uint64_t seed = 0;
  // recall[method][epoch]
  std::array<std::vector<double>, 3> recall;
};

TrialOutcome run_one_trial(const ExperimentConfig& config, std::size_t trial) {
  TrialOutcome outcome;
  Rng trial_rng = Rng(config.seed).substream("trial", trial);
  outcome.seed = trial_rng.substream("seed-tag").next_u64();

  Rng gen_rng = trial_rng.substream("generator");
  const SynthGenerator gen = make_generator(gen_rng, config.synth);
  Rng sample_rng = trial_rng.substream("samples");
  const TripleDataset triples = sample_triples(
      sample_rng, gen, 2 * config.train_pairs + config.eval_size);
  const SynthSplits splits =
      split_pairs(triples, config.train_pairs, config.eval_size);

  const PairDataset val_ab = pairs_ab(splits.eval);
  const PairDataset val_bc = pairs_bc(splits.eval);
  const PairDataset val_ac = pairs_ac(splits.eval);

  Rng cand_rng = trial_rng.substream("candidates");
  const auto candidate_sets = make_candidate_sets(
      cand_rng, config.eval_size, config.eval_size, config.candidate_m);

  // Bank rows drawn once per trial from the training-side B items.
  Rng bank_rng = trial_rng.substream("bank");
  Matrix train_b(config.train_pairs * 2, config.synth.n_b);
  for (std::size_t i = 0; i < config.train_pairs; ++i) {
    const auto src1 = splits.ab.right.row(i);
    const auto src2 = splits.bc.left.row(i);
    for (std::size_t j = 0; j < config.synth.n_b; ++j) {
      train_b(i, j) = src1[j];
      train_b(config.train_pairs + i, j) = src2[j];
    }
  }
  const std::size_t bank_n = std::min(config.bank_size, train_b.rows());
  const auto bank_idx = sample_without_replacement(bank_rng, train_b.rows(), bank_n);
  const Matrix bank_rows = gather_rows(train_b, bank_idx);

  for (auto& r : outcome.recall) r.assign(config.train.epochs, 0.0);

  TrainConfig cfg = config.train;
  cfg.seed = trial_rng.substream("train-bridged").next_u64();
  const CriticKind critic = cfg.critic;

  auto bridged_observer = [&](std::size_t epoch, const EncoderNet& enc_a,
                              const EncoderNet& enc_b, const EncoderNet& enc_c) {
    const Matrix rep_a = forward(enc_a, splits.eval.a);
    const Matrix rep_c = forward(enc_c, splits.eval.c);
    outcome.recall[static_cast<int>(BridgeMethod::kDirect)][epoch] =
        retrieval_recall(direct_scores_subset(critic, rep_a, rep_c, candidate_sets),
                         candidate_sets, config.k);
    const Matrix phi_bank = forward(enc_b, bank_rows);
    outcome.recall[static_cast<int>(BridgeMethod::kMonteCarlo)][epoch] =
        retrieval_recall(mc_scores_subset(phi_bank, phi_bank, critic, critic, rep_a,
                                          rep_c, candidate_sets),
                         candidate_sets, config.k);
  };
  train_bridged(cfg, cfg, splits.ab, splits.bc, val_ab, val_bc, bridged_observer);

  TrainConfig cfg_gt = config.train;
  cfg_gt.seed = trial_rng.substream("train-gt").next_u64();
  const PairDataset gt_train = pairs_ac(splits.ab_block, Split::kTrain);
  auto gt_observer = [&](std::size_t epoch, const EncoderNet& enc_a,
                         const EncoderNet& enc_c) {
    const Matrix rep_a = forward(enc_a, splits.eval.a);
    const Matrix rep_c = forward(enc_c, splits.eval.c);
    outcome.recall[static_cast<int>(BridgeMethod::kGroundTruth)][epoch] =
        retrieval_recall(direct_scores_subset(critic, rep_a, rep_c, candidate_sets),
                         candidate_sets, config.k);
  };
  train_pair(cfg_gt, gt_train, val_ac, gt_observer);

  outcome.ok = true;
  return outcome;
}

}  // namespace

ExperimentReport run_trials(const ExperimentConfig& config) {
  if (config.trials < 1) throw Error("bad_argument", "run_trials: need >= 1 trial");
  std::vector<TrialOutcome> outcomes(config.trials);

  std::size_t workers = config.threads == 0
                            ? std::max<std::size_t>(1, std::thread::hardware_concurrency())
                            : config.threads;
  workers = std::min(workers, config.trials);

  std::mutex next_mutex;
  std::size_t next_trial = 0;
  auto worker = [&]() {
    for (;;) {
      std::size_t trial;
      {
        std::lock_guard<std::mutex> lock(next_mutex);
        if (next_trial >= config.trials) return;
        trial = next_trial++;
      }
      try {
        outcomes[trial] = run_one_trial(config, trial);
      } catch (const std::exception& e) {
        outcomes[trial].ok = false;
        outcomes[trial].message =
            "trial " + std::to_string(trial) + ": " + e.what();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentReport report;
  for (std::size_t m = 0; m < 3; ++m) {
    auto& rep = report.methods[m];
    rep.method = kBridgeMethodNames[m];
    rep.k = config.k;
    rep.candidate_set_size = config.candidate_m;
  }
  for (const auto& o : outcomes) {
    if (!o.ok) report.aborted_trials.push_back(o.message);
  }
  const std::size_t epochs = config.train.epochs;
  for (std::size_t m = 0; m < 3; ++m) {
    auto& rep = report.methods[m];
    rep.per_epoch_mean.assign(epochs, 0.0);
    rep.per_epoch_std.assign(epochs, 0.0);
    for (std::size_t e = 0; e < epochs; ++e) {
      std::vector<double> vals;
      for (const auto& o : outcomes)
        if (o.ok) vals.push_back(o.recall[m][e]);
      const auto [mean, sd] = mean_std(vals);
      rep.per_epoch_mean[e] = mean;
      rep.per_epoch_std[e] = sd;
    }
    for (const auto& o : outcomes)
      if (o.ok) rep.trial_seeds.push_back(o.seed);
    rep.trials = rep.trial_seeds.size();
    if (epochs > 0) {
      rep.final_mean = rep.per_epoch_mean.back();
      rep.final_std = rep.per_epoch_std.back();
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov
// ---------------------------------------------------------------------------

double ks_asymptotic_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult two_sample_ks(std::vector<double> x, std::vector<double> y) {
  if (x.empty() || y.empty())
    throw Error("bad_argument", "two_sample_ks: empty sample");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  double d = 0.0, fx = 0.0, fy = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    fx = static_cast<double>(i) / nx;
    fy = static_cast<double>(j) / ny;
    d = std::max(d, std::abs(fx - fy));
  }
  const double ne = nx * ny / (nx + ny);
  const double sqrt_ne = std::sqrt(ne);
  const double lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
  return {d, ks_asymptotic_q(lambda)};
}

UniformityReport uniformity_test(Rng& rng, const Matrix& reps,
                                 std::size_t directions, std::size_t reference_n) {
  if (reps.rows() < 10) throw Error("sample_too_small", "uniformity: sample too small");
  if (directions < 1) throw Error("bad_argument", "uniformity: need >= 1 direction");
  const std::size_t d = reps.cols();
  constexpr double kTol = 1e-6;
  for (std::size_t i = 0; i < reps.rows(); ++i)
    if (std::abs(norm2(reps.row(i)) - 1.0) > kTol)
      throw Error("not_unit_norm", "uniformity: rows must be unit vectors");
  if (reference_n == 0) reference_n = reps.rows();

  Rng ref_rng = rng.substream("reference");
  const SphereSample reference = sample_uniform_sphere(ref_rng, d, reference_n);
  Rng dir_rng = rng.substream("directions");
  const SphereSample dirs = sample_uniform_sphere(dir_rng, d, directions);

  std::vector<double> stats;
  double min_p = 1.0;
  for (std::size_t r = 0; r < directions; ++r) {
    const auto u = dirs.points.row(r);
    std::vector<double> px(reps.rows()), py(reference_n);
    for (std::size_t i = 0; i < reps.rows(); ++i) px[i] = dot(reps.row(i), u);
    for (std::size_t i = 0; i < reference_n; ++i)
      py[i] = dot(reference.points.row(i), u);
    const KsResult ks = two_sample_ks(std::move(px), std::move(py));
    stats.push_back(ks.statistic);
    min_p = std::min(min_p, ks.p_value);
  }
  std::sort(stats.begin(), stats.end());
  const std::size_t n = stats.size();
  const double median =
      (n % 2 == 1) ? stats[n / 2] : 0.5 * (stats[n / 2 - 1] + stats[n / 2]);

  UniformityReport report;
  report.ks_stat_median = median;
  report.p_value = std::min(1.0, min_p * static_cast<double>(directions));
  report.directions = directions;
  report.n_sample = reps.rows();
  report.n_reference = reference_n;
  return report;
}

// ---------------------------------------------------------------------------
// 2-D dump
// ---------------------------------------------------------------------------

void dump_representations_2d(const EncoderNet& enc_a, const EncoderNet& enc_b,
                             const EncoderNet& enc_c, const TripleDataset& eval,
                             const std::string& critic_tag, std::ostream& out) {
  if (enc_a.output_dim() != 2 || enc_b.output_dim() != 2 || enc_c.output_dim() != 2)
    throw Error("bad_dimension", "dump_representations_2d: latent dimension must be 2");
  out << "x,y,modality,critic\n";
  const char* tags[3] = {"A", "B", "C"};
  const Matrix reps[3] = {forward(enc_a, eval.a), forward(enc_b, eval.b),
                          forward(enc_c, eval.c)};
  char buf[64];
  for (int m = 0; m < 3; ++m) {
    for (std::size_t i = 0; i < reps[m].rows(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g", reps[m](i, 0), reps[m](i, 1));
      out << buf << ',' << tags[m] << ',' << critic_tag << '\n';
    }
  }
}

}  // namespace mcb
