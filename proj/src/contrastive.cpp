#include "mcb/contrastive.hpp"

#include <cmath>
#include <string>

#include "mcb/errors.hpp"
#include "mcb/special.hpp"

namespace mcb {

CriticKind l2_critic() { return {CriticTag::kL2Half, 1.0}; }
CriticKind dot_critic() { return {CriticTag::kDot, 1.0}; }
CriticKind cosine_critic(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw Error("bad_argument", "cosine critic: temperature must be finite and > 0");
  return {CriticTag::kCosine, temperature};
}

OutputMode output_mode_for(const CriticKind& kind) {
  return kind.tag == CriticTag::kCosine ? OutputMode::kUnitNorm : OutputMode::kRaw;
}

double critic_score(const CriticKind& kind, std::span<const double> x,
                    std::span<const double> y) {
  switch (kind.tag) {
    case CriticTag::kL2Half:
      return -0.5 * squared_distance(x, y);
    case CriticTag::kDot:
      return dot(x, y);
    case CriticTag::kCosine: {
      const double nx = norm2(x), ny = norm2(y);
      if (nx == 0.0 || ny == 0.0)
        throw Error("zero_norm", "cosine critic: zero-norm input");
      return dot(x, y) / (kind.temperature * nx * ny);
    }
  }
  throw Error("bad_argument", "critic_score: unknown critic");
}

namespace {

Matrix normalized_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const double n = norm2(out.row(i));
    if (n == 0.0) throw Error("zero_norm", "cosine critic: zero-norm input");
    double* r = out.data() + i * out.cols();
    for (std::size_t j = 0; j < out.cols(); ++j) r[j] /= n;
  }
  return out;
}

std::vector<double> row_norms(const Matrix& m) {
  std::vector<double> n(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) n[i] = norm2(m.row(i));
  return n;
}

}  // namespace

Matrix critic_score_matrix(const CriticKind& kind, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw Error("shape_mismatch", "critic_score_matrix: dimension mismatch");
  switch (kind.tag) {
    case CriticTag::kDot:
      return matmul_nt(a, b);
    case CriticTag::kL2Half: {
      Matrix s = matmul_nt(a, b);
      std::vector<double> na(a.rows()), nb(b.rows());
      for (std::size_t i = 0; i < a.rows(); ++i) na[i] = 0.5 * dot(a.row(i), a.row(i));
      for (std::size_t j = 0; j < b.rows(); ++j) nb[j] = 0.5 * dot(b.row(j), b.row(j));
      for (std::size_t i = 0; i < s.rows(); ++i) {
        double* r = s.data() + i * s.cols();
        for (std::size_t j = 0; j < s.cols(); ++j) r[j] -= na[i] + nb[j];
      }
      return s;
    }
    case CriticTag::kCosine: {
      Matrix s = matmul_nt(normalized_rows(a), normalized_rows(b));
      const double inv_tau = 1.0 / kind.temperature;
      for (std::size_t i = 0; i < s.size(); ++i) s.data()[i] *= inv_tau;
      return s;
    }
  }
  throw Error("bad_argument", "critic_score_matrix: unknown critic");
}

InfoNceResult infonce_loss_and_grad(const CriticKind& kind, const Matrix& repr_a,
                                    const Matrix& repr_b) {
  const std::size_t n = repr_a.rows();
  if (n < 2) throw Error("insufficient_negatives", "infonce: batch must have N >= 2");
  if (repr_b.rows() != n)
    throw Error("shape_mismatch", "infonce: batch sizes differ");

  const Matrix scores = critic_score_matrix(kind, repr_a, repr_b);

  // Row and column softmaxes, max-shifted.
  Matrix grad_scores(n, n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = scores.row(i);
    const double lse = log_sum_exp(row);
    loss += lse - scores(i, i);
    double* g = grad_scores.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) g[j] = std::exp(row[j] - lse);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = scores(i, j);
    const double lse = log_sum_exp(col);
    loss += lse - scores(j, j);
    for (std::size_t i = 0; i < n; ++i)
      grad_scores(i, j) += std::exp(col[i] - lse);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  loss *= inv_n;
  for (std::size_t i = 0; i < n; ++i) grad_scores(i, i) -= 2.0;
  for (std::size_t i = 0; i < grad_scores.size(); ++i) grad_scores.data()[i] *= inv_n;

  InfoNceResult out;
  out.loss = loss;
  const Matrix& g = grad_scores;
  switch (kind.tag) {
    case CriticTag::kDot: {
      out.grad_a = matmul(g, repr_b);
      out.grad_b = matmul_tn(g, repr_a);
      break;
    }
    case CriticTag::kL2Half: {
      // dS_ij/da_i = b_j - a_i ; dS_ij/db_j = a_i - b_j
      out.grad_a = matmul(g, repr_b);
      out.grad_b = matmul_tn(g, repr_a);
      std::vector<double> row_sum(n, 0.0), col_sum(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          row_sum[i] += g(i, j);
          col_sum[j] += g(i, j);
        }
      for (std::size_t i = 0; i < n; ++i) {
        double* r = out.grad_a.data() + i * out.grad_a.cols();
        const auto a = repr_a.row(i);
        for (std::size_t j = 0; j < out.grad_a.cols(); ++j) r[j] -= row_sum[i] * a[j];
      }
      for (std::size_t j = 0; j < n; ++j) {
        double* r = out.grad_b.data() + j * out.grad_b.cols();
        const auto b = repr_b.row(j);
        for (std::size_t k = 0; k < out.grad_b.cols(); ++k) r[k] -= col_sum[j] * b[k];
      }
      break;
    }
    case CriticTag::kCosine: {
      const Matrix ah = normalized_rows(repr_a);
      const Matrix bh = normalized_rows(repr_b);
      const std::vector<double> na = row_norms(repr_a);
      const std::vector<double> nb = row_norms(repr_b);
      const Matrix cos_ab = matmul_nt(ah, bh);
      out.grad_a = matmul(g, bh);
      out.grad_b = matmul_tn(g, ah);
      std::vector<double> row_proj(n, 0.0), col_proj(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          row_proj[i] += g(i, j) * cos_ab(i, j);
          col_proj[j] += g(i, j) * cos_ab(i, j);
        }
      for (std::size_t i = 0; i < n; ++i) {
        const double scale = 1.0 / (kind.temperature * na[i]);
        double* r = out.grad_a.data() + i * out.grad_a.cols();
        const auto arow = ah.row(i);
        for (std::size_t j = 0; j < out.grad_a.cols(); ++j)
          r[j] = scale * (r[j] - row_proj[i] * arow[j]);
      }
      for (std::size_t j = 0; j < n; ++j) {
        const double scale = 1.0 / (kind.temperature * nb[j]);
        double* r = out.grad_b.data() + j * out.grad_b.cols();
        const auto brow = bh.row(j);
        for (std::size_t k = 0; k < out.grad_b.cols(); ++k)
          r[k] = scale * (r[k] - col_proj[j] * brow[k]);
      }
      break;
    }
  }
  return out;
}

double infonce_loss(const CriticKind& kind, const Matrix& repr_a, const Matrix& repr_b) {
  const std::size_t n = repr_a.rows();
  if (n < 2) throw Error("insufficient_negatives", "infonce: batch must have N >= 2");
  if (repr_b.rows() != n) throw Error("shape_mismatch", "infonce: batch sizes differ");
  const Matrix scores = critic_score_matrix(kind, repr_a, repr_b);
  double loss = 0.0;
  std::vector<double> col(n);
  for (std::size_t i = 0; i < n; ++i) {
    loss += log_sum_exp(scores.row(i)) - scores(i, i);
    for (std::size_t j = 0; j < n; ++j) col[j] = scores(j, i);
    loss += log_sum_exp(col) - scores(i, i);
  }
  return loss / static_cast<double>(n);
}

namespace {

struct PairTrainer {
  EncoderNet* enc_a;
  EncoderNet* enc_b;
  AdamState adam_a;
  AdamState adam_b;
  CriticKind critic;

  double step(const Matrix& batch_a, const Matrix& batch_b) {
    ForwardCache cache_a, cache_b;
    const Matrix ra = forward(*enc_a, batch_a, cache_a);
    const Matrix rb = forward(*enc_b, batch_b, cache_b);
    InfoNceResult r = infonce_loss_and_grad(critic, ra, rb);
    if (!std::isfinite(r.loss))
      throw Error("non_finite_loss", "training aborted: non-finite loss");
    const Gradients ga = backward(*enc_a, cache_a, r.grad_a);
    const Gradients gb = backward(*enc_b, cache_b, r.grad_b);
    adam_step(*enc_a, ga, adam_a);
    adam_step(*enc_b, gb, adam_b);
    return r.loss;
  }
};

std::vector<std::size_t> encoder_sizes(std::size_t input, const TrainConfig& cfg) {
  std::vector<std::size_t> sizes;
  sizes.push_back(input);
  for (std::size_t h : cfg.hidden) sizes.push_back(h);
  sizes.push_back(cfg.latent_dim);
  return sizes;
}

// Batches of config.batch_size over a shuffled index set; a trailing batch
// smaller than 2 is dropped (InfoNCE needs in-batch negatives).
std::vector<std::vector<std::size_t>> make_batches(Rng& rng, std::size_t n,
                                                   std::size_t batch_size) {
  std::vector<std::size_t> idx = iota_indices(n);
  shuffle_indices(rng, idx);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    if (end - start < 2) break;
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

double validation_loss_or_nan(const CriticKind& critic, const EncoderNet& a,
                              const EncoderNet& b, const PairDataset& val) {
  if (val.size() < 2) return std::nan("");
  return infonce_loss(critic, forward(a, val.left), forward(b, val.right));
}

}  // namespace

TrainResult train_pair(const TrainConfig& config, const PairDataset& train,
                       const PairDataset& validation, const PairEpochObserver& observer) {
  if (train.size() == 0) throw Error("bad_argument", "train_pair: empty dataset");
  if (train.left.rows() != train.right.rows())
    throw Error("shape_mismatch", "train_pair: misaligned pair dataset");
  if (config.batch_size < 2)
    throw Error("bad_argument", "train_pair: batch size must be >= 2");

  Rng root(config.seed);
  Rng init_a = root.substream("init-a");
  Rng init_b = root.substream("init-b");
  const OutputMode mode = output_mode_for(config.critic);

  TrainResult result;
  result.encoder_a = make_encoder(init_a, encoder_sizes(train.left.cols(), config),
                                  config.activation, mode);
  result.encoder_b = make_encoder(init_b, encoder_sizes(train.right.cols(), config),
                                  config.activation, mode);

  PairTrainer trainer{&result.encoder_a, &result.encoder_b,
                      make_adam_state(result.encoder_a, config.learning_rate),
                      make_adam_state(result.encoder_b, config.learning_rate),
                      config.critic};

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng = root.substream("shuffle", epoch);
    double loss_sum = 0.0;
    std::size_t sample_count = 0;
    for (const auto& batch : make_batches(shuffle_rng, train.size(), config.batch_size)) {
      const Matrix ba = gather_rows(train.left, batch);
      const Matrix bb = gather_rows(train.right, batch);
      loss_sum += trainer.step(ba, bb) * static_cast<double>(batch.size());
      sample_count += batch.size();
    }
    LossRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(sample_count);
    rec.validation_loss = validation_loss_or_nan(config.critic, result.encoder_a,
                                                 result.encoder_b, validation);
    result.history.push_back(rec);
    if (observer) observer(epoch, result.encoder_a, result.encoder_b);
  }
  return result;
}

BridgedTrainResult train_bridged(const TrainConfig& config_ab,
                                 const TrainConfig& config_bc,
                                 const PairDataset& train_ab,
                                 const PairDataset& train_bc,
                                 const PairDataset& val_ab,
                                 const PairDataset& val_bc,
                                 const BridgedEpochObserver& observer) {
  if (train_ab.size() == 0 || train_bc.size() == 0)
    throw Error("bad_argument", "train_bridged: empty dataset");
  if (train_ab.right.cols() != train_bc.left.cols())
    throw Error("shape_mismatch", "train_bridged: B modality dims differ");
  if (config_ab.epochs != config_bc.epochs)
    throw Error("bad_argument", "train_bridged: epoch counts must match");

  Rng root(config_ab.seed);
  Rng init_a = root.substream("init-a");
  Rng init_b = root.substream("init-b");
  Rng init_c = root.substream("init-c");

  BridgedTrainResult result;
  result.encoder_a =
      make_encoder(init_a, encoder_sizes(train_ab.left.cols(), config_ab),
                   config_ab.activation, output_mode_for(config_ab.critic));
  result.encoder_b =
      make_encoder(init_b, encoder_sizes(train_ab.right.cols(), config_ab),
                   config_ab.activation, output_mode_for(config_ab.critic));
  result.encoder_c =
      make_encoder(init_c, encoder_sizes(train_bc.right.cols(), config_bc),
                   config_bc.activation, output_mode_for(config_bc.critic));

  PairTrainer trainer_ab{&result.encoder_a, &result.encoder_b,
                         make_adam_state(result.encoder_a, config_ab.learning_rate),
                         make_adam_state(result.encoder_b, config_ab.learning_rate),
                         config_ab.critic};
  PairTrainer trainer_bc{&result.encoder_b, &result.encoder_c,
                         make_adam_state(result.encoder_b, config_bc.learning_rate),
                         make_adam_state(result.encoder_c, config_bc.learning_rate),
                         config_bc.critic};

  for (std::size_t epoch = 0; epoch < config_ab.epochs; ++epoch) {
    Rng shuffle_ab = root.substream("shuffle-ab", epoch);
    Rng shuffle_bc = root.substream("shuffle-bc", epoch);
    const auto batches_ab =
        make_batches(shuffle_ab, train_ab.size(), config_ab.batch_size);
    const auto batches_bc =
        make_batches(shuffle_bc, train_bc.size(), config_bc.batch_size);
    double loss_ab = 0.0, loss_bc = 0.0;
    std::size_t count_ab = 0, count_bc = 0;
    const std::size_t steps = std::max(batches_ab.size(), batches_bc.size());
    for (std::size_t s = 0; s < steps; ++s) {
      if (s < batches_ab.size()) {
        const auto& batch = batches_ab[s];
        loss_ab += trainer_ab.step(gather_rows(train_ab.left, batch),
                                   gather_rows(train_ab.right, batch)) *
                   static_cast<double>(batch.size());
        count_ab += batch.size();
      }
      if (s < batches_bc.size()) {
        const auto& batch = batches_bc[s];
        loss_bc += trainer_bc.step(gather_rows(train_bc.left, batch),
                                   gather_rows(train_bc.right, batch)) *
                   static_cast<double>(batch.size());
        count_bc += batch.size();
      }
    }
    LossRecord rec_ab{epoch, loss_ab / static_cast<double>(count_ab),
                      validation_loss_or_nan(config_ab.critic, result.encoder_a,
                                             result.encoder_b, val_ab)};
    LossRecord rec_bc{epoch, loss_bc / static_cast<double>(count_bc),
                      validation_loss_or_nan(config_bc.critic, result.encoder_b,
                                             result.encoder_c, val_bc)};
    result.history_ab.push_back(rec_ab);
    result.history_bc.push_back(rec_bc);
    if (observer)
      observer(epoch, result.encoder_a, result.encoder_b, result.encoder_c);
  }
  return result;
}

}  // namespace mcb
