#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mcb/dataset.hpp"
#include "mcb/encoder.hpp"
#include "mcb/matrix.hpp"
#include "mcb/rng.hpp"

namespace mcb {

enum class CriticTag { kL2Half, kDot, kCosine };

// Similarity function over representations: -1/2 |x-y|^2, x.y, or
// x.y / (tau |x| |y|).
struct CriticKind {
  CriticTag tag = CriticTag::kL2Half;
  double temperature = 1.0;  // Cosine only
};

CriticKind l2_critic();
CriticKind dot_critic();
CriticKind cosine_critic(double temperature = 1.0);

double critic_score(const CriticKind& kind, std::span<const double> x,
                    std::span<const double> y);

// All-pairs scores: out(i, j) = f(a_i, b_j).
Matrix critic_score_matrix(const CriticKind& kind, const Matrix& a, const Matrix& b);

struct InfoNceResult {
  double loss = 0.0;
  Matrix grad_a;
  Matrix grad_b;
};

// Symmetrized in-batch InfoNCE over aligned rows: cross-entropy of the
// diagonal against row-wise and column-wise softmaxes of the score matrix,
// averaged over the batch. Gradients are exact.
InfoNceResult infonce_loss_and_grad(const CriticKind& kind, const Matrix& repr_a,
                                    const Matrix& repr_b);

// Loss only (validation paths).
double infonce_loss(const CriticKind& kind, const Matrix& repr_a, const Matrix& repr_b);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  CriticKind critic;
  std::size_t latent_dim = 8;
  std::vector<std::size_t> hidden = {128, 128};
  Activation activation = Activation::kRelu;
};

// Unit-normalized outputs for the cosine critic, raw otherwise.
OutputMode output_mode_for(const CriticKind& kind);

struct LossRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainResult {
  EncoderNet encoder_a;
  EncoderNet encoder_b;
  std::vector<LossRecord> history;
};

// Called after every epoch with the current encoders.
using PairEpochObserver =
    std::function<void(std::size_t epoch, const EncoderNet& a, const EncoderNet& b)>;
using BridgedEpochObserver =
    std::function<void(std::size_t epoch, const EncoderNet& a, const EncoderNet& b,
                       const EncoderNet& c)>;

// Jointly fits one encoder pair on aligned data. Deterministic given the
// config seed. Aborts with "non_finite_loss" if the loss diverges.
TrainResult train_pair(const TrainConfig& config, const PairDataset& train,
                       const PairDataset& validation,
                       const PairEpochObserver& observer = {});

struct BridgedTrainResult {
  EncoderNet encoder_a;
  EncoderNet encoder_b;  // shared between both objectives
  EncoderNet encoder_c;
  std::vector<LossRecord> history_ab;
  std::vector<LossRecord> history_bc;
};

// Fits encoders for A<->B and B<->C with a shared B encoder, alternating
// batches between the two objectives each epoch.
BridgedTrainResult train_bridged(const TrainConfig& config_ab,
                                 const TrainConfig& config_bc,
                                 const PairDataset& train_ab,
                                 const PairDataset& train_bc,
                                 const PairDataset& val_ab,
                                 const PairDataset& val_bc,
                                 const BridgedEpochObserver& observer = {});

}  // namespace mcb
