#include <doctest.h>

#include <cmath>

#include "mcb/contrastive.hpp"
#include "mcb/errors.hpp"
#include "mcb/sampling.hpp"
#include "support/oracles.hpp"

using namespace mcb;

TEST_CASE("critic_score basics") {
  std::vector<double> x{1.0, 2.0, -0.5};
  CHECK(critic_score(l2_critic(), x, x) == 0.0);

  std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0};
  CHECK(critic_score(dot_critic(), e1, e2) == 0.0);

  std::vector<double> v{0.3, -0.4, 1.2};
  std::vector<double> nv{-0.3, 0.4, -1.2};
  CHECK(critic_score(cosine_critic(1.0), v, nv) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(critic_score(cosine_critic(0.5), v, v) == doctest::Approx(2.0).epsilon(1e-12));

  std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(critic_score(cosine_critic(1.0), v, zero), Error);
}

TEST_CASE("cosine critic scores stay within [-1/tau, 1/tau]") {
  Rng rng(21);
  const double tau = 0.7;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x(4), y(4);
    for (auto& v : x) v = rng.next_gaussian();
    for (auto& v : y) v = rng.next_gaussian();
    const double s = critic_score(cosine_critic(tau), x, y);
    CHECK(std::abs(s) <= 1.0 / tau + 1e-12);
  }
}

TEST_CASE("critic_score_matrix agrees with per-pair scores") {
  Rng rng(22);
  Matrix a(5, 3), b(7, 3);
  fill_gaussian(rng, a);
  fill_gaussian(rng, b);
  for (const auto& critic : {l2_critic(), dot_critic(), cosine_critic(0.8)}) {
    const Matrix s = critic_score_matrix(critic, a, b);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 7; ++j)
        CHECK(s(i, j) ==
              doctest::Approx(critic_score(critic, a.row(i), b.row(j))).epsilon(1e-11));
  }
}

TEST_CASE("infonce: uniform scores give loss 2 ln N") {
  // Identical rows make every pairwise score equal.
  Matrix a(8, 3, 0.5), b(8, 3, 0.25);
  const double loss = infonce_loss(dot_critic(), a, b);
  CHECK(loss == doctest::Approx(2.0 * std::log(8.0)).epsilon(1e-12));
  const InfoNceResult r = infonce_loss_and_grad(dot_critic(), a, b);
  CHECK(r.loss == doctest::Approx(loss).epsilon(1e-12));
}

TEST_CASE("infonce: dominant diagonal drives the loss to zero") {
  const std::size_t n = 6;
  // Score margin of 50 between diagonal and off-diagonal under dot critic.
  Matrix a(n, n), b(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 1.0;
    b(i, i) = 50.0;
  }
  const double loss = infonce_loss(dot_critic(), a, b);
  CHECK(loss >= 0.0);
  CHECK(loss <= 1e-15);
}

TEST_CASE("infonce: batch below two rejected") {
  Matrix a(1, 3), b(1, 3);
  CHECK_THROWS_WITH_AS(infonce_loss_and_grad(dot_critic(), a, b),
                       "infonce: batch must have N >= 2", Error);
}

TEST_CASE("infonce gradients match finite differences") {
  Rng rng(23);
  for (const auto& critic : {l2_critic(), dot_critic(), cosine_critic(0.9)}) {
    Matrix a(6, 4), b(6, 4);
    Rng data = rng.substream("data", static_cast<std::uint64_t>(critic.tag));
    fill_gaussian(data, a);
    fill_gaussian(data, b);
    const InfoNceResult r = infonce_loss_and_grad(critic, a, b);
    const Matrix fd_a = testing::fd_matrix_grad(
        [&](const Matrix& m) { return infonce_loss(critic, m, b); }, a);
    const Matrix fd_b = testing::fd_matrix_grad(
        [&](const Matrix& m) { return infonce_loss(critic, a, m); }, b);
    CHECK(testing::max_matrix_rel_error(r.grad_a, fd_a) < 1e-4);
    CHECK(testing::max_matrix_rel_error(r.grad_b, fd_b) < 1e-4);
  }
}

TEST_CASE("infonce is permutation equivariant") {
  Rng rng(24);
  Matrix a(9, 5), b(9, 5);
  fill_gaussian(rng, a);
  fill_gaussian(rng, b);
  const double base = infonce_loss(l2_critic(), a, b);
  std::vector<std::size_t> perm = iota_indices(9);
  Rng perm_rng(25);
  shuffle_indices(perm_rng, perm);
  const double permuted =
      infonce_loss(l2_critic(), gather_rows(a, perm), gather_rows(b, perm));
  CHECK(std::abs(base - permuted) <= 1e-12);
}

namespace {

PairDataset linear_pairs(Rng& rng, std::size_t n, std::size_t dim) {
  Matrix left(n, dim);
  fill_gaussian(rng, left);
  Matrix right = left;
  for (std::size_t i = 0; i < right.size(); ++i)
    right.data()[i] += 0.05 * rng.next_gaussian();
  return {std::move(left), std::move(right), Split::kTrain};
}

}  // namespace

TEST_CASE("train_pair: zero epochs returns the seeded initialization") {
  Rng data_rng(26);
  const PairDataset train = linear_pairs(data_rng, 64, 6);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 99;
  cfg.critic = l2_critic();
  cfg.hidden = {16};
  cfg.latent_dim = 4;
  const TrainResult r = train_pair(cfg, train, {});
  CHECK(r.history.empty());

  Rng root(99);
  Rng init_a = root.substream("init-a");
  const EncoderNet expect_a =
      make_encoder(init_a, {6, 16, 4}, cfg.activation, OutputMode::kRaw);
  CHECK(r.encoder_a.weights[0] == expect_a.weights[0]);
}

TEST_CASE("train_pair: identical seeds give identical parameters") {
  Rng data_rng(27);
  const PairDataset train = linear_pairs(data_rng, 128, 5);
  const PairDataset val = linear_pairs(data_rng, 32, 5);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 32;
  cfg.seed = 7;
  cfg.critic = dot_critic();
  cfg.hidden = {12};
  cfg.latent_dim = 4;
  const TrainResult r1 = train_pair(cfg, train, val);
  const TrainResult r2 = train_pair(cfg, train, val);
  for (std::size_t k = 0; k < r1.encoder_a.layer_count(); ++k) {
    CHECK(r1.encoder_a.weights[k] == r2.encoder_a.weights[k]);
    CHECK(r1.encoder_b.weights[k] == r2.encoder_b.weights[k]);
  }
  CHECK(r1.history.size() == 2);
  CHECK(r1.history[1].validation_loss == r2.history[1].validation_loss);
}

TEST_CASE("train_pair: beats the uniform-score baseline on easy data") {
  Rng data_rng(28);
  const PairDataset train = linear_pairs(data_rng, 1024, 8);
  const PairDataset val = linear_pairs(data_rng, 128, 8);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 128;
  cfg.seed = 5;
  cfg.critic = l2_critic();
  cfg.hidden = {32};
  cfg.latent_dim = 6;
  const TrainResult r = train_pair(cfg, train, val);
  const double uniform_loss = 2.0 * std::log(static_cast<double>(val.size()));
  CHECK(r.history.back().validation_loss < uniform_loss - 1.0);
}

TEST_CASE("train_bridged: shared middle encoder trains on both objectives") {
  Rng data_rng(29);
  Matrix b(256, 4);
  fill_gaussian(data_rng, b);
  Matrix a = b;
  Matrix c = b;
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += 0.1 * data_rng.next_gaussian();
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += 0.1 * data_rng.next_gaussian();
  PairDataset ab{a, b, Split::kTrain};
  PairDataset bc{b, c, Split::kTrain};
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 64;
  cfg.seed = 11;
  cfg.critic = l2_critic();
  cfg.hidden = {16};
  cfg.latent_dim = 4;
  std::size_t observed = 0;
  const BridgedTrainResult r = train_bridged(
      cfg, cfg, ab, bc, {}, {},
      [&](std::size_t, const EncoderNet&, const EncoderNet&, const EncoderNet&) {
        ++observed;
      });
  CHECK(observed == 3);
  CHECK(r.history_ab.size() == 3);
  CHECK(r.history_bc.size() == 3);
  // Training reduced both objectives below their initial value.
  CHECK(r.history_ab.back().train_loss < r.history_ab.front().train_loss);
  CHECK(r.history_bc.back().train_loss < r.history_bc.front().train_loss);
}
