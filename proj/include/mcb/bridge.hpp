#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "mcb/contrastive.hpp"
#include "mcb/matrix.hpp"

namespace mcb {

// Precomputed intermediate-modality representations with the critics used
// on each side of the bridge.
struct PhiBank {
  Matrix phi;      // N x d
  CriticKind f1;   // A <-> B side
  CriticKind f2;   // B <-> C side
};

// Scores are log p(C|A)/p(C) up to an additive constant; only relative
// values matter for ranking and argmax, so the constant is never estimated.
double direct_score(const CriticKind& critic, std::span<const double> phi_a,
                    std::span<const double> phi_c);

// logsumexp_i [f1(phi_a, Phi_i) + f2(Phi_i, phi_c)] - log N.
double mc_lse_log_ratio(const PhiBank& bank, std::span<const double> phi_a,
                        std::span<const double> phi_c);

// One phi_a against many phi_c rows, reusing the f1 scores.
std::vector<double> mc_lse_log_ratio_batch(const PhiBank& bank,
                                           std::span<const double> phi_a,
                                           const Matrix& phi_cs);

// All-pairs scores(q, c) for query rows against candidate rows. Same values
// as the per-pair path; implemented as a product of shifted exponentials so
// whole retrieval tables stay cheap.
Matrix mc_lse_score_matrix(const PhiBank& bank, const Matrix& phi_as,
                           const Matrix& phi_cs);

// Variant banks for bridging two independently trained models: f1 runs
// against phi_b1 rows and f2 against phi_b2 rows, where row i of both
// matrices encodes the same underlying B item.
Matrix mc_lse_score_matrix_dual(const Matrix& phi_b1, const Matrix& phi_b2,
                                const CriticKind& f1, const CriticKind& f2,
                                const Matrix& phi_as, const Matrix& phi_cs);

// Closed form for unit representations whose marginal is uniform on
// S^{p-1}: log g(x) with x = phi_a . phi_c, kappa = sqrt(2 + 2x), and
// g = 1 / (Area(S^{p-1}) C_p(kappa)); monotone nondecreasing in x.
double sphere_law_log_ratio(std::size_t dim, std::span<const double> phi_a,
                            std::span<const double> phi_c);

// Same quantity as a function of the inner product alone.
double sphere_law_log_g(std::size_t dim, double inner);

// Closed form for the L2 critic under a N(0, c I) representation marginal:
// -gamma (|phi_a - phi_c|^2 + delta phi_a . phi_c) with
// gamma = (c+1)/(4c+2), delta = 2/(c+1); additive log-constant omitted.
double gaussian_law_log_ratio(double scale_c, std::span<const double> phi_a,
                              std::span<const double> phi_c);

double gaussian_law_gamma(double scale_c);
double gaussian_law_delta(double scale_c);

struct DirectEstimator {
  CriticKind critic;
};
struct MonteCarloEstimator {
  PhiBank bank;
};
struct SphereLawEstimator {
  std::size_t dim = 0;
};
struct GaussianLawEstimator {
  double scale_c = 1.0;
};

using BridgeEstimator = std::variant<DirectEstimator, MonteCarloEstimator,
                                     SphereLawEstimator, GaussianLawEstimator>;

double bridge_score(const BridgeEstimator& estimator, std::span<const double> phi_a,
                    std::span<const double> phi_c);

}  // namespace mcb
