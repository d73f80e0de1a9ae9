#include "mcb/bridge.hpp"

#include <cmath>

#include "mcb/errors.hpp"
#include "mcb/special.hpp"

namespace mcb {

double direct_score(const CriticKind& critic, std::span<const double> phi_a,
                    std::span<const double> phi_c) {
  return critic_score(critic, phi_a, phi_c);
}

double mc_lse_log_ratio(const PhiBank& bank, std::span<const double> phi_a,
                        std::span<const double> phi_c) {
  const std::size_t n = bank.phi.rows();
  if (n == 0) throw Error("empty_bank", "mc_lse: empty bank");
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = bank.phi.row(i);
    terms[i] = critic_score(bank.f1, phi_a, b) + critic_score(bank.f2, b, phi_c);
  }
  return log_sum_exp(terms) - std::log(static_cast<double>(n));
}

std::vector<double> mc_lse_log_ratio_batch(const PhiBank& bank,
                                           std::span<const double> phi_a,
                                           const Matrix& phi_cs) {
  const std::size_t n = bank.phi.rows();
  if (n == 0) throw Error("empty_bank", "mc_lse: empty bank");
  std::vector<double> s1(n);
  for (std::size_t i = 0; i < n; ++i)
    s1[i] = critic_score(bank.f1, phi_a, bank.phi.row(i));
  std::vector<double> out(phi_cs.rows());
  std::vector<double> terms(n);
  for (std::size_t c = 0; c < phi_cs.rows(); ++c) {
    const auto pc = phi_cs.row(c);
    for (std::size_t i = 0; i < n; ++i)
      terms[i] = s1[i] + critic_score(bank.f2, bank.phi.row(i), pc);
    out[c] = log_sum_exp(terms) - std::log(static_cast<double>(n));
  }
  return out;
}

namespace {

// lse_i(S1[q,i] + S2[i,c]) = rshift[q] + cshift[c] + log((E1 E2)[q,c]) with
// E1 = exp(S1 - rowmax), E2 = exp(S2 - colmax). Exact up to rounding; the
// shifted exponentials are <= 1 so the product cannot overflow.
Matrix lse_product(Matrix s1, Matrix s2, double log_n) {
  std::vector<double> rshift(s1.rows());
  for (std::size_t q = 0; q < s1.rows(); ++q) {
    const auto row = s1.row(q);
    double m = row[0];
    for (double v : row) m = std::max(m, v);
    rshift[q] = m;
    double* r = s1.data() + q * s1.cols();
    for (std::size_t i = 0; i < s1.cols(); ++i) r[i] = std::exp(r[i] - m);
  }
  std::vector<double> cshift(s2.cols(), -1e300);
  for (std::size_t i = 0; i < s2.rows(); ++i) {
    const double* r = s2.data() + i * s2.cols();
    for (std::size_t c = 0; c < s2.cols(); ++c) cshift[c] = std::max(cshift[c], r[c]);
  }
  for (std::size_t i = 0; i < s2.rows(); ++i) {
    double* r = s2.data() + i * s2.cols();
    for (std::size_t c = 0; c < s2.cols(); ++c) r[c] = std::exp(r[c] - cshift[c]);
  }
  Matrix scores = matmul(s1, s2);
  for (std::size_t q = 0; q < scores.rows(); ++q) {
    double* r = scores.data() + q * scores.cols();
    for (std::size_t c = 0; c < scores.cols(); ++c)
      r[c] = rshift[q] + cshift[c] + std::log(r[c]) - log_n;
  }
  return scores;
}

}  // namespace

Matrix mc_lse_score_matrix(const PhiBank& bank, const Matrix& phi_as,
                           const Matrix& phi_cs) {
  return mc_lse_score_matrix_dual(bank.phi, bank.phi, bank.f1, bank.f2, phi_as,
                                  phi_cs);
}

Matrix mc_lse_score_matrix_dual(const Matrix& phi_b1, const Matrix& phi_b2,
                                const CriticKind& f1, const CriticKind& f2,
                                const Matrix& phi_as, const Matrix& phi_cs) {
  if (phi_b1.rows() == 0) throw Error("empty_bank", "mc_lse: empty bank");
  if (phi_b1.rows() != phi_b2.rows())
    throw Error("bank_mismatch", "mc_lse: banks index different B item lists");
  Matrix s1 = critic_score_matrix(f1, phi_as, phi_b1);   // queries x bank
  Matrix s2 = critic_score_matrix(f2, phi_b2, phi_cs);   // bank x candidates
  return lse_product(std::move(s1), std::move(s2),
                     std::log(static_cast<double>(phi_b1.rows())));
}

double sphere_law_log_g(std::size_t dim, double inner) {
  if (dim < 2) throw Error("bad_argument", "sphere law: dimension must be >= 2");
  if (inner < -1.0 - 1e-9 || inner > 1.0 + 1e-9)
    throw Error("bad_argument", "sphere law: inner product outside [-1, 1]");
  const double kappa = std::sqrt(std::max(0.0, 2.0 + 2.0 * inner));
  return -log_sphere_area(dim) - vmf_log_norm(dim, kappa);
}

double sphere_law_log_ratio(std::size_t dim, std::span<const double> phi_a,
                            std::span<const double> phi_c) {
  if (phi_a.size() != dim || phi_c.size() != dim)
    throw Error("shape_mismatch", "sphere law: representation dim mismatch");
  constexpr double kTol = 1e-6;
  if (std::abs(norm2(phi_a) - 1.0) > kTol || std::abs(norm2(phi_c) - 1.0) > kTol)
    throw Error("not_unit_norm", "sphere law: inputs must be unit vectors");
  return sphere_law_log_g(dim, dot(phi_a, phi_c));
}

double gaussian_law_gamma(double scale_c) {
  if (!(scale_c > 0.0)) throw Error("bad_argument", "gaussian law: scale must be > 0");
  return (scale_c + 1.0) / (4.0 * scale_c + 2.0);
}

double gaussian_law_delta(double scale_c) {
  if (!(scale_c > 0.0)) throw Error("bad_argument", "gaussian law: scale must be > 0");
  return 2.0 / (scale_c + 1.0);
}

double gaussian_law_log_ratio(double scale_c, std::span<const double> phi_a,
                              std::span<const double> phi_c) {
  if (phi_a.size() != phi_c.size())
    throw Error("shape_mismatch", "gaussian law: representation dim mismatch");
  const double gamma = gaussian_law_gamma(scale_c);
  const double delta = gaussian_law_delta(scale_c);
  return -gamma * (squared_distance(phi_a, phi_c) + delta * dot(phi_a, phi_c));
}

double bridge_score(const BridgeEstimator& estimator, std::span<const double> phi_a,
                    std::span<const double> phi_c) {
  return std::visit(
      [&](const auto& e) -> double {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, DirectEstimator>)
          return direct_score(e.critic, phi_a, phi_c);
        else if constexpr (std::is_same_v<T, MonteCarloEstimator>)
          return mc_lse_log_ratio(e.bank, phi_a, phi_c);
        else if constexpr (std::is_same_v<T, SphereLawEstimator>)
          return sphere_law_log_ratio(e.dim, phi_a, phi_c);
        else
          return gaussian_law_log_ratio(e.scale_c, phi_a, phi_c);
      },
      estimator);
}

}  // namespace mcb
