#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mcb/contrastive.hpp"
#include "mcb/matrix.hpp"
#include "mcb/rng.hpp"

namespace mcb {

// Binary container for one embedding matrix.
//
// Layout (all integers little-endian):
//   magic   "UCLB" (4 bytes)
//   version u32 = 1
//   rows    u32
//   dim     u32
//   dtype   u8   (1 = 32-bit float, the interchange format; 2 = 64-bit
//                 float, used internally for parameter checkpoints)
//   name    u32 length + UTF-8 bytes
//   payload rows x dim values, row-major
struct EmbeddingContainer {
  std::uint32_t version = 1;
  std::uint8_t dtype = 1;
  std::string name;
  Matrix values;  // promoted to double regardless of payload dtype
};

inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::uint8_t kDtypeF64 = 2;

// Refuses non-finite values ("non_finite_values"). dtype 1 narrows to f32.
void write_container(std::ostream& out, const Matrix& values,
                     std::string_view name, std::uint8_t dtype = kDtypeF32);

// Validates magic, version, dtype, and payload length; throws Error with
// codes "bad_magic", "bad_version", "bad_dtype", "bad_header",
// "payload_length_mismatch".
EmbeddingContainer read_container(std::istream& in);

void write_container_file(const std::string& path, const Matrix& values,
                          std::string_view name, std::uint8_t dtype = kDtypeF32);
EmbeddingContainer read_container_file(const std::string& path);

// Convenience text path: header line "dim=<d>", then one comma-separated
// embedding per line.
Matrix read_csv_embeddings(std::istream& in);

// Two containers with row i paired across modalities, e.g. one pretrained
// model's encodings of aligned (a_i, b_i) items. The right container of an
// A<->B bank and the left container of a B<->C bank must encode the same
// ordered list of B items; container names carry that identity.
struct AlignedBank {
  EmbeddingContainer left;
  EmbeddingContainer right;
  std::string provenance;
};

void validate_aligned(const AlignedBank& bank);

struct ExternalBridgeReport {
  double recall = 0.0;
  std::size_t k = 1;
  std::size_t candidate_set_size = 32;
  std::size_t queries = 0;
  std::size_t bank_rows = 0;
};

// Monte Carlo retrieval across two models that share modality B: scores are
// logsumexp_i [f1(q, phi_B1_i) + f2(phi_B2_i, c)] - log N over the shared B
// item list (ab.right and bc.left). Query i's true match is pool row i. No
// (A, C) co-occurrence is ever read. Throws "bank_mismatch" when the B item
// lists differ in length or name.
ExternalBridgeReport bridge_external(const CriticKind& f1,
                                     const CriticKind& f2,
                                     const AlignedBank& ab, const AlignedBank& bc,
                                     const Matrix& queries, const Matrix& pool,
                                     std::size_t k, std::size_t candidate_m,
                                     Rng& rng);

struct ScalingPoint {
  std::size_t bank_rows = 0;
  double mean_recall = 0.0;
  double ci_half_width = 0.0;  // 95% normal-approximation half-width
  std::size_t trials = 0;
};

// Recall versus Monte Carlo bank size: each trial subsamples M shared bank
// rows and re-evaluates retrieval on trial-paired candidate sets.
std::vector<ScalingPoint> scaling_sweep(const CriticKind& f1,
                                        const CriticKind& f2,
                                        const AlignedBank& ab,
                                        const AlignedBank& bc,
                                        const Matrix& queries, const Matrix& pool,
                                        const std::vector<std::size_t>& bank_sizes,
                                        std::size_t trials, std::size_t k,
                                        std::size_t candidate_m, Rng& rng);

}  // namespace mcb
