#include "mcb/embed_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include "mcb/bridge.hpp"
#include "mcb/errors.hpp"
#include "mcb/eval.hpp"

namespace mcb {

namespace {

constexpr char kMagic[4] = {'U', 'C', 'L', 'B'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw Error("bad_header", "container: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_container(std::ostream& out, const Matrix& values,
                     std::string_view name, std::uint8_t dtype) {
  if (!values.all_finite())
    throw Error("non_finite_values", "container: refusing to write non-finite values");
  if (dtype != kDtypeF32 && dtype != kDtypeF64)
    throw Error("bad_dtype", "container: unknown dtype tag");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(values.rows()));
  put_u32(out, static_cast<std::uint32_t>(values.cols()));
  out.put(static_cast<char>(dtype));
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  if (dtype == kDtypeF32) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float f = static_cast<float>(values.data()[i]);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &values.data()[i], 8);
      put_u32(out, static_cast<std::uint32_t>(bits));
      put_u32(out, static_cast<std::uint32_t>(bits >> 32));
    }
  }
  if (!out) throw Error("io_error", "container: write failed");
}

EmbeddingContainer read_container(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("bad_magic", "container: bad magic");
  EmbeddingContainer c;
  c.version = get_u32(in);
  if (c.version != kVersion) throw Error("bad_version", "container: unsupported version");
  const std::uint32_t rows = get_u32(in);
  const std::uint32_t dim = get_u32(in);
  const int dtype = in.get();
  if (dtype != kDtypeF32 && dtype != kDtypeF64)
    throw Error("bad_dtype", "container: unknown dtype tag");
  c.dtype = static_cast<std::uint8_t>(dtype);
  const std::uint32_t name_len = get_u32(in);
  if (name_len > (1u << 20)) throw Error("bad_header", "container: name length implausible");
  c.name.resize(name_len);
  in.read(c.name.data(), name_len);
  if (!in) throw Error("bad_header", "container: truncated name");
  c.values = Matrix(rows, dim);
  const std::size_t count = static_cast<std::size_t>(rows) * dim;
  const std::size_t width = (c.dtype == kDtypeF32) ? 4 : 8;
  std::vector<unsigned char> payload(count * width);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size())
    throw Error("payload_length_mismatch", "container: payload length mismatch");
  for (std::size_t i = 0; i < count; ++i) {
    if (c.dtype == kDtypeF32) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = (bits << 8) | payload[i * 4 + b];
      float f;
      std::memcpy(&f, &bits, 4);
      c.values.data()[i] = static_cast<double>(f);
    } else {
      std::uint64_t bits = 0;
      for (int b = 7; b >= 0; --b) bits = (bits << 8) | payload[i * 8 + b];
      std::memcpy(&c.values.data()[i], &bits, 8);
    }
  }
  return c;
}

void write_container_file(const std::string& path, const Matrix& values,
                          std::string_view name, std::uint8_t dtype) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot open for write: " + path);
  write_container(out, values, name, dtype);
}

EmbeddingContainer read_container_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open for read: " + path);
  return read_container(in);
}

void validate_aligned(const AlignedBank& bank) {
  if (bank.left.values.rows() != bank.right.values.rows())
    throw Error("bank_mismatch", "aligned bank: containers differ in row count");
}

namespace {

void require_shared_b_items(const AlignedBank& ab, const AlignedBank& bc) {
  validate_aligned(ab);
  validate_aligned(bc);
  if (ab.right.values.rows() != bc.left.values.rows() ||
      ab.right.name != bc.left.name)
    throw Error("bank_mismatch",
                "banks not indexed over the same B item list");
}

double external_recall(const CriticKind& f1, const CriticKind& f2,
                       const Matrix& phi_b1, const Matrix& phi_b2,
                       const Matrix& queries, const Matrix& pool, std::size_t k,
                       const std::vector<std::vector<std::size_t>>& sets) {
  const Matrix scores = mc_lse_score_matrix_dual(phi_b1, phi_b2, f1, f2, queries, pool);
  std::vector<std::vector<double>> cand_scores(sets.size());
  for (std::size_t q = 0; q < sets.size(); ++q) {
    cand_scores[q].reserve(sets[q].size());
    for (std::size_t c : sets[q]) cand_scores[q].push_back(scores(q, c));
  }
  return retrieval_recall(cand_scores, sets, k);
}

}  // namespace

ExternalBridgeReport bridge_external(const CriticKind& f1, const CriticKind& f2,
                                     const AlignedBank& ab, const AlignedBank& bc,
                                     const Matrix& queries, const Matrix& pool,
                                     std::size_t k, std::size_t candidate_m,
                                     Rng& rng) {
  require_shared_b_items(ab, bc);
  if (queries.rows() > pool.rows())
    throw Error("bad_argument", "bridge_external: more queries than pool rows");
  Rng cand_rng = rng.substream("candidates");
  const auto sets =
      make_candidate_sets(cand_rng, queries.rows(), pool.rows(), candidate_m);
  ExternalBridgeReport report;
  report.k = k;
  report.candidate_set_size = candidate_m;
  report.queries = queries.rows();
  report.bank_rows = ab.right.values.rows();
  report.recall = external_recall(f1, f2, ab.right.values, bc.left.values, queries,
                                  pool, k, sets);
  return report;
}

std::vector<ScalingPoint> scaling_sweep(const CriticKind& f1, const CriticKind& f2,
                                        const AlignedBank& ab, const AlignedBank& bc,
                                        const Matrix& queries, const Matrix& pool,
                                        const std::vector<std::size_t>& bank_sizes,
                                        std::size_t trials, std::size_t k,
                                        std::size_t candidate_m, Rng& rng) {
  require_shared_b_items(ab, bc);
  const std::size_t total = ab.right.values.rows();
  for (std::size_t m : bank_sizes)
    if (m < 1 || m > total)
      throw Error("bad_argument", "scaling_sweep: bank size outside [1, bank rows]");
  if (trials < 1) throw Error("bad_argument", "scaling_sweep: need >= 1 trial");

  std::vector<ScalingPoint> points;
  for (std::size_t mi = 0; mi < bank_sizes.size(); ++mi) {
    const std::size_t m = bank_sizes[mi];
    std::vector<double> recalls(trials);
    for (std::size_t t = 0; t < trials; ++t) {
      // Candidate sets are paired per trial across all M values.
      Rng cand_rng = rng.substream("candidates", t);
      const auto sets =
          make_candidate_sets(cand_rng, queries.rows(), pool.rows(), candidate_m);
      Rng sub_rng = rng.substream("subsample", t * 100003 + mi);
      const auto idx = sample_without_replacement(sub_rng, total, m);
      const Matrix b1 = gather_rows(ab.right.values, idx);
      const Matrix b2 = gather_rows(bc.left.values, idx);
      recalls[t] = external_recall(f1, f2, b1, b2, queries, pool, k, sets);
    }
    const auto [mean, sd] = mean_std(recalls);
    ScalingPoint p;
    p.bank_rows = m;
    p.mean_recall = mean;
    p.trials = trials;
    const double n = static_cast<double>(trials);
    // Sample standard deviation for the normal-approximation CI.
    const double sample_sd = trials > 1 ? sd * std::sqrt(n / (n - 1.0)) : 0.0;
    p.ci_half_width = trials > 1 ? 1.96 * sample_sd / std::sqrt(n) : 0.0;
    points.push_back(p);
  }
  return points;
}

Matrix read_csv_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("dim=", 0) != 0)
    throw Error("bad_header", "csv embeddings: expected header line dim=<d>");
  const std::size_t dim = std::stoul(line.substr(4));
  if (dim == 0) throw Error("bad_header", "csv embeddings: dim must be positive");
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t got = 0;
    while (std::getline(ls, cell, ',')) {
      values.push_back(std::stod(cell));
      ++got;
    }
    if (got != dim)
      throw Error("payload_length_mismatch", "csv embeddings: row width != dim");
    ++rows;
  }
  Matrix m(rows, dim);
  std::memcpy(m.data(), values.data(), values.size() * sizeof(double));
  return m;
}

}  // namespace mcb
