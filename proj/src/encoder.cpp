#include "mcb/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mcb/embed_io.hpp"
#include "mcb/errors.hpp"

namespace mcb {

namespace {

constexpr char kMagic[4] = {'U', 'C', 'L', 'N'};
constexpr std::uint32_t kVersion = 1;
constexpr double kNormFloor = 1e-8;

void apply_activation(Activation act, Matrix& m) {
  double* p = m.data();
  if (act == Activation::kRelu) {
    for (std::size_t i = 0; i < m.size(); ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
  } else {
    for (std::size_t i = 0; i < m.size(); ++i) p[i] = std::tanh(p[i]);
  }
}

void add_bias_rows(Matrix& m, const std::vector<double>& bias) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* r = m.data() + i * m.cols();
    for (std::size_t j = 0; j < m.cols(); ++j) r[j] += bias[j];
  }
}

}  // namespace

EncoderNet make_encoder(Rng& rng, std::vector<std::size_t> layer_sizes,
                        Activation activation, OutputMode output_mode) {
  if (layer_sizes.size() < 2)
    throw Error("bad_argument", "make_encoder: need at least input and output sizes");
  EncoderNet net;
  net.layer_sizes = std::move(layer_sizes);
  net.activation = activation;
  net.output_mode = output_mode;
  for (std::size_t k = 0; k + 1 < net.layer_sizes.size(); ++k) {
    const std::size_t fan_in = net.layer_sizes[k];
    const std::size_t fan_out = net.layer_sizes[k + 1];
    Matrix w(fan_in, fan_out);
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = sd * rng.next_gaussian();
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

Matrix forward(const EncoderNet& net, const Matrix& batch) {
  ForwardCache cache;
  return forward(net, batch, cache);
}

Matrix forward(const EncoderNet& net, const Matrix& batch, ForwardCache& cache) {
  if (batch.cols() != net.input_dim())
    throw Error("shape_mismatch", "forward: batch width != encoder input size");
  cache.activations.clear();
  cache.activations.push_back(batch);
  const std::size_t layers = net.layer_count();
  for (std::size_t k = 0; k < layers; ++k) {
    Matrix z = matmul(cache.activations.back(), net.weights[k]);
    add_bias_rows(z, net.biases[k]);
    if (k + 1 < layers) {
      apply_activation(net.activation, z);
      cache.activations.push_back(std::move(z));
    } else if (net.output_mode == OutputMode::kRaw) {
      cache.activations.push_back(std::move(z));
    } else {
      cache.pre_norm = z;
      cache.pre_norm_norms.assign(z.rows(), 0.0);
      for (std::size_t i = 0; i < z.rows(); ++i) {
        const double n = norm2(z.row(i));
        if (n < kNormFloor)
          throw Error("normalization_underflow",
                      "forward: pre-normalization norm below 1e-8");
        cache.pre_norm_norms[i] = n;
        double* r = z.data() + i * z.cols();
        for (std::size_t j = 0; j < z.cols(); ++j) r[j] /= n;
      }
      cache.activations.push_back(std::move(z));
    }
  }
  return cache.activations.back();
}

Gradients zero_gradients(const EncoderNet& net) {
  Gradients g;
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    g.weights.emplace_back(net.weights[k].rows(), net.weights[k].cols());
    g.biases.emplace_back(net.biases[k].size(), 0.0);
  }
  return g;
}

Gradients backward(const EncoderNet& net, const Matrix& batch,
                   const Matrix& upstream) {
  ForwardCache cache;
  forward(net, batch, cache);
  return backward(net, cache, upstream);
}

Gradients backward(const EncoderNet& net, const ForwardCache& cache,
                   const Matrix& upstream) {
  const std::size_t layers = net.layer_count();
  const Matrix& output = cache.activations.back();
  if (upstream.rows() != output.rows() || upstream.cols() != output.cols())
    throw Error("shape_mismatch", "backward: upstream shape != output shape");

  Matrix gz = upstream;
  if (net.output_mode == OutputMode::kUnitNorm) {
    // y = z / |z|;  dL/dz = (dL/dy - (dL/dy . y) y) / |z|
    for (std::size_t i = 0; i < gz.rows(); ++i) {
      const auto y = output.row(i);
      double* g = gz.data() + i * gz.cols();
      double proj = 0.0;
      for (std::size_t j = 0; j < gz.cols(); ++j) proj += g[j] * y[j];
      const double inv = 1.0 / cache.pre_norm_norms[i];
      for (std::size_t j = 0; j < gz.cols(); ++j) g[j] = (g[j] - proj * y[j]) * inv;
    }
  }

  Gradients grads = zero_gradients(net);
  for (std::size_t k = layers; k-- > 0;) {
    const Matrix& input = cache.activations[k];
    grads.weights[k] = matmul_tn(input, gz);
    for (std::size_t i = 0; i < gz.rows(); ++i) {
      const double* r = gz.data() + i * gz.cols();
      for (std::size_t j = 0; j < gz.cols(); ++j) grads.biases[k][j] += r[j];
    }
    if (k == 0) break;
    Matrix gprev = matmul_nt(gz, net.weights[k]);
    // input is the post-activation output of layer k-1.
    if (net.activation == Activation::kRelu) {
      for (std::size_t i = 0; i < gprev.size(); ++i)
        if (input.data()[i] <= 0.0) gprev.data()[i] = 0.0;
    } else {
      for (std::size_t i = 0; i < gprev.size(); ++i) {
        const double h = input.data()[i];
        gprev.data()[i] *= (1.0 - h * h);
      }
    }
    gz = std::move(gprev);
  }
  return grads;
}

void accumulate(Gradients& into, const Gradients& from) {
  for (std::size_t k = 0; k < into.weights.size(); ++k) {
    for (std::size_t i = 0; i < into.weights[k].size(); ++i)
      into.weights[k].data()[i] += from.weights[k].data()[i];
    for (std::size_t j = 0; j < into.biases[k].size(); ++j)
      into.biases[k][j] += from.biases[k][j];
  }
}

AdamState make_adam_state(const EncoderNet& net, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.first_moment = zero_gradients(net);
  s.second_moment = zero_gradients(net);
  return s;
}

namespace {

void adam_update_array(double* p, const double* g, double* m, double* v,
                       std::size_t n, const AdamState& s, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(g[i]))
      throw Error("non_finite_gradient", "adam_step: non-finite gradient");
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
  }
}

}  // namespace

void adam_step(EncoderNet& net, const Gradients& grads, AdamState& state) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    adam_update_array(net.weights[k].data(), grads.weights[k].data(),
                      state.first_moment.weights[k].data(),
                      state.second_moment.weights[k].data(), net.weights[k].size(),
                      state, bc1, bc2);
    adam_update_array(net.biases[k].data(), grads.biases[k].data(),
                      state.first_moment.biases[k].data(),
                      state.second_moment.biases[k].data(), net.biases[k].size(),
                      state, bc1, bc2);
  }
}

void save_encoder(std::ostream& out, const EncoderNet& net) {
  out.write(kMagic, 4);
  const std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.put(net.activation == Activation::kRelu ? 0 : 1);
  out.put(net.output_mode == OutputMode::kRaw ? 0 : 1);
  const std::uint32_t layers = static_cast<std::uint32_t>(net.layer_count());
  out.write(reinterpret_cast<const char*>(&layers), 4);
  for (std::size_t s : net.layer_sizes) {
    const std::uint32_t v = static_cast<std::uint32_t>(s);
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    write_container(out, net.weights[k], "w" + std::to_string(k), kDtypeF64);
    Matrix b(1, net.biases[k].size());
    std::memcpy(b.data(), net.biases[k].data(), net.biases[k].size() * sizeof(double));
    write_container(out, b, "b" + std::to_string(k), kDtypeF64);
  }
  if (!out) throw Error("io_error", "save_encoder: write failed");
}

EncoderNet load_encoder(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("bad_magic", "load_encoder: bad magic");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != kVersion) throw Error("bad_version", "load_encoder: unsupported version");
  EncoderNet net;
  net.activation = in.get() == 0 ? Activation::kRelu : Activation::kTanh;
  net.output_mode = in.get() == 0 ? OutputMode::kRaw : OutputMode::kUnitNorm;
  std::uint32_t layers = 0;
  in.read(reinterpret_cast<char*>(&layers), 4);
  if (!in || layers == 0 || layers > 64)
    throw Error("bad_header", "load_encoder: implausible layer count");
  net.layer_sizes.resize(layers + 1);
  for (auto& s : net.layer_sizes) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    s = v;
  }
  if (!in) throw Error("bad_header", "load_encoder: truncated layer sizes");
  for (std::uint32_t k = 0; k < layers; ++k) {
    EmbeddingContainer w = read_container(in);
    EmbeddingContainer b = read_container(in);
    if (w.values.rows() != net.layer_sizes[k] ||
        w.values.cols() != net.layer_sizes[k + 1] ||
        b.values.size() != net.layer_sizes[k + 1])
      throw Error("bad_header", "load_encoder: parameter shape mismatch");
    net.weights.push_back(std::move(w.values));
    net.biases.emplace_back(b.values.data(), b.values.data() + b.values.size());
  }
  return net;
}

void save_encoder_file(const std::string& path, const EncoderNet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot open for write: " + path);
  save_encoder(out, net);
}

EncoderNet load_encoder_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open for read: " + path);
  return load_encoder(in);
}

}  // namespace mcb
