#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcb/matrix.hpp"
#include "mcb/rng.hpp"

namespace mcb {

enum class Activation { kRelu, kTanh };
enum class OutputMode { kRaw, kUnitNorm };

// Small feed-forward encoder. Hidden layers use the configured activation;
// the final layer is linear, optionally followed by row-wise L2
// normalization.
struct EncoderNet {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output
  std::vector<Matrix> weights;           // per layer, shaped [in x out]
  std::vector<std::vector<double>> biases;
  Activation activation = Activation::kRelu;
  OutputMode output_mode = OutputMode::kRaw;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return weights.size(); }
};

// He-style init: weights ~ N(0, 2 / fan_in), biases zero.
EncoderNet make_encoder(Rng& rng, std::vector<std::size_t> layer_sizes,
                        Activation activation, OutputMode output_mode);

struct ForwardCache {
  std::vector<Matrix> activations;     // [0] = input, [k+1] = layer k output
  Matrix pre_norm;                     // final linear output (kUnitNorm only)
  std::vector<double> pre_norm_norms;  // row norms of pre_norm
};

Matrix forward(const EncoderNet& net, const Matrix& batch);
Matrix forward(const EncoderNet& net, const Matrix& batch, ForwardCache& cache);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

Gradients zero_gradients(const EncoderNet& net);

// Parameter gradients given dL/doutput; exact reverse-mode, including the
// normalization Jacobian in kUnitNorm mode.
Gradients backward(const EncoderNet& net, const Matrix& batch,
                   const Matrix& upstream);
Gradients backward(const EncoderNet& net, const ForwardCache& cache,
                   const Matrix& upstream);

// In-place accumulate: into += from.
void accumulate(Gradients& into, const Gradients& from);

struct AdamState {
  std::size_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Gradients first_moment;
  Gradients second_moment;
};

AdamState make_adam_state(const EncoderNet& net, double learning_rate = 1e-3);

// Standard bias-corrected Adam update. Throws "non_finite_gradient" on NaN
// or infinite gradients.
void adam_step(EncoderNet& net, const Gradients& grads, AdamState& state);

// Versioned binary checkpoint built on the embedding container format.
void save_encoder(std::ostream& out, const EncoderNet& net);
EncoderNet load_encoder(std::istream& in);
void save_encoder_file(const std::string& path, const EncoderNet& net);
EncoderNet load_encoder_file(const std::string& path);

}  // namespace mcb
