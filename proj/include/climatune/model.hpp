#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "climatune/corpus.hpp"
#include "climatune/matrix.hpp"
#include "climatune/rng.hpp"

namespace climatune {

/// Layer sizes. The LSTM consumes [pitch embedding, duration embedding].
struct ModelConfig {
  std::size_t pitch_vocab = 0;
  std::size_t duration_vocab = 0;
  std::size_t pitch_embed = 64;
  std::size_t duration_embed = 16;
  std::size_t hidden = 256;
  std::size_t sql = 16;

  std::size_t input_size() const noexcept { return pitch_embed + duration_embed; }
  std::size_t concat_size() const noexcept { return hidden + input_size(); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// All trainable tensors. Gate weights act on the concatenation [h, x];
/// biases are column vectors.
struct ModelParams {
  ModelConfig config;
  Matrix pitch_embedding;     // pitch_vocab x pitch_embed
  Matrix duration_embedding;  // duration_vocab x duration_embed
  Matrix input_gate_w, forget_gate_w, candidate_w, output_gate_w;  // hidden x (hidden + input)
  Matrix input_gate_b, forget_gate_b, candidate_b, output_gate_b;  // hidden x 1
  Matrix attention_w;         // hidden x hidden
  Matrix pitch_head_w;        // pitch_vocab x hidden
  Matrix pitch_head_b;        // pitch_vocab x 1
  Matrix duration_head_w;     // duration_vocab x hidden
  Matrix duration_head_b;     // duration_vocab x 1

  /// Every tensor zero. Also the shape template for gradients.
  static ModelParams zeros(const ModelConfig& config);
  /// uniform(-k, k) with k = 1/sqrt(fan_in); forget-gate bias 1.
  static ModelParams initialize(const ModelConfig& config, Rng& rng);

  using Named = std::pair<std::string_view, Matrix*>;
  using ConstNamed = std::pair<std::string_view, const Matrix*>;
  /// Stable order; names are the checkpoint tensor names.
  std::vector<Named> tensors();
  std::vector<ConstNamed> tensors() const;
  std::size_t parameter_count() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct LstmState {
  std::vector<double> cell;
  std::vector<double> hidden;
};

/// One LSTM update. x must have config.input_size() entries.
LstmState lstm_cell_forward(std::span<const double> x, const LstmState& state, const ModelParams& params);

struct AttentionResult {
  std::vector<double> context;
  std::vector<double> weights;
};

/// Bilinear attention: score_i = hidden_i . (W query), weights = softmax(scores).
AttentionResult attention(const Matrix& hidden_states, std::span<const double> query, const Matrix& weight);

/// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
  std::vector<TokenPair> window;
  Matrix concat;     // sql x (hidden + input): [h_{t-1}, x_t]
  Matrix input_gate, forget_gate, candidate, output_gate;  // sql x hidden, post-activation
  Matrix cell;       // sql x hidden
  Matrix cell_tanh;  // sql x hidden
  Matrix hidden;     // sql x hidden
  std::vector<double> projected_query;  // W_a h_last
  std::vector<double> attention_weights;
  std::vector<double> context;
};

struct ForwardResult {
  std::vector<double> pitch_logits;
  std::vector<double> duration_logits;
  ForwardTrace trace;
};

ForwardResult model_forward(std::span<const TokenPair> window, const ModelParams& params);

inline constexpr double kTemperatureEpsilon = 1e-3;

/// q_i = exp(z_i / T) / sum_j exp(z_j / T). Below kTemperatureEpsilon the
/// result is one-hot at the first maximum.
std::vector<double> temperature_softmax(std::span<const double> logits, double temperature);

/// Cross-entropy of both heads at T = 1. PAD targets are rejected.
double loss(std::span<const double> pitch_logits, std::span<const double> duration_logits, TokenPair target);

/// Accumulate scale * d(loss)/d(params) into `grads` (shaped like params).
void backward(const ForwardTrace& trace, TokenPair target, const ModelParams& params, ModelParams& grads,
              double scale = 1.0);
/// Fresh gradient set for a single example.
ModelParams backward(const ForwardTrace& trace, TokenPair target, const ModelParams& params);

struct NonFiniteEntry {
  std::string tensor;
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// First NaN/Inf in tensor order, if any.
std::optional<NonFiniteEntry> check_finite(const ModelParams& params);

}  // namespace climatune
