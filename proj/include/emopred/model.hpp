#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emopred/autodiff.hpp"
#include "emopred/embeddings.hpp"
#include "emopred/tensor.hpp"

namespace emopred {

enum class AttentionVariant { kLastState, kPlain, kContext };

std::string_view to_string(AttentionVariant v);
AttentionVariant parse_attention_variant(std::string_view s);

struct ModelConfig {
  std::size_t embed_dim = 300;
  std::size_t hidden_size = 300;
  std::size_t num_classes = 20;
  AttentionVariant attention = AttentionVariant::kContext;
  double noise_sigma = 0.05;
  double dropout_embed = 0.1;
  double dropout_rnn = 0.3;

  void validate() const;
  std::size_t rep_dim() const { return 2 * hidden_size; }
  std::size_t attention_input_dim() const {
    return attention == AttentionVariant::kContext ? 4 * hidden_size
                                                   : 2 * hidden_size;
  }
};

// All trainable weights. LSTM weights stack the input, forget, cell and
// output gates row-wise: (4L x (W + L)), each block mapping [x; h] to L.
struct ModelParams {
  ModelParams() = default;
  // Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases except the
  // forget gate bias of 1. The <pad> embedding row is zero.
  ModelParams(const ModelConfig& cfg, std::size_t vocab_size, std::uint64_t seed);

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  void zero_grad();

  Parameter embedding;
  Parameter fwd_weight, fwd_bias;
  Parameter bwd_weight, bwd_bias;
  Parameter att_weight, att_bias;  // (1 x attention_input_dim), (1)
  Parameter out_weight, out_bias;  // (K x 2L), (K)
};

// Sequences padded to a common step count with <pad>; mask(b, t) = 1 for
// t < lengths[b].
struct Batch {
  std::size_t size = 0;
  std::size_t steps = 0;
  std::vector<std::size_t> ids;  // size x steps, row-major
  std::vector<std::size_t> lengths;
  Tensor mask;

  // `min_steps` pads beyond the longest sequence.
  static Batch from_sequences(std::span<const std::vector<std::size_t>> seqs,
                              std::size_t min_steps = 0);
  std::vector<std::size_t> step_ids(std::size_t t) const;
  std::vector<std::uint8_t> step_valid(std::size_t t) const;
};

struct LstmState {
  Var h;
  Var c;
};

// i = s(W_i[x;h]+b_i), f = s(W_f[x;h]+b_f), g = tanh(W_g[x;h]+b_g),
// o = s(W_o[x;h]+b_o), c = f*c_prev + i*g, h = o*tanh(c). Rows are batch.
LstmState lstm_step(Var x, Var h_prev, Var c_prev, Var weight, Var bias);
std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const Tensor& weight,
                                    const Tensor& bias);

struct BiLstmWeights {
  Var fwd_weight, fwd_bias, bwd_weight, bwd_bias;
};

// embedded[t] is (B x W); returns one (B x 2L) matrix per step holding the
// forward and backward states side by side. Padded steps leave the state
// unchanged, so each direction only sees a sequence's valid positions.
std::vector<Var> bilstm_encode(const std::vector<Var>& embedded,
                               const Batch& batch, const BiLstmWeights& w,
                               std::size_t hidden_size);

struct AttentionOutput {
  Var context;  // (B x 2L); only for the context variant
  Var scores;   // (B x T); not set for last_state
  Var weights;  // (B x T)
  Var representation;  // (B x 2L)
};

AttentionOutput attend(const std::vector<Var>& hidden, AttentionVariant variant,
                       Var att_weight, Var att_bias, const Batch& batch);

struct ForwardOutput {
  std::vector<Var> hidden;
  AttentionOutput attention;
  Var logits;
  Var probs;  // (B x K)
};

// embedding -> noise -> dropout -> BiLSTM -> dropout -> attention -> linear
// -> softmax. Regularizers only act in train mode.
ForwardOutput forward(Tape& tape, ModelParams& params, const ModelConfig& cfg,
                      const Batch& batch, Mode mode, Rng& rng);

struct AttentionRecord {
  std::vector<std::vector<double>> hidden;
  std::vector<double> context;
  std::vector<double> scores;
  std::vector<double> weights;
  std::vector<double> representation;
};

struct Prediction {
  std::vector<double> probs;
  std::size_t label = 0;
  AttentionRecord attention;
};

// Lowest index among the maxima.
std::size_t argmax(std::span<const double> v);

Prediction classify_forward(const std::vector<std::size_t>& token_ids,
                            ModelParams& params, const ModelConfig& cfg,
                            Mode mode, Rng& rng);
// Eval-mode predictions for many sequences, `batch_size` at a time.
std::vector<Prediction> predict(const std::vector<std::vector<std::size_t>>& seqs,
                                ModelParams& params, const ModelConfig& cfg,
                                std::size_t batch_size = 32);

// Extracts row b of a forward pass as a Prediction.
Prediction extract_prediction(const ForwardOutput& out, const Batch& batch,
                              std::size_t b);

// A trained model with its vocabulary; the checkpoint unit.
struct Classifier {
  ModelConfig config;
  Vocabulary vocab;
  ModelParams params;

  void save(const std::filesystem::path& path) const;
  std::string serialize() const;
  static Classifier load(const std::filesystem::path& path);
  static Classifier parse(const std::string& bytes);
};

}  // namespace emopred
