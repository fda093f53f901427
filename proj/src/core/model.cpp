#include "emopred/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "emopred/data_io.hpp"
#include "emopred/error.hpp"

namespace emopred {
namespace {

constexpr std::string_view kCheckpointMagic = "emopred-checkpoint 1";

void glorot_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : t.data()) v = u(rng);
}

std::vector<double> to_vector(std::span<const double> s) {
  return std::vector<double>(s.begin(), s.end());
}

}  // namespace

std::string_view to_string(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::kLastState: return "last_state";
    case AttentionVariant::kPlain: return "plain";
    case AttentionVariant::kContext: return "context";
  }
  return "context";
}

AttentionVariant parse_attention_variant(std::string_view s) {
  if (s == "last_state") return AttentionVariant::kLastState;
  if (s == "plain") return AttentionVariant::kPlain;
  if (s == "context") return AttentionVariant::kContext;
  throw_invalid("unknown attention variant '" + std::string(s) +
                "' (expected last_state, plain or context)");
}

void ModelConfig::validate() const {
  if (embed_dim < 1 || hidden_size < 1 || num_classes < 1) {
    throw_invalid("model: embed_dim, hidden_size and num_classes must be >= 1");
  }
  if (!(dropout_embed >= 0.0 && dropout_embed < 1.0) ||
      !(dropout_rnn >= 0.0 && dropout_rnn < 1.0)) {
    throw_invalid("model: dropout must be in [0, 1)");
  }
  if (!(noise_sigma >= 0.0)) throw_invalid("model: noise sigma must be >= 0");
}

ModelParams::ModelParams(const ModelConfig& cfg, std::size_t vocab_size,
                         std::uint64_t seed) {
  cfg.validate();
  if (vocab_size < 1) throw_invalid("model: empty vocabulary");
  Rng rng(seed);
  const std::size_t W = cfg.embed_dim, L = cfg.hidden_size, K = cfg.num_classes;

  Tensor emb({vocab_size, W});
  glorot_fill(emb, 1, W, rng);
  for (double& v : emb.row(Vocabulary::kPad)) v = 0.0;
  embedding = Parameter("embedding", std::move(emb));

  const auto lstm = [&](const std::string& prefix, Parameter& weight,
                        Parameter& bias) {
    Tensor w({4 * L, W + L});
    glorot_fill(w, W + L, L, rng);
    Tensor b({4 * L});
    for (std::size_t k = L; k < 2 * L; ++k) b[k] = 1.0;
    weight = Parameter(prefix + ".weight", std::move(w));
    bias = Parameter(prefix + ".bias", std::move(b));
  };
  lstm("lstm_fwd", fwd_weight, fwd_bias);
  lstm("lstm_bwd", bwd_weight, bwd_bias);

  const std::size_t att_in = cfg.attention_input_dim();
  Tensor aw({1, att_in});
  glorot_fill(aw, att_in, 1, rng);
  att_weight = Parameter("attention.weight", std::move(aw));
  att_bias = Parameter("attention.bias", Tensor({1}));

  Tensor ow({K, 2 * L});
  glorot_fill(ow, 2 * L, K, rng);
  out_weight = Parameter("output.weight", std::move(ow));
  out_bias = Parameter("output.bias", Tensor({K}));
}

std::vector<Parameter*> ModelParams::all() {
  return {&embedding,  &fwd_weight, &fwd_bias,   &bwd_weight, &bwd_bias,
          &att_weight, &att_bias,   &out_weight, &out_bias};
}

std::vector<const Parameter*> ModelParams::all() const {
  return {&embedding,  &fwd_weight, &fwd_bias,   &bwd_weight, &bwd_bias,
          &att_weight, &att_bias,   &out_weight, &out_bias};
}

void ModelParams::zero_grad() {
  for (Parameter* p : all()) p->zero_grad();
}

Batch Batch::from_sequences(std::span<const std::vector<std::size_t>> seqs,
                            std::size_t min_steps) {
  if (seqs.empty()) throw_invalid("batch: no sequences");
  Batch b;
  b.size = seqs.size();
  b.steps = min_steps;
  for (const auto& s : seqs) {
    if (s.empty()) throw_invalid("batch: empty token sequence");
    b.steps = std::max(b.steps, s.size());
    b.lengths.push_back(s.size());
  }
  b.ids.assign(b.size * b.steps, Vocabulary::kPad);
  b.mask = Tensor({b.size, b.steps});
  for (std::size_t r = 0; r < b.size; ++r) {
    for (std::size_t t = 0; t < seqs[r].size(); ++t) {
      b.ids[r * b.steps + t] = seqs[r][t];
      b.mask.at(r, t) = 1.0;
    }
  }
  return b;
}

std::vector<std::size_t> Batch::step_ids(std::size_t t) const {
  std::vector<std::size_t> out(size);
  for (std::size_t r = 0; r < size; ++r) out[r] = ids[r * steps + t];
  return out;
}

std::vector<std::uint8_t> Batch::step_valid(std::size_t t) const {
  std::vector<std::uint8_t> out(size);
  for (std::size_t r = 0; r < size; ++r) out[r] = t < lengths[r] ? 1 : 0;
  return out;
}

LstmState lstm_step(Var x, Var h_prev, Var c_prev, Var weight, Var bias) {
  const std::size_t L = h_prev.value().cols();
  if (weight.value().rows() != 4 * L ||
      weight.value().cols() != x.value().cols() + L) {
    throw_invalid("lstm_step: weight shape " + shape_string(weight.shape()) +
                  " does not match input and state sizes");
  }
  if (c_prev.value().shape() != h_prev.value().shape()) {
    throw_invalid("lstm_step: cell and hidden state shapes differ");
  }
  const Var z = linear(concat({x, h_prev}, x.value().rank() - 1), weight, bias);
  const Var i = sigmoid(slice_cols(z, 0, L));
  const Var f = sigmoid(slice_cols(z, L, 2 * L));
  const Var g = tanh(slice_cols(z, 2 * L, 3 * L));
  const Var o = sigmoid(slice_cols(z, 3 * L, 4 * L));
  const Var c = add(mul(f, c_prev), mul(i, g));
  const Var h = mul(o, tanh(c));
  return {h, c};
}

std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const Tensor& weight,
                                    const Tensor& bias) {
  Tape tape;
  const LstmState s =
      lstm_step(tape.constant(x), tape.constant(h_prev), tape.constant(c_prev),
                tape.constant(weight), tape.constant(bias));
  return {s.h.value(), s.c.value()};
}

std::vector<Var> bilstm_encode(const std::vector<Var>& embedded,
                               const Batch& batch, const BiLstmWeights& w,
                               std::size_t hidden_size) {
  if (embedded.empty() || batch.steps == 0) throw_invalid("bilstm_encode: N = 0");
  if (embedded.size() != batch.steps) {
    throw_invalid("bilstm_encode: step count does not match batch");
  }
  Tape& tape = embedded[0].tape();
  const std::size_t T = batch.steps, B = batch.size;
  const auto zeros = [&] { return tape.constant(Tensor({B, hidden_size})); };

  const auto run = [&](Var weight, Var bias, bool reverse) {
    std::vector<Var> states(T);
    Var h = zeros(), c = zeros();
    for (std::size_t k = 0; k < T; ++k) {
      const std::size_t t = reverse ? T - 1 - k : k;
      const LstmState next = lstm_step(embedded[t], h, c, weight, bias);
      const auto valid = batch.step_valid(t);
      if (std::all_of(valid.begin(), valid.end(), [](auto v) { return v != 0; })) {
        h = next.h;
        c = next.c;
      } else {
        h = where_rows(valid, next.h, h);
        c = where_rows(valid, next.c, c);
      }
      states[t] = h;
    }
    return states;
  };
  const auto fwd = run(w.fwd_weight, w.fwd_bias, false);
  const auto bwd = run(w.bwd_weight, w.bwd_bias, true);
  std::vector<Var> hidden(T);
  for (std::size_t t = 0; t < T; ++t) hidden[t] = concat({fwd[t], bwd[t]}, 1);
  return hidden;
}

AttentionOutput attend(const std::vector<Var>& hidden, AttentionVariant variant,
                       Var att_weight, Var att_bias, const Batch& batch) {
  if (hidden.size() != batch.steps || hidden.empty()) {
    throw_invalid("attend: hidden states do not match batch");
  }
  for (std::size_t b = 0; b < batch.size; ++b) {
    if (batch.lengths[b] == 0) throw_invalid("attend: all positions masked");
  }
  Tape& tape = hidden[0].tape();
  AttentionOutput out;
  if (variant == AttentionVariant::kLastState) {
    Tensor onehot({batch.size, batch.steps});
    for (std::size_t b = 0; b < batch.size; ++b) onehot.at(b, batch.lengths[b] - 1) = 1.0;
    out.weights = tape.constant(std::move(onehot));
    out.representation = weighted_sum_steps(out.weights, hidden);
    return out;
  }
  if (variant == AttentionVariant::kContext) {
    out.context = masked_mean_steps(hidden, batch.mask);
  }
  std::vector<Var> scores;
  scores.reserve(hidden.size());
  for (const Var& h : hidden) {
    const Var u = variant == AttentionVariant::kContext ? concat({h, out.context}, 1) : h;
    scores.push_back(tanh(linear(u, att_weight, att_bias)));
  }
  out.scores = concat(scores, 1);
  out.weights = masked_softmax(out.scores, batch.mask);
  out.representation = weighted_sum_steps(out.weights, hidden);
  return out;
}

ForwardOutput forward(Tape& tape, ModelParams& params, const ModelConfig& cfg,
                      const Batch& batch, Mode mode, Rng& rng) {
  const Var table = tape.param(params.embedding);
  std::vector<Var> embedded;
  embedded.reserve(batch.steps);
  for (std::size_t t = 0; t < batch.steps; ++t) {
    const auto ids = batch.step_ids(t);
    for (auto id : ids) {
      if (id >= params.embedding.value.rows()) {
        throw_invalid("classify: token id " + std::to_string(id) + " out of range");
      }
    }
    Var x = embedding_lookup(table, ids);
    x = gaussian_noise(x, cfg.noise_sigma, mode, rng);
    x = dropout(x, cfg.dropout_embed, mode, rng);
    embedded.push_back(x);
  }
  const BiLstmWeights w{tape.param(params.fwd_weight), tape.param(params.fwd_bias),
                        tape.param(params.bwd_weight), tape.param(params.bwd_bias)};
  ForwardOutput out;
  out.hidden = bilstm_encode(embedded, batch, w, cfg.hidden_size);
  std::vector<Var> regularized = out.hidden;
  for (Var& h : regularized) h = dropout(h, cfg.dropout_rnn, mode, rng);
  out.attention = attend(regularized, cfg.attention, tape.param(params.att_weight),
                         tape.param(params.att_bias), batch);
  out.logits = linear(out.attention.representation, tape.param(params.out_weight),
                      tape.param(params.out_bias));
  out.probs = softmax(out.logits, 1);
  return out;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Prediction extract_prediction(const ForwardOutput& out, const Batch& batch,
                              std::size_t b) {
  Prediction p;
  p.probs = to_vector(out.probs.value().row(b));
  p.label = argmax(p.probs);
  const std::size_t n = batch.lengths[b];
  AttentionRecord& rec = p.attention;
  for (std::size_t t = 0; t < n; ++t) rec.hidden.push_back(to_vector(out.hidden[t].value().row(b)));
  if (out.attention.context.valid()) {
    rec.context = to_vector(out.attention.context.value().row(b));
  }
  if (out.attention.scores.valid()) {
    rec.scores = to_vector(out.attention.scores.value().row(b).first(n));
  }
  rec.weights = to_vector(out.attention.weights.value().row(b).first(n));
  rec.representation = to_vector(out.attention.representation.value().row(b));
  return p;
}

Prediction classify_forward(const std::vector<std::size_t>& token_ids,
                            ModelParams& params, const ModelConfig& cfg,
                            Mode mode, Rng& rng) {
  if (token_ids.empty()) throw_invalid("classify_forward: empty token sequence");
  const std::vector<std::vector<std::size_t>> one{token_ids};
  const Batch batch = Batch::from_sequences(one);
  Tape tape;
  const ForwardOutput out = forward(tape, params, cfg, batch, mode, rng);
  return extract_prediction(out, batch, 0);
}

std::vector<Prediction> predict(const std::vector<std::vector<std::size_t>>& seqs,
                                ModelParams& params, const ModelConfig& cfg,
                                std::size_t batch_size) {
  if (batch_size < 1) throw_invalid("predict: batch_size must be >= 1");
  std::vector<Prediction> preds;
  preds.reserve(seqs.size());
  Rng unused(0);
  for (std::size_t start = 0; start < seqs.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, seqs.size() - start);
    const Batch batch = Batch::from_sequences(
        std::span<const std::vector<std::size_t>>(seqs).subspan(start, n));
    Tape tape;
    const ForwardOutput out = forward(tape, params, cfg, batch, Mode::kEval, unused);
    for (std::size_t b = 0; b < n; ++b) preds.push_back(extract_prediction(out, batch, b));
  }
  return preds;
}

// --- checkpoint -----------------------------------------------------------

std::string Classifier::serialize() const {
  std::string out(kCheckpointMagic);
  out += '\n';
  const auto kv = [&](std::string_view key, const std::string& value) {
    out += "config ";
    out += key;
    out += ' ';
    out += value;
    out += '\n';
  };
  const auto num = [](double v) {
    std::string s;
    append_double(s, v);
    return s;
  };
  kv("embed_dim", std::to_string(config.embed_dim));
  kv("hidden_size", std::to_string(config.hidden_size));
  kv("num_classes", std::to_string(config.num_classes));
  kv("attention", std::string(to_string(config.attention)));
  kv("noise_sigma", num(config.noise_sigma));
  kv("dropout_embed", num(config.dropout_embed));
  kv("dropout_rnn", num(config.dropout_rnn));
  out += "vocab " + std::to_string(vocab.size()) + '\n';
  for (const auto& w : vocab.words()) {
    out += w;
    out += '\n';
  }
  for (const Parameter* p : params.all()) {
    out += "tensor " + p->name + ' ' + std::to_string(p->value.rows()) + ' ' +
           std::to_string(p->value.cols()) + ' ' + std::to_string(p->value.rank()) + '\n';
    for (std::size_t r = 0; r < p->value.rows(); ++r) {
      const auto row = p->value.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out += ' ';
        append_double(out, row[c]);
      }
      out += '\n';
    }
  }
  out += "end\n";
  return out;
}

void Classifier::save(const std::filesystem::path& path) const {
  write_file(path, serialize());
}

Classifier Classifier::parse(const std::string& bytes) {
  const auto lines = split_lines(bytes);
  std::size_t pos = 0;
  const auto next = [&]() -> const std::string& {
    if (pos >= lines.size()) throw_format("checkpoint: unexpected end of file");
    return lines[pos++];
  };
  if (next() != kCheckpointMagic) throw_format("checkpoint: bad magic line");

  Classifier clf;
  std::size_t vocab_size = 0;
  while (true) {
    std::istringstream ls(next());
    std::string tag, key, value;
    ls >> tag;
    if (tag == "vocab") {
      ls >> vocab_size;
      break;
    }
    if (tag != "config" || !(ls >> key >> value)) throw_format("checkpoint: bad config line");
    const auto as_size = [&] { return static_cast<std::size_t>(std::stoull(value)); };
    if (key == "embed_dim") clf.config.embed_dim = as_size();
    else if (key == "hidden_size") clf.config.hidden_size = as_size();
    else if (key == "num_classes") clf.config.num_classes = as_size();
    else if (key == "attention") clf.config.attention = parse_attention_variant(value);
    else if (key == "noise_sigma") clf.config.noise_sigma = parse_double(value);
    else if (key == "dropout_embed") clf.config.dropout_embed = parse_double(value);
    else if (key == "dropout_rnn") clf.config.dropout_rnn = parse_double(value);
    else throw_format("checkpoint: unknown config key '" + key + "'");
  }
  clf.config.validate();
  if (vocab_size < 2) throw_format("checkpoint: vocabulary too small");
  std::vector<std::string> words;
  for (std::size_t i = 0; i < vocab_size; ++i) words.push_back(next());
  if (words[0] != Vocabulary::kPadToken || words[1] != Vocabulary::kUnkToken) {
    throw_format("checkpoint: vocabulary must start with <pad> <unk>");
  }
  clf.vocab = Vocabulary(std::vector<std::string>(words.begin() + 2, words.end()), {});
  clf.params = ModelParams(clf.config, vocab_size, 0);

  for (Parameter* p : clf.params.all()) {
    std::istringstream hs(next());
    std::string tag, name;
    std::size_t rows = 0, cols = 0, rank = 0;
    if (!(hs >> tag >> name >> rows >> cols >> rank) || tag != "tensor") {
      throw_format("checkpoint: bad tensor header");
    }
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols() ||
        rank != p->value.rank()) {
      throw_format("checkpoint: tensor '" + name + "' does not match the config");
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string& line = next();
      std::size_t c = 0, i = 0;
      while (i <= line.size() && c <= cols) {
        std::size_t j = line.find(' ', i);
        if (j == std::string::npos) j = line.size();
        if (c >= cols) throw_format("checkpoint: too many values in '" + name + "'");
        p->value.row(r)[c++] = parse_double(std::string_view(line).substr(i, j - i));
        i = j + 1;
        if (j == line.size()) break;
      }
      if (c != cols) throw_format("checkpoint: too few values in '" + name + "'");
    }
    p->grad = Tensor::zeros_like(p->value);
  }
  if (next() != "end") throw_format("checkpoint: missing end marker");
  return clf;
}

Classifier Classifier::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

}  // namespace emopred
