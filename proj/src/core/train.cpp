#include "emopred/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "emopred/error.hpp"
#include "emopred/eval_report.hpp"

namespace emopred {

ClassWeights class_weights(std::span<const std::uint64_t> counts) {
  if (counts.empty()) throw_invalid("class weights: no classes");
  double total = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw_invalid("class weights: class " + std::to_string(c) + " has no examples");
    }
    total += static_cast<double>(counts[c]);
  }
  const double K = static_cast<double>(counts.size());
  ClassWeights out;
  out.w.reserve(counts.size());
  for (auto n : counts) out.w.push_back(total / (K * static_cast<double>(n)));
  return out;
}

ClassWeights class_weights(const ClassDistribution& dist) {
  return class_weights(std::span<const std::uint64_t>(dist.counts));
}

ClassWeights uniform_weights(std::size_t K) {
  if (K == 0) throw_invalid("class weights: no classes");
  return {std::vector<double>(K, 1.0)};
}

double weighted_ce_loss(const std::vector<std::vector<double>>& probs,
                        std::span<const std::size_t> labels,
                        const ClassWeights& weights) {
  if (probs.size() != labels.size() || probs.empty()) {
    throw_invalid("weighted_ce_loss: need one label per probability vector");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < probs.size(); ++b) {
    const std::size_t y = labels[b];
    if (y >= probs[b].size() || y >= weights.w.size()) {
      throw_invalid("weighted_ce_loss: label " + std::to_string(y) + " out of range");
    }
    total += weights.w[y] * -std::log(std::max(probs[b][y], 1e-12));
  }
  return total / static_cast<double>(probs.size());
}

double global_grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += l2_norm_squared(p->grad);
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  if (!(max_norm > 0.0)) throw_invalid("clip_grad_norm: max_norm must be > 0");
  const double g = global_grad_norm(params);
  if (g > max_norm) {
    const double s = max_norm / g;
    for (Parameter* p : params) p->grad *= s;
    // Rounding can leave the norm an ulp above max_norm.
    while (global_grad_norm(params) > max_norm) {
      for (Parameter* p : params) p->grad *= 1.0 - 0x1p-52;
    }
  }
  return g;
}

void adam_step(std::span<Parameter* const> params, AdamState& state,
               const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.push_back(Tensor::zeros_like(p->value));
      state.v.push_back(Tensor::zeros_like(p->value));
    }
  }
  if (state.m.size() != params.size()) {
    throw_invalid("adam_step: state was built for a different parameter set");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (state.m[k].shape() != p.value.shape() || p.grad.shape() != p.value.shape()) {
      throw_invalid("adam_step: shape mismatch for " + p.name);
    }
    auto w = p.value.data();
    auto g = p.grad.data();
    auto m = state.m[k].data();
    auto v = state.v[k].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      w[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw_invalid("train: batch_size must be >= 1");
  if (max_epochs < 1) throw_invalid("train: max_epochs must be >= 1");
  if (!(clip_norm > 0.0)) throw_invalid("train: clip norm must be > 0");
  if (!(adam.lr > 0.0)) throw_invalid("train: learning rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw_invalid("train: Adam betas must be in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw_invalid("train: Adam epsilon must be > 0");
}

bool EarlyStopping::observe(double val_loss) {
  const bool improved = seen_ == 0 || val_loss < best_loss_;
  if (improved) {
    best_loss_ = val_loss;
    best_epoch_ = seen_;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  ++seen_;
  return improved;
}

std::string format_epoch_line(std::size_t epoch, double train_loss,
                              double val_loss, double val_macro_f1) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.6f", epoch, train_loss,
                val_loss, val_macro_f1);
  return buf;
}

namespace {

void check_set(const EncodedSet& s, const ModelConfig& cfg, const char* what) {
  if (s.seqs.empty()) throw_invalid(std::string("train: empty ") + what + " set");
  if (s.seqs.size() != s.labels.size()) {
    throw_invalid(std::string("train: ") + what + " set has mismatched labels");
  }
  for (auto y : s.labels) {
    if (y >= cfg.num_classes) {
      throw_invalid(std::string("train: label out of range in ") + what + " set");
    }
  }
}

Batch gather(const EncodedSet& s, std::span<const std::size_t> idx,
             std::vector<std::size_t>& labels) {
  std::vector<std::vector<std::size_t>> seqs;
  seqs.reserve(idx.size());
  labels.clear();
  for (auto i : idx) {
    seqs.push_back(s.seqs[i]);
    labels.push_back(s.labels[i]);
  }
  return Batch::from_sequences(seqs);
}

}  // namespace

EvalResult evaluate(ModelParams& params, const ModelConfig& cfg,
                    const EncodedSet& data, const ClassWeights& weights,
                    std::size_t batch_size) {
  check_set(data, cfg, "evaluation");
  EvalResult out;
  Rng unused(0);
  double total = 0.0;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::size_t> labels;
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, idx.size() - start);
    const Batch batch = gather(data, std::span(idx).subspan(start, n), labels);
    Tape tape;
    const ForwardOutput fw = forward(tape, params, cfg, batch, Mode::kEval, unused);
    const Var loss = weighted_cross_entropy(fw.probs, labels, weights.w);
    total += loss.value().item() * static_cast<double>(n);
    for (std::size_t b = 0; b < n; ++b) out.predictions.push_back(argmax(fw.probs.value().row(b)));
  }
  out.loss = total / static_cast<double>(data.size());
  out.macro_f1 = compute_metrics(out.predictions, data.labels, cfg.num_classes).macro_f1;
  return out;
}

FitResult fit(const ModelParams& init, const ModelConfig& model_cfg,
              const EncodedSet& train, const EncodedSet& val,
              const ClassWeights& weights, const TrainConfig& cfg,
              const FitHooks& hooks) {
  cfg.validate();
  model_cfg.validate();
  check_set(train, model_cfg, "training");
  check_set(val, model_cfg, "validation");
  if (weights.w.size() != model_cfg.num_classes) {
    throw_invalid("train: class weight count does not match num_classes");
  }

  ModelParams params = init;
  const std::vector<Parameter*> plist = params.all();
  FitResult result{params, {}};
  AdamState adam;
  EarlyStopping stopper(cfg.patience);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> labels;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      const Batch batch = gather(train, std::span(order).subspan(start, n), labels);
      params.zero_grad();
      Tape tape;
      const ForwardOutput fw = forward(tape, params, model_cfg, batch, Mode::kTrain, rng);
      const Var loss = weighted_cross_entropy(fw.probs, labels, weights.w);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw_runtime("training diverged: non-finite loss in epoch " +
                      std::to_string(epoch + 1));
      }
      tape.backward(loss);
      clip_grad_norm(plist, cfg.clip_norm);
      adam_step(plist, adam, cfg.adam);
      total += value * static_cast<double>(n);
    }
    const EvalResult ev = evaluate(params, model_cfg, val, weights, cfg.batch_size);
    if (!std::isfinite(ev.loss)) {
      throw_runtime("training diverged: non-finite validation loss in epoch " +
                    std::to_string(epoch + 1));
    }
    TrainHistory& h = result.history;
    h.train_loss.push_back(total / static_cast<double>(train.size()));
    h.val_loss.push_back(ev.loss);
    h.val_macro_f1.push_back(ev.macro_f1);
    if (stopper.observe(ev.loss)) {
      result.params = params;
      h.best_epoch = epoch;
      if (hooks.on_best) hooks.on_best(epoch, params);
    }
    if (hooks.on_epoch) hooks.on_epoch(epoch, h);
    if (stopper.should_stop()) {
      h.stopped_early = epoch + 1 < cfg.max_epochs;
      break;
    }
  }
  for (Parameter* p : result.params.all()) p->zero_grad();
  return result;
}

void SearchSpace::validate() const {
  if (!(lr_min > 0.0) || !(lr_max >= lr_min)) {
    throw_invalid("search: learning-rate range must satisfy 0 < lr_min <= lr_max");
  }
  if (hidden_size.empty() || batch_size.empty() || noise_sigma.empty() ||
      dropout_embed.empty() || dropout_rnn.empty()) {
    throw_invalid("search: every choice list needs at least one value");
  }
}

namespace {

template <typename T>
const T& choose(const std::vector<T>& options, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
  return options[pick(rng)];
}

}  // namespace

std::vector<TrialConfig> sample_trials(const SearchSpace& space,
                                       const TrialConfig& base,
                                       std::size_t budget, std::uint64_t seed) {
  space.validate();
  if (budget < 1) throw_invalid("search: budget must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(std::log(space.lr_min), std::log(space.lr_max));
  std::vector<TrialConfig> out;
  for (std::size_t i = 0; i < budget; ++i) {
    TrialConfig t = base;
    const double lr = std::exp(u(rng));
    t.train.adam.lr = space.lr_min == space.lr_max
                          ? space.lr_min
                          : std::clamp(lr, space.lr_min, space.lr_max);
    t.model.hidden_size = choose(space.hidden_size, rng);
    t.train.batch_size = choose(space.batch_size, rng);
    t.model.noise_sigma = choose(space.noise_sigma, rng);
    t.model.dropout_embed = choose(space.dropout_embed, rng);
    t.model.dropout_rnn = choose(space.dropout_rnn, rng);
    out.push_back(t);
  }
  return out;
}

SearchResult random_search(const SearchSpace& space, const TrialConfig& base,
                           std::size_t budget, std::uint64_t seed,
                           const std::function<double(const TrialConfig&)>& objective) {
  SearchResult res;
  for (const TrialConfig& t : sample_trials(space, base, budget, seed)) {
    const double value = objective(t);
    res.trials.push_back({t, value});
    const Trial& best = res.trials[res.best_index];
    if (value < best.objective || (std::isnan(best.objective) && !std::isnan(value))) {
      res.best_index = res.trials.size() - 1;
    }
  }
  res.best = res.trials[res.best_index].config;
  return res;
}

}  // namespace emopred
