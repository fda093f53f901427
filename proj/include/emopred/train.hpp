#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "emopred/data_io.hpp"
#include "emopred/model.hpp"
#include "emopred/tensor.hpp"

namespace emopred {

struct ClassWeights {
  std::vector<double> w;
};

// w_c = N / (K * n_c), so the weights average to 1.
ClassWeights class_weights(const ClassDistribution& dist);
ClassWeights class_weights(std::span<const std::uint64_t> counts);
ClassWeights uniform_weights(std::size_t K);

// (1/B) sum_b w[y_b] * -log(max(p_b[y_b], 1e-12))
double weighted_ce_loss(const std::vector<std::vector<double>>& probs,
                        std::span<const std::size_t> labels,
                        const ClassWeights& weights);

double global_grad_norm(std::span<Parameter* const> params);
// Rescales every gradient by max_norm / g when the global norm g exceeds
// max_norm. Returns g.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;
};

// Lazily sizes `state` on the first call.
void adam_step(std::span<Parameter* const> params, AdamState& state,
               const AdamConfig& cfg);

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;
  AdamConfig adam;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Token-id sequences with their labels.
struct EncodedSet {
  std::vector<std::vector<std::size_t>> seqs;
  std::vector<std::size_t> labels;

  std::size_t size() const { return seqs.size(); }
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_macro_f1;
  std::size_t best_epoch = 0;  // index into the vectors above
  bool stopped_early = false;

  std::size_t epochs() const { return val_loss.size(); }
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

// Tracks the best validation loss; an epoch counts as an improvement only
// when it is strictly lower.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when `val_loss` is a new best.
  bool observe(double val_loss);
  bool should_stop() const { return since_best_ >= patience_ && seen_ > 0; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t seen_ = 0;
  std::size_t since_best_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_ = 0.0;
};

// "epoch TAB train_loss TAB val_loss TAB val_macro_f1", epochs counted from 1.
std::string format_epoch_line(std::size_t epoch, double train_loss,
                              double val_loss, double val_macro_f1);

struct FitHooks {
  std::function<void(std::size_t epoch, const TrainHistory&)> on_epoch;
  std::function<void(std::size_t epoch, const ModelParams&)> on_best;
};

struct FitResult {
  ModelParams params;
  TrainHistory history;
};

struct EvalResult {
  double loss = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::size_t> predictions;
};

EvalResult evaluate(ModelParams& params, const ModelConfig& cfg,
                    const EncodedSet& data, const ClassWeights& weights,
                    std::size_t batch_size = 32);

// Mini-batch training with early stopping on validation loss. Throws when
// a loss becomes non-finite.
FitResult fit(const ModelParams& init, const ModelConfig& model_cfg,
              const EncodedSet& train, const EncodedSet& val,
              const ClassWeights& weights, const TrainConfig& cfg,
              const FitHooks& hooks = {});

struct SearchSpace {
  double lr_min = 1e-4;
  double lr_max = 1e-2;
  std::vector<std::size_t> hidden_size{300};
  std::vector<std::size_t> batch_size{32};
  std::vector<double> noise_sigma{0.05};
  std::vector<double> dropout_embed{0.1};
  std::vector<double> dropout_rnn{0.3};

  void validate() const;
};

struct TrialConfig {
  ModelConfig model;
  TrainConfig train;
};

struct Trial {
  TrialConfig config;
  double objective = 0.0;
};

struct SearchResult {
  TrialConfig best;
  std::size_t best_index = 0;
  std::vector<Trial> trials;
};

// Log-uniform learning rate, uniform choice for the rest. Other fields come
// from `base`.
std::vector<TrialConfig> sample_trials(const SearchSpace& space,
                                       const TrialConfig& base,
                                       std::size_t budget, std::uint64_t seed);
// Returns the trial with the smallest objective (first one on ties).
SearchResult random_search(const SearchSpace& space, const TrialConfig& base,
                           std::size_t budget, std::uint64_t seed,
                           const std::function<double(const TrialConfig&)>& objective);

}  // namespace emopred
