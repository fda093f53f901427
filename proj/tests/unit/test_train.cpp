#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "emopred/error.hpp"
#include "emopred/train.hpp"

using namespace emopred;

namespace {

ModelConfig tiny_model(std::size_t K) {
  ModelConfig cfg;
  cfg.embed_dim = 8;
  cfg.hidden_size = 8;
  cfg.num_classes = K;
  cfg.noise_sigma = 0.0;
  cfg.dropout_embed = 0.0;
  cfg.dropout_rnn = 0.0;
  return cfg;
}

// Random sequences over a 30-word vocabulary with random labels.
EncodedSet random_set(std::size_t n, std::size_t K, std::uint64_t seed) {
  Rng rng(seed);
  EncodedSet s;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> seq(2 + rng() % 5);
    for (auto& id : seq) id = 2 + rng() % 28;
    s.seqs.push_back(seq);
    s.labels.push_back(rng() % K);
  }
  return s;
}

std::vector<Parameter> random_grads(Rng& rng, double scale) {
  std::vector<Parameter> ps;
  std::uniform_real_distribution<double> u(-scale, scale);
  const std::size_t n = 1 + rng() % 4;
  for (std::size_t i = 0; i < n; ++i) {
    Parameter p("p" + std::to_string(i), Tensor({1 + rng() % 6}));
    for (double& g : p.grad.data()) g = u(rng);
    ps.push_back(std::move(p));
  }
  return ps;
}

std::vector<Parameter*> pointers(std::vector<Parameter>& ps) {
  std::vector<Parameter*> out;
  for (auto& p : ps) out.push_back(&p);
  return out;
}

}  // namespace

TEST(ClassWeights, FigureRatio) {
  const std::vector<std::uint64_t> counts = {2242, 1000, 248, 500};
  const ClassWeights w = class_weights(counts);
  const double wmax = *std::max_element(w.w.begin(), w.w.end());
  const double wmin = *std::min_element(w.w.begin(), w.w.end());
  EXPECT_NEAR(wmax / wmin, 9.040, 1e-3);
  EXPECT_NEAR(w.w[0] / w.w[2], 0.0248 / 0.2242, 1e-12);
  // Averaged over examples the weights are 1.
  double per_example = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) per_example += counts[c] * w.w[c];
  EXPECT_NEAR(per_example / 3990.0, 1.0, 1e-12);
}

TEST(ClassWeights, UniformAndErrors) {
  const std::vector<std::uint64_t> counts = {7, 7, 7};
  for (double x : class_weights(counts).w) EXPECT_DOUBLE_EQ(x, 1.0);
  for (double x : uniform_weights(5).w) EXPECT_EQ(x, 1.0);
  const std::vector<std::uint64_t> zero = {3, 0, 2};
  EXPECT_THROW(class_weights(zero), Error);
}

TEST(Loss, HandValues) {
  const std::vector<std::size_t> one = {0};
  EXPECT_NEAR(weighted_ce_loss({{0.5, 0.5}}, one, uniform_weights(2)), std::log(2.0), 1e-15);
  const std::vector<std::size_t> two = {0, 1};
  const ClassWeights w{{1.0, 2.0}};
  EXPECT_NEAR(weighted_ce_loss({{0.5, 0.5}, {0.75, 0.25}}, two, w),
              1.7328679513998633, 1e-12);
  EXPECT_NEAR(weighted_ce_loss({{0.5, 0.5}, {0.75, 0.25}}, two, w), 1.7329, 1e-4);
}

TEST(Loss, LinearityAndGuards) {
  const std::vector<std::size_t> labels = {1, 0, 2};
  const std::vector<std::vector<double>> probs = {
      {0.2, 0.5, 0.3}, {0.6, 0.1, 0.3}, {0.1, 0.1, 0.8}};
  const ClassWeights w{{0.5, 1.5, 1.0}};
  ClassWeights w3 = w;
  for (double& x : w3.w) x *= 3.0;
  EXPECT_NEAR(weighted_ce_loss(probs, labels, w3), 3.0 * weighted_ce_loss(probs, labels, w),
              1e-12);
  const std::vector<std::size_t> bad = {3};
  EXPECT_THROW(weighted_ce_loss({{0.5, 0.5, 0.0}}, bad, uniform_weights(3)), Error);
  const std::vector<std::size_t> zero = {2};
  EXPECT_NEAR(weighted_ce_loss({{0.5, 0.5, 0.0}}, zero, uniform_weights(3)),
              -std::log(1e-12), 1e-9);
}

TEST(Clip, HalvesAboveMax) {
  Parameter a("a", Tensor::vec({0, 0}));
  Parameter b("b", Tensor::vec({0}));
  a.grad = Tensor::vec({1.2, 0.0});
  b.grad = Tensor::vec({1.6});
  Parameter* ps[] = {&a, &b};
  EXPECT_NEAR(clip_grad_norm(ps, 1.0), 2.0, 1e-15);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad[0], 0.8, 1e-15);
  EXPECT_NEAR(global_grad_norm(ps), 1.0, 1e-15);
}

TEST(Clip, NoOpAndZeros) {
  Parameter a("a", Tensor::vec({0, 0}));
  a.grad = Tensor::vec({0.3, 0.4});
  Parameter* ps[] = {&a};
  clip_grad_norm(ps, 1.0);
  EXPECT_EQ(a.grad, Tensor::vec({0.3, 0.4}));
  a.grad.fill(0.0);
  EXPECT_EQ(clip_grad_norm(ps, 1.0), 0.0);
  EXPECT_EQ(a.grad, Tensor::vec({0.0, 0.0}));
}

TEST(Clip, RandomNeverExceedsMax) {
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    auto ps = random_grads(rng, trial % 2 ? 10.0 : 0.3);
    auto ptrs = pointers(ps);
    clip_grad_norm(ptrs, 1.0);
    EXPECT_LE(global_grad_norm(ptrs), 1.0 + 1e-9);
  }
}

TEST(Adam, QuadraticTrace) {
  Parameter p("p", Tensor::vec({1.0}));
  Parameter* ps[] = {&p};
  AdamState state;
  AdamConfig cfg;
  cfg.lr = 0.1;
  const double expected[] = {0.9000000005, 0.8004122286917928, 0.7015862729460303};
  for (double e : expected) {
    p.grad[0] = 2.0 * p.value[0];
    adam_step(ps, state, cfg);
    EXPECT_NEAR(p.value[0], e, 1e-12);
  }
  EXPECT_EQ(state.t, 3u);
}

TEST(Adam, FirstStepAndZeroGradient) {
  Parameter p("p", Tensor::vec({0.5, -0.5, 2.0}));
  p.grad = Tensor::vec({3.0, -0.01, 0.0});
  Parameter* ps[] = {&p};
  AdamState state;
  adam_step(ps, state, AdamConfig{});
  EXPECT_NEAR(p.value[0], 0.5 - 1e-3, 1e-10);
  EXPECT_NEAR(p.value[1], -0.5 + 1e-3, 1e-8);
  EXPECT_EQ(p.value[2], 2.0);
}

TEST(EarlyStopping, WalkThrough) {
  EarlyStopping es(3);
  const double losses[] = {1.0, 0.9, 0.95, 0.96, 0.97};
  std::size_t stopped_after = 0;
  for (std::size_t e = 0; e < 5; ++e) {
    es.observe(losses[e]);
    if (es.should_stop()) {
      stopped_after = e + 1;
      break;
    }
  }
  EXPECT_EQ(stopped_after, 5u);
  EXPECT_EQ(es.best_epoch(), 1u);
  EXPECT_EQ(es.best_loss(), 0.9);
}

TEST(EarlyStopping, EqualLossIsNotImprovement) {
  EarlyStopping es(1);
  EXPECT_TRUE(es.observe(0.5));
  EXPECT_FALSE(es.observe(0.5));
  EXPECT_TRUE(es.should_stop());
  EXPECT_EQ(es.best_epoch(), 0u);
}

TEST(EpochLine, Format) {
  EXPECT_EQ(format_epoch_line(1, 0.5, 0.25, 0.125), "1\t0.500000\t0.250000\t0.125000");
}

TEST(Fit, MemorizesSmallSet) {
  const ModelConfig mcfg = tiny_model(4);
  const EncodedSet data = random_set(64, 4, 3);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  cfg.adam.lr = 0.02;
  cfg.seed = 4;
  const ModelParams init(mcfg, 30, 7);
  std::size_t epochs_needed = 0;
  FitHooks hooks;
  hooks.on_epoch = [&](std::size_t epoch, const TrainHistory& h) {
    if (epochs_needed == 0 && h.train_loss.back() < 0.05) epochs_needed = epoch;
  };
  const FitResult r = fit(init, mcfg, data, data, uniform_weights(4), cfg, hooks);
  const double best = *std::min_element(r.history.train_loss.begin(), r.history.train_loss.end());
  EXPECT_LT(best, 0.05);
  EXPECT_GT(epochs_needed, 0u);
  EXPECT_LE(epochs_needed, 200u);
}

TEST(Fit, DeterministicAndBestEpochMinimal) {
  ModelConfig mcfg = tiny_model(3);
  mcfg.noise_sigma = 0.05;
  mcfg.dropout_embed = 0.1;
  mcfg.dropout_rnn = 0.3;
  const EncodedSet train = random_set(40, 3, 5);
  const EncodedSet val = random_set(12, 3, 6);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 6;
  cfg.patience = 2;
  cfg.adam.lr = 0.01;
  const ModelParams init(mcfg, 30, 1);
  const ClassWeights w{{1.0, 0.8, 1.2}};
  const FitResult a = fit(init, mcfg, train, val, w, cfg);
  const FitResult b = fit(init, mcfg, train, val, w, cfg);
  EXPECT_EQ(a.history, b.history);
  const auto& vl = a.history.val_loss;
  EXPECT_EQ(vl[a.history.best_epoch], *std::min_element(vl.begin(), vl.end()));
  // Returned parameters reproduce the best epoch's validation loss.
  ModelParams best = a.params;
  EXPECT_DOUBLE_EQ(evaluate(best, mcfg, val, w, 8).loss, vl[a.history.best_epoch]);
  if (a.history.stopped_early) {
    EXPECT_EQ(a.history.epochs() - 1 - a.history.best_epoch, cfg.patience);
  }
}

TEST(Fit, DivergenceAborts) {
  const ModelConfig mcfg = tiny_model(2);
  const EncodedSet data = random_set(8, 2, 1);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.adam.lr = std::nan("");
  const ModelParams init(mcfg, 30, 1);
  EXPECT_THROW(fit(init, mcfg, data, data, uniform_weights(2), cfg), Error);
}

TEST(Fit, ConfigValidate) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.clip_norm = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Defaults, DocumentedHyperParameters) {
  const TrainConfig t;
  const ModelConfig m;
  EXPECT_EQ(t.batch_size, 32u);
  EXPECT_EQ(t.clip_norm, 1.0);
  EXPECT_EQ(m.noise_sigma, 0.05);
  EXPECT_EQ(m.dropout_embed, 0.1);
  EXPECT_EQ(m.dropout_rnn, 0.3);
  EXPECT_EQ(m.embed_dim, 300u);
  EXPECT_EQ(m.hidden_size, 300u);
}

TEST(Search, BudgetAndBounds) {
  SearchSpace space;
  space.hidden_size = {16, 32, 64};
  space.batch_size = {8, 32};
  space.dropout_rnn = {0.2, 0.3};
  const auto trials = sample_trials(space, TrialConfig{}, 5, 9);
  ASSERT_EQ(trials.size(), 5u);
  for (const auto& t : trials) {
    EXPECT_GE(t.train.adam.lr, space.lr_min);
    EXPECT_LE(t.train.adam.lr, space.lr_max);
    EXPECT_NE(std::find(space.hidden_size.begin(), space.hidden_size.end(),
                        t.model.hidden_size),
              space.hidden_size.end());
    EXPECT_NE(std::find(space.batch_size.begin(), space.batch_size.end(),
                        t.train.batch_size),
              space.batch_size.end());
  }
  std::size_t calls = 0;
  const SearchResult r = random_search(space, TrialConfig{}, 5, 9, [&](const TrialConfig& c) {
    ++calls;
    return std::abs(std::log(c.train.adam.lr / 1e-3));
  });
  EXPECT_EQ(calls, 5u);
  EXPECT_EQ(r.trials.size(), 5u);
  for (const auto& t : r.trials) EXPECT_LE(r.trials[r.best_index].objective, t.objective);
  EXPECT_EQ(r.best.train.adam.lr, r.trials[r.best_index].config.train.adam.lr);
}

TEST(Search, Deterministic) {
  SearchSpace space;
  space.hidden_size = {16, 32};
  const auto a = sample_trials(space, TrialConfig{}, 8, 3);
  const auto b = sample_trials(space, TrialConfig{}, 8, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].train.adam.lr, b[i].train.adam.lr);
    EXPECT_EQ(a[i].model.hidden_size, b[i].model.hidden_size);
  }
  const auto c = sample_trials(space, TrialConfig{}, 8, 4);
  EXPECT_NE(a[0].train.adam.lr, c[0].train.adam.lr);
}

TEST(Search, DegenerateSpace) {
  SearchSpace space;
  space.lr_min = space.lr_max = 3e-3;
  space.hidden_size = {12};
  const SearchResult r =
      random_search(space, TrialConfig{}, 3, 1, [](const TrialConfig&) { return 1.0; });
  EXPECT_EQ(r.best.train.adam.lr, 3e-3);
  EXPECT_EQ(r.best.model.hidden_size, 12u);
  EXPECT_EQ(r.best_index, 0u);
}

TEST(Search, Errors) {
  SearchSpace space;
  space.hidden_size.clear();
  EXPECT_THROW(space.validate(), Error);
  EXPECT_THROW(sample_trials(SearchSpace{}, TrialConfig{}, 0, 1), Error);
  SearchSpace inverted;
  inverted.lr_min = 1e-2;
  inverted.lr_max = 1e-3;
  EXPECT_THROW(inverted.validate(), Error);
}
