// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "emopred/baselines.hpp"
#include "emopred/config.hpp"
#include "emopred/embeddings.hpp"
#include "emopred/eval_report.hpp"
#include "emopred/model.hpp"
#include "emopred/pipeline.hpp"
#include "emopred/segment.hpp"
#include "emopred/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace emopred;

namespace {

const std::string kData = EMOPRED_TEST_DATA;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& x : t.data()) x = u(rng);
  return t;
}

ModelConfig plain_model(std::size_t W, std::size_t L, std::size_t K) {
  ModelConfig cfg;
  cfg.embed_dim = W;
  cfg.hidden_size = L;
  cfg.num_classes = K;
  cfg.attention = AttentionVariant::kContext;
  cfg.noise_sigma = 0.0;
  cfg.dropout_embed = 0.0;
  cfg.dropout_rnn = 0.0;
  return cfg;
}

// 1 ----------------------------------------------------------------------
Outcome golden_preprocessing() {
  std::ifstream in(kData + "/table_row.txt"), want(kData + "/table_row.expected");
  std::string input, expected;
  std::getline(in, input);
  std::getline(want, expected);

  test::TempDir dir;
  RunConfig s;
  s.set("input", kData + "/golden_corpus.txt");
  s.set("output", (dir / "stats.txt").string());
  const NgramStats stats = run_stats(s, [](std::string_view) {});
  for (const char* w : {"twin", "peaks", "tv", "series", "david", "lynch"}) {
    if (!stats.contains(w)) return {false, std::string("stats lack '") + w + "'"};
  }
  RunConfig cfg;
  cfg.set("stats", (dir / "stats.txt").string());
  const std::string got = make_preprocessor(cfg).process_line(input);
  if (got != expected) return {false, "got: " + got};
  return {true, "byte-identical"};
}

// 2 ----------------------------------------------------------------------
Outcome segmentation_oracle() {
  const oracle::Lexicon lex = oracle::toy_lexicon(2024);
  NgramStats stats;
  std::vector<std::string> words;
  for (const auto& [w, c] : lex.counts) {
    stats.set_unigram(w, c);
    words.push_back(w);
  }
  if (words.size() != 50) return {false, "lexicon is not 50 words"};

  // Word concatenations plus random letter strings over the lexicon alphabet.
  std::set<std::string> inputs;
  Rng rng(7);
  const std::string letters = "abdeghinorstc";
  while (inputs.size() < 450) {
    std::string s;
    const std::size_t k = 1 + rng() % 5;
    for (std::size_t i = 0; i < k; ++i) s += words[rng() % words.size()];
    if (s.size() <= 12) inputs.insert(s);
  }
  while (inputs.size() < 600) {
    std::string s(1 + rng() % 12, 'a');
    for (char& c : s) c = letters[rng() % letters.size()];
    inputs.insert(s);
  }
  for (const auto& s : inputs) {
    const auto want = oracle::brute_force_segment(s, lex, kDefaultMaxWordLen, kScoreTieTolerance);
    const Segmentation got = viterbi_segment(s, stats);
    if (got.parts != want.parts || std::abs(got.score - want.score) > 1e-9) {
      return {false, "mismatch on '" + s + "'"};
    }
  }
  return {true, std::to_string(inputs.size()) + " strings"};
}

// 3 ----------------------------------------------------------------------
Outcome gradient_fidelity() {
  const ModelConfig cfg = plain_model(4, 3, 3);
  ModelParams params(cfg, 12, 31);
  Rng rng(8);
  std::vector<std::vector<std::size_t>> seqs(5, std::vector<std::size_t>(5));
  std::vector<std::size_t> labels;
  for (auto& s : seqs) {
    for (auto& id : s) id = 2 + rng() % 10;
    labels.push_back(rng() % 3);
  }
  const Batch batch = Batch::from_sequences(seqs);
  const std::vector<double> weights = {0.8, 1.1, 1.3};
  const auto loss = [&](Tape& tape) {
    Rng unused(0);
    const ForwardOutput out = forward(tape, params, cfg, batch, Mode::kEval, unused);
    return weighted_cross_entropy(out.probs, labels, weights);
  };
  const auto ps = params.all();
  const GradCheckResult r = finite_difference_check(loss, ps);
  return {r.max_rel_error < 1e-4,
          "max rel error " + fmt("%.3e", r.max_rel_error) + " over " +
              std::to_string(r.checked) + " entries (worst " + r.worst_param + ")"};
}

// 4 ----------------------------------------------------------------------
Outcome attention_invariants() {
  Rng rng(9);
  const AttentionVariant variants[] = {AttentionVariant::kPlain, AttentionVariant::kContext};
  const auto constants = [](Tape& tape, const std::vector<Tensor>& steps) {
    std::vector<Var> out;
    for (const auto& s : steps) out.push_back(tape.constant(s));
    return out;
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const AttentionVariant v = variants[trial % 2];
    const std::size_t B = 1 + rng() % 3, T = 1 + rng() % 8, D = 2 + rng() % 5;
    std::vector<std::vector<std::size_t>> seqs(B);
    for (auto& s : seqs) s.assign(1 + rng() % T, 2);
    const Batch batch = Batch::from_sequences(seqs);
    std::vector<Tensor> steps;
    for (std::size_t t = 0; t < batch.steps; ++t) steps.push_back(random_tensor({B, D}, rng, 3.0));
    Tape tape;
    const std::size_t in = v == AttentionVariant::kContext ? 2 * D : D;
    const AttentionOutput a =
        attend(constants(tape, steps), v, tape.constant(random_tensor({1, in}, rng, 2.0)),
               tape.constant(random_tensor({1}, rng, 1.0)), batch);
    const Tensor w = a.weights.value();
    for (std::size_t b = 0; b < B; ++b) {
      double total = 0.0;
      for (std::size_t t = 0; t < batch.lengths[b]; ++t) {
        if (!(w.at(b, t) > 0.0)) return {false, "non-positive weight in trial " + std::to_string(trial)};
        total += w.at(b, t);
      }
      if (total < 1.0 - 1e-9 || total > 1.0 + 1e-9) {
        return {false, "weights sum to " + fmt("%.17g", total)};
      }
    }
  }
  for (AttentionVariant v : variants) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t D = 2 + rng() % 5;
      const std::size_t in = v == AttentionVariant::kContext ? 2 * D : D;
      const Tensor h = random_tensor({1, D}, rng, 3.0);
      const Tensor wa = random_tensor({1, in}, rng, 2.0);
      Tape tape;
      const Batch one = Batch::from_sequences(std::vector<std::vector<std::size_t>>{{2}});
      const AttentionOutput a =
          attend(constants(tape, {h}), v, tape.constant(wa), tape.constant(Tensor::vec({0.2})), one);
      if (a.representation.value() != Tensor(h)) return {false, "N = 1 does not return h_1"};

      const std::size_t N = 2 + rng() % 6;
      const Batch same = Batch::from_sequences(
          std::vector<std::vector<std::size_t>>{std::vector<std::size_t>(N, 2)});
      const AttentionOutput u = attend(constants(tape, std::vector<Tensor>(N, h)), v,
                                       tape.constant(wa), tape.constant(Tensor::vec({0.2})), same);
      const Tensor uw = u.weights.value();
      for (std::size_t t = 0; t < N; ++t) {
        if (uw.at(0, t) != uw.at(0, 0) || std::abs(uw.at(0, t) - 1.0 / N) > 1e-15) {
          return {false, "identical states give non-uniform weights"};
        }
      }
    }
  }
  return {true, "1000 random inputs, N = 1 exact, identical states uniform"};
}

// 5 ----------------------------------------------------------------------
struct OrderTask {
  Vocabulary vocab;
  std::vector<std::vector<std::string>> text;
  EncodedSet data;
};

// Every sequence holds "neg" and "good" once among filler words; the label
// is 1 when "neg" comes first.
OrderTask order_task(std::size_t n, std::uint64_t seed) {
  OrderTask task;
  std::vector<std::string> filler;
  for (int i = 0; i < 10; ++i) filler.push_back("w" + std::to_string(i));
  std::vector<std::string> words = {"neg", "good"};
  words.insert(words.end(), filler.begin(), filler.end());
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 4 + rng() % 7;
    std::vector<std::string> seq(len);
    for (auto& w : seq) w = filler[rng() % filler.size()];
    const std::size_t a = rng() % len;
    std::size_t b = rng() % (len - 1);
    if (b >= a) ++b;
    seq[a] = "neg";
    seq[b] = "good";
    task.data.labels.push_back(a < b ? 1 : 0);
    task.text.push_back(std::move(seq));
  }
  std::vector<std::uint64_t> counts(words.size(), 0);
  for (const auto& seq : task.text) {
    for (const auto& w : seq) ++counts[std::find(words.begin(), words.end(), w) - words.begin()];
  }
  task.vocab = Vocabulary(words, counts);
  for (const auto& seq : task.text) task.data.seqs.push_back(task.vocab.encode(seq));
  return task;
}

EncodedSet slice(const EncodedSet& s, std::size_t begin, std::size_t end) {
  EncodedSet out;
  out.seqs.assign(s.seqs.begin() + begin, s.seqs.begin() + end);
  out.labels.assign(s.labels.begin() + begin, s.labels.begin() + end);
  return out;
}

double accuracy(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& gold) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) ok += pred[i] == gold[i];
  return static_cast<double>(ok) / gold.size();
}

Outcome order_separation() {
  const OrderTask task = order_task(2000, 77);
  const EncodedSet train = slice(task.data, 0, 1600);
  const EncodedSet val = slice(task.data, 1600, 1800);
  const EncodedSet test = slice(task.data, 1800, 2000);

  ModelConfig mcfg = plain_model(8, 8, 2);
  TrainConfig tcfg;
  tcfg.batch_size = 32;
  tcfg.max_epochs = 40;
  tcfg.patience = 5;
  tcfg.adam.lr = 0.01;
  tcfg.seed = 3;
  const ModelParams init(mcfg, task.vocab.size(), 5);
  FitResult fitted = fit(init, mcfg, train, val, uniform_weights(2), tcfg);
  const EvalResult ev = evaluate(fitted.params, mcfg, test, uniform_weights(2));
  const double model_acc = accuracy(ev.predictions, test.labels);

  std::vector<std::vector<std::string>> train_text(task.text.begin(), task.text.begin() + 1600);
  std::vector<std::vector<std::size_t>> train_ids(train.seqs);
  SgnsConfig scfg;
  scfg.dim = 8;
  scfg.window = 3;
  scfg.epochs = 5;
  scfg.seed = 4;
  WordVectors wv{task.vocab, train_sgns(train_ids, task.vocab, scfg).matrix.input};
  const std::vector<std::vector<std::string>> test_text(task.text.begin() + 1800, task.text.end());
  const SvmModel svm = svm_train(nbow_features(train_text, wv), train.labels, 2, BaselineConfig{});
  const double nbow_acc = accuracy(svm_predict(nbow_features(test_text, wv), svm), test.labels);

  return {model_acc >= 0.95 && nbow_acc <= 0.60,
          "context model " + fmt("%.3f", model_acc) + " (>= 0.95), N-BOW SVM " +
              fmt("%.3f", nbow_acc) + " (<= 0.60), " + std::to_string(fitted.history.epochs()) +
              " epochs"};
}

// 6 ----------------------------------------------------------------------
Outcome class_weight_ratio() {
  // Label distribution in percent, most to least frequent.
  const std::vector<std::uint64_t> counts = {2242, 1034, 1018, 548, 491, 467, 426,
                                             364,  340,  323,  322, 304, 290, 260,
                                             270,  268,  261,  258, 266, 248};
  const ClassWeights w = class_weights(counts);
  const auto [lo, hi] = std::minmax_element(w.w.begin(), w.w.end());
  const double ratio = *hi / *lo;
  return {std::abs(ratio - 9.040) <= 1e-3, "w_max / w_min = " + fmt("%.6f", ratio)};
}

// 7 ----------------------------------------------------------------------
Outcome metrics_oracle() {
  const std::vector<std::size_t> golds = {0, 0, 1, 1}, preds = {0, 1, 1, 1};
  const Metrics m = compute_metrics(preds, golds, 2);
  const bool hand = std::abs(m.macro_f1 - 11.0 / 15.0) <= 1e-9 &&
                    fmt("%.4f", m.macro_f1) == "0.7333";
  Rng rng(10);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t K = 2 + rng() % 6, n = 1 + rng() % 50;
    std::vector<std::size_t> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng() % K;
      g[i] = rng() % K;
    }
    if (!(metrics_from_confusion(confusion(p, g, K)) == compute_metrics(p, g, K))) {
      return {false, "confusion recomputation differs in trial " + std::to_string(trial)};
    }
  }
  return {hand, "macro-F1 " + fmt("%.12f", m.macro_f1) + ", 500 confusion recomputations exact"};
}

// 8 ----------------------------------------------------------------------
Outcome optimizer_and_clipping() {
  Rng rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Parameter> ps;
    const double scale = trial % 2 ? 20.0 : 0.4;
    std::uniform_real_distribution<double> u(-scale, scale);
    const std::size_t n = 1 + rng() % 5;
    for (std::size_t i = 0; i < n; ++i) {
      Parameter p("p" + std::to_string(i), Tensor({1 + rng() % 8}));
      for (double& g : p.grad.data()) g = u(rng);
      ps.push_back(std::move(p));
    }
    std::vector<Parameter*> ptrs;
    for (auto& p : ps) ptrs.push_back(&p);
    clip_grad_norm(ptrs, 1.0);
    worst = std::max(worst, global_grad_norm(ptrs));
  }
  // Reference: Adam stepped by hand on f(p) = p^2 from p = 1 with lr 0.1.
  double ref = 1.0, m = 0.0, v = 0.0;
  std::vector<double> trace;
  for (int t = 1; t <= 3; ++t) {
    const double g = 2.0 * ref;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t)), vhat = v / (1.0 - std::pow(0.999, t));
    ref -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    trace.push_back(ref);
  }
  Parameter p("p", Tensor::vec({1.0}));
  Parameter* pp[] = {&p};
  AdamState state;
  AdamConfig cfg;
  cfg.lr = 0.1;
  double adam_err = 0.0;
  for (double want : trace) {
    p.grad[0] = 2.0 * p.value[0];
    adam_step(pp, state, cfg);
    adam_err = std::max(adam_err, std::abs(p.value[0] - want));
  }
  return {worst <= 1.0 && adam_err <= 1e-12,
          "max clipped norm " + fmt("%.17g", worst) + ", Adam trace error " + fmt("%.1e", adam_err)};
}

// 9 ----------------------------------------------------------------------
Outcome embedding_round_trip() {
  Rng rng(12);
  std::vector<std::string> words;
  for (int i = 0; i < 998; ++i) words.push_back("word" + std::to_string(i));
  const Vocabulary vocab(words, {});
  Tensor m({1000, 50});
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& x : m.data()) x = n(rng) * std::pow(10.0, static_cast<int>(rng() % 9) - 4);
  test::TempDir dir;
  save_embeddings(m, vocab, dir / "emb.txt");
  const WordVectors back = load_embeddings(dir / "emb.txt");
  if (!(back.vectors == m) || !(back.vocab == vocab)) return {false, "1000x50 round trip not exact"};

  const std::vector<std::string> a = {"apple", "banana", "cherry", "grape", "lemon", "mango"};
  const std::vector<std::string> b = {"car", "truck", "bus", "train", "plane", "boat"};
  std::vector<std::vector<std::string>> text;
  for (int s = 0; s < 200; ++s) {
    const auto& set = s % 2 ? b : a;
    std::vector<std::string> sent;
    for (int i = 0; i < 8; ++i) sent.push_back(set[rng() % set.size()]);
    text.push_back(sent);
  }
  const Vocabulary cv = build_vocab(text, 1);
  std::vector<std::vector<std::size_t>> ids;
  for (const auto& s : text) ids.push_back(cv.encode(s));
  SgnsConfig cfg;
  cfg.dim = 16;
  cfg.window = 3;
  cfg.epochs = 5;
  cfg.seed = 9;
  const Tensor vec = train_sgns(ids, cv, cfg).matrix.input;
  const auto cos = [&](const std::string& x, const std::string& y) {
    return cosine_similarity(vec.row(cv.index(x)), vec.row(cv.index(y)));
  };
  double intra = 0.0, inter = 0.0;
  int ni = 0, nx = 0;
  for (const auto* set : {&a, &b}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      for (std::size_t j = i + 1; j < set->size(); ++j, ++ni) intra += cos((*set)[i], (*set)[j]);
    }
  }
  for (const auto& x : a) {
    for (const auto& y : b) {
      inter += cos(x, y);
      ++nx;
    }
  }
  intra /= ni;
  inter /= nx;
  return {intra >= inter + 0.2,
          "exact round trip; intra " + fmt("%.3f", intra) + " vs inter " + fmt("%.3f", inter)};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0 when untimed
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "golden preprocessing", 1.0, golden_preprocessing},
      {2, "segmentation oracle", 30.0, segmentation_oracle},
      {3, "gradient fidelity", 60.0, gradient_fidelity},
      {4, "attention invariants", 0.0, attention_invariants},
      {5, "order-sensitivity separation", 300.0, order_separation},
      {6, "class weights", 0.0, class_weight_ratio},
      {7, "metrics oracle", 0.0, metrics_oracle},
      {8, "optimizer and clipping", 0.0, optimizer_and_clipping},
      {9, "embedding round trip", 120.0, embedding_round_trip},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.2f s", secs);
    if (c.limit_s > 0) {
      timing += fmt(" < %.0f s", c.limit_s);
      if (secs >= c.limit_s) {
        o.pass = false;
        timing += " EXCEEDED";
      }
    }
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  if (only.empty() || only.count(10)) {
    std::printf("EXCLUDED criterion 10 (full-scale official scores): needs the 500k-tweet task "
                "data and large pretrained embeddings; see README\n");
  }
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
