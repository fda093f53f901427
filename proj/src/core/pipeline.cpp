#include "emopred/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

#include "emopred/error.hpp"

namespace emopred {
namespace {

namespace fs = std::filesystem;

void emit(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

const std::string& require(const RunConfig& cfg, std::string_view key) {
  const std::string& v = cfg.get(key);
  if (v.empty()) throw_invalid("missing required setting '" + std::string(key) + "'");
  return v;
}

fs::path output_dir(const RunConfig& cfg) {
  const fs::path dir = require(cfg, "output");
  fs::create_directories(dir);
  cfg.save(dir / "run.cfg");
  return dir;
}

fs::path output_file(const RunConfig& cfg) {
  const fs::path file = require(cfg, "output");
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  cfg.save(fs::path(file.string() + ".run.cfg"));
  return file;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Vocabulary encode_vocab_for_train(const RunConfig& cfg,
                                  const std::vector<std::vector<std::string>>& docs,
                                  WordVectors* pretrained) {
  if (!cfg.get("embeddings").empty()) {
    *pretrained = load_embeddings(cfg.get("embeddings"));
    return pretrained->vocab;
  }
  return build_vocab(docs, cfg.get_size("min_count"));
}

}  // namespace

NormalizeOptions normalize_options(const RunConfig& cfg) {
  NormalizeOptions o;
  o.segment_hashtags = cfg.get_bool("segment_hashtags");
  o.spell_correct = cfg.get_bool("spell_correct");
  o.bigram_rescoring = cfg.get_bool("bigram_rescoring");
  o.max_edits = cfg.get_size("max_edits");
  o.max_word_len = cfg.get_size("max_word_len");
  return o;
}

Preprocessor make_preprocessor(const RunConfig& cfg) {
  std::shared_ptr<const NgramStats> stats;
  if (!cfg.get("stats").empty()) {
    stats = std::make_shared<const NgramStats>(NgramStats::load(cfg.get("stats")));
  }
  EmoticonLexicon lexicon;
  if (!cfg.get("emoticons").empty()) lexicon.load(cfg.get("emoticons"));
  return Preprocessor(std::move(stats), normalize_options(cfg), std::move(lexicon));
}

ModelConfig model_config(const RunConfig& cfg) {
  ModelConfig m;
  m.embed_dim = cfg.get_size("embed_dim");
  m.hidden_size = cfg.get_size("hidden_size");
  m.num_classes = cfg.get_size("num_classes");
  m.attention = parse_attention_variant(cfg.get("attention"));
  m.noise_sigma = cfg.get_double("noise_sigma");
  m.dropout_embed = cfg.get_double("dropout_embed");
  m.dropout_rnn = cfg.get_double("dropout_rnn");
  m.validate();
  return m;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.batch_size = cfg.get_size("batch_size");
  t.max_epochs = cfg.get_size("max_epochs");
  t.patience = cfg.get_size("patience");
  t.adam.lr = cfg.get_double("lr");
  t.adam.beta1 = cfg.get_double("beta1");
  t.adam.beta2 = cfg.get_double("beta2");
  t.adam.eps = cfg.get_double("epsilon");
  t.clip_norm = cfg.get_double("clip_norm");
  t.seed = cfg.get_u64("seed");
  t.validate();
  return t;
}

SearchSpace search_space(const RunConfig& cfg) {
  SearchSpace s;
  s.lr_min = cfg.get_double("search_lr_min");
  s.lr_max = cfg.get_double("search_lr_max");
  s.hidden_size = cfg.get_size_list("search_hidden_size");
  s.batch_size = cfg.get_size_list("search_batch_size");
  s.noise_sigma = cfg.get_double_list("search_noise_sigma");
  s.dropout_embed = cfg.get_double_list("search_dropout_embed");
  s.dropout_rnn = cfg.get_double_list("search_dropout_rnn");
  s.validate();
  return s;
}

BaselineConfig baseline_config(const RunConfig& cfg) {
  BaselineConfig b;
  b.C = cfg.get_double("svm_c");
  b.iterations = cfg.get_size("svm_iterations");
  b.seed = cfg.get_u64("seed");
  b.projection = cfg.get_bool("svm_projection");
  b.validate();
  return b;
}

std::vector<std::string> tokens_of(const Preprocessor& pre, std::string_view text) {
  return pre.process(text).tokens;
}

std::vector<std::vector<std::string>> tokenize_all(const Preprocessor& pre,
                                                   const std::vector<std::string>& lines) {
  std::vector<std::vector<std::string>> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(tokens_of(pre, l));
  return out;
}

EncodedSet encode_dataset(const Preprocessor& pre, const Vocabulary& vocab,
                          const Dataset& d) {
  EncodedSet out;
  out.seqs.reserve(d.size());
  for (const auto& ex : d.examples) {
    auto ids = vocab.encode(tokens_of(pre, ex.text));
    if (ids.empty()) ids.push_back(Vocabulary::kUnk);
    out.seqs.push_back(std::move(ids));
    out.labels.push_back(ex.label);
  }
  return out;
}

Dataset load_labeled(const RunConfig& cfg, std::string_view text_key,
                     std::string_view labels_key) {
  const std::string& text = require(cfg, text_key);
  const std::size_t K = cfg.get_size("num_classes");
  const std::string& labels = cfg.get(labels_key);
  return labels.empty() ? load_tsv(text, K) : load_dataset(text, labels, K);
}

void run_preprocess(const RunConfig& cfg, std::istream& in, std::ostream& out) {
  const Preprocessor pre = make_preprocessor(cfg);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out << pre.process_line(line) << '\n';
  }
}

NgramStats run_stats(const RunConfig& cfg, const LogFn& log) {
  NormalizeOptions opts = normalize_options(cfg);
  opts.spell_correct = false;
  opts.drop_hashtag_body = true;
  EmoticonLexicon lexicon;
  if (!cfg.get("emoticons").empty()) lexicon.load(cfg.get("emoticons"));
  const Preprocessor pre(nullptr, opts, std::move(lexicon));

  const auto lines = split_lines(read_file(require(cfg, "input")));
  std::vector<std::string> runs;
  for (const auto& l : lines) {
    std::string run;
    for (const auto& tok : tokens_of(pre, l)) {
      if (is_tag(tok)) {
        if (!run.empty()) runs.push_back(std::move(run));
        run.clear();
        continue;
      }
      if (!run.empty()) run += ' ';
      run += tok;
    }
    if (!run.empty()) runs.push_back(std::move(run));
  }
  NgramStats stats = build_ngram_stats(runs);
  stats.save(output_file(cfg));
  emit(log, "stats: " + std::to_string(lines.size()) + " lines, " +
                std::to_string(stats.total_tokens()) + " tokens, " +
                std::to_string(stats.vocab_size()) + " word types");
  return stats;
}

SgnsResult run_embed(const RunConfig& cfg, const LogFn& log) {
  const Preprocessor pre = make_preprocessor(cfg);
  const auto docs = tokenize_all(pre, split_lines(read_file(require(cfg, "input"))));
  const Vocabulary vocab = build_vocab(docs, cfg.get_size("min_count"));
  std::vector<std::vector<std::size_t>> corpus;
  corpus.reserve(docs.size());
  for (const auto& d : docs) corpus.push_back(vocab.encode(d));

  SgnsConfig sc;
  sc.dim = cfg.get_size("embed_dim");
  sc.window = cfg.get_size("window");
  sc.negatives = cfg.get_size("negatives");
  sc.epochs = cfg.get_size("sgns_epochs");
  sc.lr_start = cfg.get_double("sgns_lr_start");
  sc.lr_end = cfg.get_double("sgns_lr_end");
  sc.subsample = cfg.get_double("subsample");
  sc.seed = cfg.get_u64("seed");
  sc.validate();

  const fs::path out = output_file(cfg);
  SgnsResult res = train_sgns(corpus, vocab, sc);
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) {
    emit(log, "embed epoch " + std::to_string(e + 1) + " loss " + fmt(res.epoch_loss[e]));
  }
  save_embeddings(res.matrix, vocab, out);
  emit(log, "embed: " + std::to_string(vocab.size()) + " words x " +
                std::to_string(sc.dim) + " -> " + out.string());
  return res;
}

TrainHistory run_train(const RunConfig& cfg, const LogFn& log) {
  const Preprocessor pre = make_preprocessor(cfg);
  const ModelConfig mc = model_config(cfg);
  const TrainConfig tc = train_config(cfg);
  const Dataset train = load_labeled(cfg, "train_text", "train_labels");
  const Dataset val = load_labeled(cfg, "val_text", "val_labels");

  std::vector<std::vector<std::string>> docs;
  for (const auto& ex : train.examples) docs.push_back(tokens_of(pre, ex.text));
  WordVectors pretrained;
  Classifier clf;
  clf.config = mc;
  clf.vocab = encode_vocab_for_train(cfg, docs, &pretrained);

  ModelParams init(mc, clf.vocab.size(), tc.seed);
  if (!pretrained.vectors.empty()) {
    if (pretrained.dim() != mc.embed_dim) {
      throw_invalid("embeddings have dimension " + std::to_string(pretrained.dim()) +
                    " but embed_dim is " + std::to_string(mc.embed_dim));
    }
    init.embedding.value = pretrained.vectors;
    init.embedding.grad = Tensor::zeros_like(init.embedding.value);
  }

  const EncodedSet train_set = encode_dataset(pre, clf.vocab, train);
  const EncodedSet val_set = encode_dataset(pre, clf.vocab, val);
  const std::string& weighting = cfg.get("class_weighting");
  ClassWeights weights;
  if (weighting == "inverse") {
    weights = class_weights(class_distribution(train));
  } else if (weighting == "none") {
    weights = uniform_weights(mc.num_classes);
  } else {
    throw_invalid("class_weighting must be inverse or none, got '" + weighting + "'");
  }

  const fs::path dir = output_dir(cfg);
  std::string log_text;
  FitHooks hooks;
  hooks.on_epoch = [&](std::size_t epoch, const TrainHistory& h) {
    const std::string line = format_epoch_line(epoch + 1, h.train_loss.back(),
                                               h.val_loss.back(), h.val_macro_f1.back());
    log_text += line + '\n';
    write_file(dir / "train.log", log_text);
    emit(log, "epoch " + line);
  };
  hooks.on_best = [&](std::size_t, const ModelParams& p) {
    clf.params = p;
    clf.save(dir / "model.ckpt");
  };
  emit(log, "train: " + std::to_string(train_set.size()) + " train / " +
                std::to_string(val_set.size()) + " val examples, vocabulary " +
                std::to_string(clf.vocab.size()));
  FitResult res = fit(init, mc, train_set, val_set, weights, tc, hooks);
  clf.params = std::move(res.params);
  clf.save(dir / "model.ckpt");
  emit(log, "train: best epoch " + std::to_string(res.history.best_epoch + 1) +
                ", val loss " + fmt(res.history.val_loss[res.history.best_epoch]));
  return res.history;
}

Metrics run_eval(const RunConfig& cfg, const LogFn& log) {
  Classifier clf = Classifier::load(require(cfg, "model"));
  const Preprocessor pre = make_preprocessor(cfg);
  const Dataset d = load_labeled(cfg, "text", "labels");
  if (d.num_classes != clf.config.num_classes) {
    throw_invalid("num_classes does not match the model");
  }
  const EncodedSet set = encode_dataset(pre, clf.vocab, d);
  const auto preds = predict(set.seqs, clf.params, clf.config, cfg.get_size("batch_size"));
  std::vector<std::size_t> labels;
  for (const auto& p : preds) labels.push_back(p.label);
  const ConfusionMatrix cm = confusion(labels, set.labels, clf.config.num_classes);
  const Metrics m = metrics_from_confusion(cm);
  write_metrics(m, cm, output_dir(cfg));
  emit(log, "eval: accuracy " + fmt(m.accuracy) + ", macro_f1 " + fmt(m.macro_f1));
  return m;
}

std::vector<Prediction> run_predict(const RunConfig& cfg, const LogFn& log) {
  Classifier clf = Classifier::load(require(cfg, "model"));
  const Preprocessor pre = make_preprocessor(cfg);
  const std::size_t K = clf.config.num_classes;

  std::vector<std::string> texts;
  std::vector<std::size_t> golds;
  if (!cfg.get("labels").empty()) {
    const Dataset d = load_dataset(require(cfg, "text"), cfg.get("labels"), K);
    for (const auto& ex : d.examples) {
      texts.push_back(ex.text);
      golds.push_back(ex.label);
    }
  } else {
    texts = split_lines(read_file(require(cfg, "text")));
  }
  std::vector<std::vector<std::string>> docs;
  std::vector<std::vector<std::size_t>> seqs;
  for (const auto& t : texts) {
    auto toks = tokens_of(pre, t);
    if (toks.empty()) toks.emplace_back(Vocabulary::kUnkToken);
    seqs.push_back(clf.vocab.encode(toks));
    docs.push_back(std::move(toks));
  }
  auto preds = predict(seqs, clf.params, clf.config, cfg.get_size("batch_size"));

  const fs::path dir = output_dir(cfg);
  std::string out;
  for (const auto& p : preds) {
    out += std::to_string(p.label) + '\t';
    append_double(out, p.probs[p.label]);
    out += '\n';
  }
  write_file(dir / "predictions.tsv", out);

  if (!cfg.get("heatmaps").empty()) {
    const fs::path hdir = cfg.get("heatmaps");
    fs::create_directories(hdir);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const std::string gold = golds.empty() ? "?" : std::to_string(golds[i]);
      char name[32];
      std::snprintf(name, sizeof name, "example_%05zu.html", i + 1);
      write_file(hdir / name,
                 render_attention_html(docs[i], preds[i].attention.weights,
                                       std::to_string(preds[i].label), gold));
    }
    emit(log, "predict: wrote " + std::to_string(preds.size()) + " heatmaps to " +
                  hdir.string());
  }
  emit(log, "predict: " + std::to_string(preds.size()) + " predictions");
  return preds;
}

Metrics run_baseline(const RunConfig& cfg, const LogFn& log) {
  const Preprocessor pre = make_preprocessor(cfg);
  const BaselineConfig bc = baseline_config(cfg);
  const Dataset train = load_labeled(cfg, "train_text", "train_labels");
  const Dataset test = load_labeled(cfg, "text", "labels");
  const std::size_t K = cfg.get_size("num_classes");
  std::vector<std::vector<std::string>> train_docs, test_docs;
  std::vector<std::size_t> train_y, test_y;
  for (const auto& ex : train.examples) {
    train_docs.push_back(tokens_of(pre, ex.text));
    train_y.push_back(ex.label);
  }
  for (const auto& ex : test.examples) {
    test_docs.push_back(tokens_of(pre, ex.text));
    test_y.push_back(ex.label);
  }

  const fs::path dir = output_dir(cfg);
  const std::string& features = cfg.get("features");
  std::vector<std::size_t> preds;
  if (features == "bow") {
    const TfidfModel tfidf = TfidfModel::fit(train_docs);
    const SvmModel svm = svm_train(tfidf.transform(train_docs), train_y, tfidf.dim(), K, bc);
    preds = svm_predict(tfidf.transform(test_docs), svm);
    write_file(dir / "svm.txt", svm.serialize());
    write_file(dir / "tfidf.tsv", tfidf.serialize());
  } else if (features == "nbow") {
    const WordVectors wv = load_embeddings(require(cfg, "embeddings"));
    const SvmModel svm = svm_train(nbow_features(train_docs, wv), train_y, K, bc);
    preds = svm_predict(nbow_features(test_docs, wv), svm);
    write_file(dir / "svm.txt", svm.serialize());
  } else {
    throw_invalid("features must be bow or nbow, got '" + features + "'");
  }
  const ConfusionMatrix cm = confusion(preds, test_y, K);
  const Metrics m = metrics_from_confusion(cm);
  write_metrics(m, cm, dir);
  emit(log, "baseline " + features + ": accuracy " + fmt(m.accuracy) + ", macro_f1 " +
                fmt(m.macro_f1));
  return m;
}

RunConfig apply_trial(const RunConfig& cfg, const TrialConfig& t) {
  RunConfig out = cfg;
  std::string lr;
  append_double(lr, t.train.adam.lr);
  out.set("lr", lr);
  out.set("hidden_size", std::to_string(t.model.hidden_size));
  out.set("batch_size", std::to_string(t.train.batch_size));
  const auto num = [](double v) {
    std::string s;
    append_double(s, v);
    return s;
  };
  out.set("noise_sigma", num(t.model.noise_sigma));
  out.set("dropout_embed", num(t.model.dropout_embed));
  out.set("dropout_rnn", num(t.model.dropout_rnn));
  return out;
}

SearchResult run_search(const RunConfig& cfg, const LogFn& log) {
  const Preprocessor pre = make_preprocessor(cfg);
  const SearchSpace space = search_space(cfg);
  TrialConfig base{model_config(cfg), train_config(cfg)};
  const Dataset train = load_labeled(cfg, "train_text", "train_labels");
  const Dataset val = load_labeled(cfg, "val_text", "val_labels");
  std::vector<std::vector<std::string>> docs;
  for (const auto& ex : train.examples) docs.push_back(tokens_of(pre, ex.text));
  WordVectors pretrained;
  const Vocabulary vocab = encode_vocab_for_train(cfg, docs, &pretrained);
  if (!pretrained.vectors.empty() && pretrained.dim() != base.model.embed_dim) {
    throw_invalid("embeddings dimension does not match embed_dim");
  }
  const EncodedSet train_set = encode_dataset(pre, vocab, train);
  const EncodedSet val_set = encode_dataset(pre, vocab, val);
  const ClassWeights weights = cfg.get("class_weighting") == "none"
                                   ? uniform_weights(base.model.num_classes)
                                   : class_weights(class_distribution(train));

  const fs::path dir = output_dir(cfg);
  std::string trial_log = "trial\tlr\thidden_size\tbatch_size\tnoise_sigma\tdropout_embed\tdropout_rnn\tval_loss\n";
  std::size_t n = 0;
  const auto objective = [&](const TrialConfig& t) {
    ModelParams init(t.model, vocab.size(), t.train.seed);
    if (!pretrained.vectors.empty()) init.embedding.value = pretrained.vectors;
    double loss = std::nan("");
    try {
      const FitResult r = fit(init, t.model, train_set, val_set, weights, t.train);
      loss = r.history.val_loss[r.history.best_epoch];
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kRuntime) throw;
      emit(log, std::string("search: trial diverged: ") + e.what());
    }
    const RunConfig rc = apply_trial(cfg, t);
    trial_log += std::to_string(++n) + '\t' + rc.get("lr") + '\t' + rc.get("hidden_size") +
                 '\t' + rc.get("batch_size") + '\t' + rc.get("noise_sigma") + '\t' +
                 rc.get("dropout_embed") + '\t' + rc.get("dropout_rnn") + '\t' + fmt(loss) + '\n';
    write_file(dir / "trials.tsv", trial_log);
    emit(log, "search trial " + std::to_string(n) + " lr " + rc.get("lr") + " val_loss " + fmt(loss));
    return loss;
  };
  SearchResult res = random_search(space, base, cfg.get_size("search_budget"),
                                   cfg.get_u64("seed"), objective);
  apply_trial(cfg, res.best).save(dir / "best.cfg");
  emit(log, "search: best trial " + std::to_string(res.best_index + 1));
  return res;
}

}  // namespace emopred
