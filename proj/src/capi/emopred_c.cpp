#include "emopred/emopred.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <mutex>
#include <new>
#include <sstream>
#include <string>

#include "json.hpp"

#include "emopred/error.hpp"
#include "emopred/pipeline.hpp"

struct emopred_config {
  emopred::RunConfig cfg;
};

struct emopred_stats {
  emopred::NgramStats stats;
};

struct emopred_preprocessor {
  emopred::Preprocessor pre;
};

struct emopred_model {
  emopred::Classifier clf;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
emopred_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void log_message(std::string_view msg) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  const std::string s(msg);
  if (g_log_fn) {
    g_log_fn(s.c_str(), g_log_user);
  } else {
    std::cerr << s << '\n';
  }
}

emopred_status fail(emopred_status status, const std::string& msg) {
  g_last_error = msg;
  return status;
}

emopred_status map_code(emopred::ErrorCode c) {
  switch (c) {
    case emopred::ErrorCode::kInvalidArgument: return EMOPRED_ERR_INVALID_ARGUMENT;
    case emopred::ErrorCode::kIo: return EMOPRED_ERR_IO;
    case emopred::ErrorCode::kFormat: return EMOPRED_ERR_FORMAT;
    case emopred::ErrorCode::kRuntime: return EMOPRED_ERR_RUNTIME;
  }
  return EMOPRED_ERR_INTERNAL;
}

template <typename F>
emopred_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return EMOPRED_OK;
  } catch (const emopred::Error& e) {
    return fail(map_code(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(EMOPRED_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(EMOPRED_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(EMOPRED_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) emopred::throw_invalid(std::string(what) + " must not be NULL");
}

std::vector<std::string> split_spaces(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

constexpr const char* kCommands[] = {"stats",    "embed",  "train", "eval", "predict",
                                     "baseline", "search", nullptr};

nlohmann::json metrics_summary(const emopred::Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"macro_precision", m.macro_precision},
          {"macro_recall", m.macro_recall},
          {"macro_f1", m.macro_f1},
          {"count", m.count}};
}

nlohmann::json run_command(const std::string& cmd, const emopred::RunConfig& cfg) {
  using namespace emopred;
  const LogFn log = log_message;
  nlohmann::json j;
  j["command"] = cmd;
  if (cmd == "stats") {
    const NgramStats s = run_stats(cfg, log);
    j["total_tokens"] = s.total_tokens();
    j["vocab_size"] = s.vocab_size();
  } else if (cmd == "embed") {
    const SgnsResult r = run_embed(cfg, log);
    j["epoch_loss"] = r.epoch_loss;
    j["vocab_size"] = r.matrix.input.rows();
  } else if (cmd == "train") {
    const TrainHistory h = run_train(cfg, log);
    j["train_loss"] = h.train_loss;
    j["val_loss"] = h.val_loss;
    j["val_macro_f1"] = h.val_macro_f1;
    j["best_epoch"] = h.best_epoch + 1;
  } else if (cmd == "eval") {
    j["metrics"] = metrics_summary(run_eval(cfg, log));
  } else if (cmd == "predict") {
    std::vector<std::size_t> labels;
    for (const auto& p : run_predict(cfg, log)) labels.push_back(p.label);
    j["labels"] = labels;
  } else if (cmd == "baseline") {
    j["metrics"] = metrics_summary(run_baseline(cfg, log));
  } else if (cmd == "search") {
    const SearchResult r = run_search(cfg, log);
    j["best_trial"] = r.best_index + 1;
    std::vector<double> objectives;
    for (const auto& t : r.trials) objectives.push_back(t.objective);
    j["objectives"] = objectives;
  } else {
    throw_invalid("unknown command '" + cmd + "'");
  }
  return j;
}

}  // namespace

extern "C" {

const char* emopred_version(void) { return "1.0.0"; }

const char* emopred_status_string(emopred_status status) {
  switch (status) {
    case EMOPRED_OK: return "ok";
    case EMOPRED_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EMOPRED_ERR_IO: return "i/o error";
    case EMOPRED_ERR_FORMAT: return "format error";
    case EMOPRED_ERR_RUNTIME: return "runtime error";
    case EMOPRED_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* emopred_last_error(void) { return g_last_error.c_str(); }

void emopred_string_free(char* s) { std::free(s); }

void emopred_set_log_handler(emopred_log_fn fn, void* user_data) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user_data;
}

emopred_status emopred_config_create(emopred_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new emopred_config();
  });
}

void emopred_config_free(emopred_config* cfg) { delete cfg; }

emopred_status emopred_config_load_file(emopred_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    cfg->cfg.load_file(path);
  });
}

emopred_status emopred_config_set(emopred_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

emopred_status emopred_config_set_assignment(emopred_config* cfg, const char* assignment) {
  return guarded([&] {
    require(cfg, "cfg");
    require(assignment, "assignment");
    cfg->cfg.set_assignment(assignment);
  });
}

emopred_status emopred_config_get(const emopred_config* cfg, const char* key, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(out, "out");
    *out = dup_string(cfg->cfg.get(key));
  });
}

emopred_status emopred_config_dump(const emopred_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup_string(cfg->cfg.dump());
  });
}

emopred_status emopred_stats_load(const char* path, emopred_stats** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new emopred_stats{emopred::NgramStats::load(path)};
  });
}

emopred_status emopred_stats_from_text(const char* corpus, emopred_stats** out) {
  return guarded([&] {
    require(corpus, "corpus");
    require(out, "out");
    *out = new emopred_stats{emopred::build_ngram_stats(emopred::split_lines(corpus))};
  });
}

emopred_status emopred_stats_save(const emopred_stats* stats, const char* path) {
  return guarded([&] {
    require(stats, "stats");
    require(path, "path");
    stats->stats.save(path);
  });
}

void emopred_stats_free(emopred_stats* stats) { delete stats; }

emopred_status emopred_stats_total_tokens(const emopred_stats* stats, uint64_t* out) {
  return guarded([&] {
    require(stats, "stats");
    require(out, "out");
    *out = stats->stats.total_tokens();
  });
}

emopred_status emopred_segment(const emopred_stats* stats, const char* text, char** out,
                               double* score) {
  return guarded([&] {
    require(stats, "stats");
    require(text, "text");
    require(out, "out");
    const emopred::Segmentation seg = emopred::viterbi_segment(text, stats->stats);
    std::string joined;
    for (const auto& p : seg.parts) {
      if (!joined.empty()) joined += ' ';
      joined += p;
    }
    *out = dup_string(joined);
    if (score) *score = seg.score;
  });
}

emopred_status emopred_spell_correct(const emopred_stats* stats, const char* word,
                                     int max_edits, char** out) {
  return guarded([&] {
    require(stats, "stats");
    require(word, "word");
    require(out, "out");
    if (max_edits < 0) emopred::throw_invalid("max_edits must be 1 or 2");
    *out = dup_string(emopred::spell_correct(word, stats->stats,
                                             static_cast<std::size_t>(max_edits)));
  });
}

emopred_status emopred_preprocessor_create(const emopred_config* cfg,
                                           emopred_preprocessor** out) {
  return guarded([&] {
    require(out, "out");
    const emopred::RunConfig defaults;
    *out = new emopred_preprocessor{emopred::make_preprocessor(cfg ? cfg->cfg : defaults)};
  });
}

void emopred_preprocessor_free(emopred_preprocessor* pre) { delete pre; }

emopred_status emopred_preprocess(const emopred_preprocessor* pre, const char* text,
                                  char** out) {
  return guarded([&] {
    require(pre, "pre");
    require(text, "text");
    require(out, "out");
    *out = dup_string(pre->pre.process_line(text));
  });
}

emopred_status emopred_model_load(const char* path, emopred_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new emopred_model{emopred::Classifier::load(path)};
  });
}

void emopred_model_free(emopred_model* model) { delete model; }

size_t emopred_model_num_classes(const emopred_model* model) {
  return model ? model->clf.config.num_classes : 0;
}

emopred_status emopred_model_predict(emopred_model* model, const emopred_preprocessor* pre,
                                     const char* text, size_t* label, double* probs,
                                     size_t probs_len) {
  return guarded([&] {
    require(model, "model");
    require(text, "text");
    require(label, "label");
    auto tokens = pre ? pre->pre.process(text).tokens : split_spaces(text);
    auto ids = model->clf.vocab.encode(tokens);
    if (ids.empty()) ids.push_back(emopred::Vocabulary::kUnk);
    const auto preds = emopred::predict({ids}, model->clf.params, model->clf.config, 1);
    *label = preds[0].label;
    if (probs) {
      const std::size_t n = std::min(probs_len, preds[0].probs.size());
      std::copy_n(preds[0].probs.begin(), n, probs);
    }
  });
}

emopred_status emopred_run(const char* command, const emopred_config* cfg, char** summary) {
  return guarded([&] {
    require(command, "command");
    require(cfg, "cfg");
    const nlohmann::json j = run_command(command, cfg->cfg);
    if (summary) *summary = dup_string(j.dump());
  });
}

const char* const* emopred_commands(void) { return kCommands; }

}  // extern "C"
