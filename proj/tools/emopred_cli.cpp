// Command-line front end. Talks to the library only through emopred.h.
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emopred/emopred.h"

namespace {

struct ConfigDeleter {
  void operator()(emopred_config* c) const { emopred_config_free(c); }
};
using ConfigPtr = std::unique_ptr<emopred_config, ConfigDeleter>;

struct RuntimeFailure {
  std::string message;
};

void check(emopred_status s) {
  if (s != EMOPRED_OK) {
    throw RuntimeFailure{std::string(emopred_status_string(s)) + ": " + emopred_last_error()};
  }
}

// Options shared by every subcommand plus the per-command flags that map
// onto config keys.
struct CommandOptions {
  std::string config_file;
  std::vector<std::string> assignments;
  std::map<std::string, std::string> flags;
};

void add_flag(CLI::App* cmd, CommandOptions& opts, const std::string& flag,
              const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&opts, key](const std::string& v) { opts.flags[key] = v; }, help);
}

void add_common(CLI::App* cmd, CommandOptions& opts) {
  cmd->add_option("--config", opts.config_file, "flat 'key = value' config file");
  cmd->add_option("--set", opts.assignments, "override a config key (key=value)")
      ->type_name("KEY=VALUE");
  add_flag(cmd, opts, "--stats", "stats", "n-gram statistics file");
  add_flag(cmd, opts, "--emoticons", "emoticons", "extra emoticon lexicon (surface TAB tag)");
}

ConfigPtr resolve(const CommandOptions& opts) {
  emopred_config* raw = nullptr;
  check(emopred_config_create(&raw));
  ConfigPtr cfg(raw);
  if (!opts.config_file.empty()) check(emopred_config_load_file(cfg.get(), opts.config_file.c_str()));
  for (const auto& a : opts.assignments) check(emopred_config_set_assignment(cfg.get(), a.c_str()));
  for (const auto& [k, v] : opts.flags) check(emopred_config_set(cfg.get(), k.c_str(), v.c_str()));
  return cfg;
}

int run_preprocess(const CommandOptions& opts) {
  ConfigPtr cfg = resolve(opts);
  emopred_preprocessor* pre = nullptr;
  check(emopred_preprocessor_create(cfg.get(), &pre));
  std::unique_ptr<emopred_preprocessor, void (*)(emopred_preprocessor*)> guard(
      pre, emopred_preprocessor_free);
  std::string line;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    char* out = nullptr;
    check(emopred_preprocess(pre, line.c_str(), &out));
    std::cout << out << '\n';
    emopred_string_free(out);
  }
  std::cout.flush();
  return 0;
}

int run_command(const std::string& name, const CommandOptions& opts) {
  ConfigPtr cfg = resolve(opts);
  check(emopred_run(name.c_str(), cfg.get(), nullptr));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emopred: emoji prediction from tweet text"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::map<std::string, CommandOptions> opts;
  const auto sub = [&](const std::string& name, const std::string& help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, opts[name]);
    return cmd;
  };
  const auto seeded = [&](CLI::App* cmd, const std::string& name) {
    add_flag(cmd, opts[name], "--seed", "seed", "random seed");
  };

  sub("preprocess", "normalize tweets from standard input");

  CLI::App* stats = sub("stats", "build word statistics from a raw corpus");
  add_flag(stats, opts["stats"], "--input", "input", "corpus, one tweet per line");
  add_flag(stats, opts["stats"], "--output", "output", "statistics file to write");

  CLI::App* embed = sub("embed", "train skip-gram embeddings");
  add_flag(embed, opts["embed"], "--input", "input", "corpus, one tweet per line");
  add_flag(embed, opts["embed"], "--output", "output", "embeddings file to write");
  add_flag(embed, opts["embed"], "--dim", "embed_dim", "vector dimension");
  add_flag(embed, opts["embed"], "--epochs", "sgns_epochs", "passes over the corpus");
  seeded(embed, "embed");

  CLI::App* train = sub("train", "fit the BiLSTM attention classifier");
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{
           {"--train-text", "train_text"},
           {"--train-labels", "train_labels"},
           {"--val-text", "val_text"},
           {"--val-labels", "val_labels"},
           {"--embeddings", "embeddings"},
           {"--output", "output"},
           {"--epochs", "max_epochs"}}) {
    add_flag(train, opts["train"], flag, key, key);
  }
  train->add_option_function<std::string>(
           "--attention", [&](const std::string& v) { opts["train"].flags["attention"] = v; },
           "attention variant")
      ->check(CLI::IsMember({"last_state", "plain", "context"}));
  seeded(train, "train");

  CLI::App* eval = sub("eval", "score a trained model");
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{
           {"--model", "model"}, {"--text", "text"}, {"--labels", "labels"}, {"--output", "output"}}) {
    add_flag(eval, opts["eval"], flag, key, key);
  }

  CLI::App* predict = sub("predict", "label tweets with a trained model");
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{
           {"--model", "model"},
           {"--text", "text"},
           {"--labels", "labels"},
           {"--output", "output"},
           {"--heatmaps", "heatmaps"}}) {
    add_flag(predict, opts["predict"], flag, key, key);
  }

  CLI::App* baseline = sub("baseline", "train and score a bag-of-words SVM");
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{
           {"--train-text", "train_text"},
           {"--train-labels", "train_labels"},
           {"--text", "text"},
           {"--labels", "labels"},
           {"--embeddings", "embeddings"},
           {"--output", "output"}}) {
    add_flag(baseline, opts["baseline"], flag, key, key);
  }
  baseline->add_option_function<std::string>(
              "--features", [&](const std::string& v) { opts["baseline"].flags["features"] = v; },
              "feature type")
      ->check(CLI::IsMember({"bow", "nbow"}));
  seeded(baseline, "baseline");

  CLI::App* search = sub("search", "random hyper-parameter search");
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{
           {"--train-text", "train_text"},
           {"--train-labels", "train_labels"},
           {"--val-text", "val_text"},
           {"--val-labels", "val_labels"},
           {"--embeddings", "embeddings"},
           {"--output", "output"},
           {"--budget", "search_budget"},
           {"--epochs", "max_epochs"}}) {
    add_flag(search, opts["search"], flag, key, key);
  }
  seeded(search, "search");

  if (argc > 1 && argv[1][0] != '-') {
    const std::string first = argv[1];
    bool known = false;
    for (const CLI::App* cmd : app.get_subcommands({})) known = known || cmd->get_name() == first;
    if (!known) {
      std::cerr << "error: unknown subcommand '" << first << "'\n\n" << app.help();
      return 2;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    for (CLI::App* cmd : app.get_subcommands()) {
      const std::string name = cmd->get_name();
      if (name == "preprocess") return run_preprocess(opts[name]);
      return run_command(name, opts[name]);
    }
  } catch (const RuntimeFailure& f) {
    std::cerr << "emopred: " << f.message << '\n';
    return 1;
  }
  return 2;
}
