#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "emopred/baselines.hpp"
#include "emopred/config.hpp"
#include "emopred/data_io.hpp"
#include "emopred/eval_report.hpp"
#include "emopred/model.hpp"
#include "emopred/preprocess.hpp"
#include "emopred/segment.hpp"
#include "emopred/train.hpp"

namespace emopred {

using LogFn = std::function<void(std::string_view)>;

// Commands read every setting from the config. Outputs named by `output`
// are written together with the resolved config: "<file>.run.cfg" next to
// a file output, "run.cfg" inside a directory output.

NormalizeOptions normalize_options(const RunConfig& cfg);
Preprocessor make_preprocessor(const RunConfig& cfg);
ModelConfig model_config(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
SearchSpace search_space(const RunConfig& cfg);
BaselineConfig baseline_config(const RunConfig& cfg);

std::vector<std::string> tokens_of(const Preprocessor& pre, std::string_view text);
std::vector<std::vector<std::string>> tokenize_all(const Preprocessor& pre,
                                                   const std::vector<std::string>& lines);
// Unknown tokens map to <unk>; an empty token list becomes a single <unk>.
EncodedSet encode_dataset(const Preprocessor& pre, const Vocabulary& vocab,
                          const Dataset& d);

// Text with a parallel labels file, or "text TAB label" lines when no labels
// path is configured.
Dataset load_labeled(const RunConfig& cfg, std::string_view text_key,
                     std::string_view labels_key);

// One processed line per input line.
void run_preprocess(const RunConfig& cfg, std::istream& in, std::ostream& out);
// Counts words of the processed input corpus with hashtag contents removed.
NgramStats run_stats(const RunConfig& cfg, const LogFn& log);
SgnsResult run_embed(const RunConfig& cfg, const LogFn& log);
TrainHistory run_train(const RunConfig& cfg, const LogFn& log);
Metrics run_eval(const RunConfig& cfg, const LogFn& log);
std::vector<Prediction> run_predict(const RunConfig& cfg, const LogFn& log);
Metrics run_baseline(const RunConfig& cfg, const LogFn& log);
SearchResult run_search(const RunConfig& cfg, const LogFn& log);

// Applies a trial's sampled values onto `cfg`.
RunConfig apply_trial(const RunConfig& cfg, const TrialConfig& trial);

}  // namespace emopred
