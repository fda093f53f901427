#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace emopred {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;

  friend bool operator==(const ClassScores&, const ClassScores&) = default;
};

struct Metrics {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::size_t count = 0;
  std::vector<ClassScores> per_class;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// counts[gold][predicted]
struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
  std::size_t gold_count(std::size_t c) const;
  std::size_t predicted_count(std::size_t c) const;
};

// 0/0 is taken as 0; macro averages run over all K classes.
Metrics compute_metrics(std::span<const std::size_t> preds,
                        std::span<const std::size_t> golds, std::size_t K);
ConfusionMatrix confusion(std::span<const std::size_t> preds,
                          std::span<const std::size_t> golds, std::size_t K);
Metrics metrics_from_confusion(const ConfusionMatrix& cm);

// "key TAB value" lines.
std::string metrics_tsv(const Metrics& m);
std::string metrics_json(const Metrics& m);
std::string confusion_tsv(const ConfusionMatrix& cm);
void write_metrics(const Metrics& m, const ConfusionMatrix& cm,
                   const std::filesystem::path& dir);

std::string html_escape(std::string_view s);
// a_i / max_j a_j
std::vector<double> attention_opacities(std::span<const double> weights);
std::string render_attention_html(const std::vector<std::string>& tokens,
                                  std::span<const double> weights,
                                  std::string_view predicted,
                                  std::string_view gold);

}  // namespace emopred
