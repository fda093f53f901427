#include "emopred/eval_report.hpp"

#include <algorithm>
#include <cstdio>
#include "json.hpp"

#include "emopred/data_io.hpp"
#include "emopred/embeddings.hpp"
#include "emopred/error.hpp"

namespace emopred {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_inputs(std::span<const std::size_t> preds,
                  std::span<const std::size_t> golds, std::size_t K) {
  if (preds.size() != golds.size()) {
    throw_invalid("metrics: " + std::to_string(preds.size()) + " predictions vs " +
                  std::to_string(golds.size()) + " gold labels");
  }
  if (preds.empty()) throw_invalid("metrics: no examples");
  if (K == 0) throw_invalid("metrics: K must be >= 1");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= K || golds[i] >= K) {
      throw_invalid("metrics: label out of range at example " + std::to_string(i));
    }
  }
}

std::string format_number(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (auto v : row) n += v;
  }
  return n;
}

std::size_t ConfusionMatrix::gold_count(std::size_t c) const {
  std::size_t n = 0;
  for (auto v : counts.at(c)) n += v;
  return n;
}

std::size_t ConfusionMatrix::predicted_count(std::size_t c) const {
  std::size_t n = 0;
  for (const auto& row : counts) n += row.at(c);
  return n;
}

ConfusionMatrix confusion(std::span<const std::size_t> preds,
                          std::span<const std::size_t> golds, std::size_t K) {
  check_inputs(preds, golds, K);
  ConfusionMatrix cm;
  cm.num_classes = K;
  cm.counts.assign(K, std::vector<std::size_t>(K, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) ++cm.counts[golds[i]][preds[i]];
  return cm;
}

Metrics metrics_from_confusion(const ConfusionMatrix& cm) {
  const std::size_t K = cm.num_classes;
  Metrics m;
  m.count = cm.total();
  if (m.count == 0) throw_invalid("metrics: empty confusion matrix");
  m.per_class.resize(K);
  std::size_t correct = 0;
  for (std::size_t c = 0; c < K; ++c) {
    const std::size_t tp = cm.counts[c][c];
    correct += tp;
    ClassScores& s = m.per_class[c];
    s.support = cm.gold_count(c);
    s.precision = ratio(tp, cm.predicted_count(c));
    s.recall = ratio(tp, s.support);
    const double pr = s.precision + s.recall;
    s.f1 = pr == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / pr;
    m.macro_precision += s.precision;
    m.macro_recall += s.recall;
    m.macro_f1 += s.f1;
  }
  m.macro_precision /= static_cast<double>(K);
  m.macro_recall /= static_cast<double>(K);
  m.macro_f1 /= static_cast<double>(K);
  m.accuracy = ratio(correct, m.count);
  return m;
}

Metrics compute_metrics(std::span<const std::size_t> preds,
                        std::span<const std::size_t> golds, std::size_t K) {
  return metrics_from_confusion(confusion(preds, golds, K));
}

std::string metrics_tsv(const Metrics& m) {
  std::string out;
  const auto line = [&](const std::string& key, const std::string& value) {
    out += key;
    out += '\t';
    out += value;
    out += '\n';
  };
  line("count", std::to_string(m.count));
  line("accuracy", format_number(m.accuracy));
  line("macro_precision", format_number(m.macro_precision));
  line("macro_recall", format_number(m.macro_recall));
  line("macro_f1", format_number(m.macro_f1));
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const std::string p = "class_" + std::to_string(c) + "_";
    line(p + "precision", format_number(m.per_class[c].precision));
    line(p + "recall", format_number(m.per_class[c].recall));
    line(p + "f1", format_number(m.per_class[c].f1));
    line(p + "support", std::to_string(m.per_class[c].support));
  }
  return out;
}

std::string metrics_json(const Metrics& m) {
  nlohmann::json j;
  j["count"] = m.count;
  j["accuracy"] = m.accuracy;
  j["macro_precision"] = m.macro_precision;
  j["macro_recall"] = m.macro_recall;
  j["macro_f1"] = m.macro_f1;
  j["per_class"] = nlohmann::json::array();
  for (const auto& s : m.per_class) {
    j["per_class"].push_back({{"precision", s.precision},
                              {"recall", s.recall},
                              {"f1", s.f1},
                              {"support", s.support}});
  }
  return j.dump(2) + "\n";
}

std::string confusion_tsv(const ConfusionMatrix& cm) {
  std::string out = "gold\\pred";
  for (std::size_t c = 0; c < cm.num_classes; ++c) out += '\t' + std::to_string(c);
  out += '\n';
  for (std::size_t g = 0; g < cm.num_classes; ++g) {
    out += std::to_string(g);
    for (auto v : cm.counts[g]) out += '\t' + std::to_string(v);
    out += '\n';
  }
  return out;
}

void write_metrics(const Metrics& m, const ConfusionMatrix& cm,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "metrics.tsv", metrics_tsv(m));
  write_file(dir / "metrics.json", metrics_json(m));
  write_file(dir / "confusion.tsv", confusion_tsv(cm));
}

std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::vector<double> attention_opacities(std::span<const double> weights) {
  if (weights.empty()) return {};
  const double peak = *std::max_element(weights.begin(), weights.end());
  std::vector<double> out(weights.size(), 0.0);
  if (peak <= 0.0) return out;
  for (std::size_t i = 0; i < weights.size(); ++i) out[i] = weights[i] / peak;
  return out;
}

std::string render_attention_html(const std::vector<std::string>& tokens,
                                  std::span<const double> weights,
                                  std::string_view predicted,
                                  std::string_view gold) {
  if (tokens.size() != weights.size()) {
    throw_invalid("heatmap: " + std::to_string(tokens.size()) + " tokens vs " +
                  std::to_string(weights.size()) + " weights");
  }
  const auto opacity = attention_opacities(weights);
  std::string out =
      "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
      "<title>attention</title>\n<style>\n"
      "body { font-family: sans-serif; }\n"
      ".tok { padding: 2px 3px; margin: 1px; display: inline-block; }\n"
      "</style>\n</head>\n<body>\n";
  out += "<p class=\"labels\">predicted: <b>" + html_escape(predicted) +
         "</b> gold: <b>" + html_escape(gold) + "</b></p>\n<p>";
  char buf[64];
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.4f", opacity[i]);
    out += "<span class=\"tok\" style=\"background-color: rgba(255, 0, 0, ";
    out += buf;
    out += ")\" title=\"";
    std::snprintf(buf, sizeof buf, "%.6f", weights[i]);
    out += buf;
    out += "\">" + html_escape(tokens[i]) + "</span>";
    if (i + 1 < tokens.size()) out += ' ';
  }
  out += "</p>\n</body>\n</html>\n";
  return out;
}

}  // namespace emopred
