#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "emopred/error.hpp"
#include "emopred/eval_report.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace emopred;

namespace {

using Labels = std::vector<std::size_t>;
using Rng = std::mt19937_64;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Metrics, Perfect) {
  const Labels x = {0, 2, 1, 1, 2};
  const Metrics m = compute_metrics(x, x, 3);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.macro_precision, 1.0);
  EXPECT_EQ(m.macro_recall, 1.0);
  EXPECT_EQ(m.macro_f1, 1.0);
  EXPECT_EQ(m.count, 5u);
}

TEST(Metrics, HandCase) {
  const Labels golds = {0, 0, 1, 1}, preds = {0, 1, 1, 1};
  const Metrics m = compute_metrics(preds, golds, 2);
  EXPECT_DOUBLE_EQ(m.per_class[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(m.per_class[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(m.per_class[0].f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.per_class[1].precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.per_class[1].recall, 1.0);
  EXPECT_DOUBLE_EQ(m.per_class[1].f1, 0.8);
  EXPECT_NEAR(m.macro_f1, 11.0 / 15.0, 1e-15);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  EXPECT_EQ(m.per_class[0].support, 2u);
}

TEST(Metrics, AbsentClassCounts) {
  const Labels x = {0, 1, 1};
  const Metrics m = compute_metrics(x, x, 3);
  EXPECT_EQ(m.per_class[2].precision, 0.0);
  EXPECT_EQ(m.per_class[2].recall, 0.0);
  EXPECT_EQ(m.per_class[2].f1, 0.0);
  EXPECT_NEAR(m.macro_f1, 2.0 / 3.0, 1e-15);
}

TEST(Metrics, Errors) {
  const Labels a = {0, 1}, b = {0};
  EXPECT_THROW(compute_metrics(a, b, 2), Error);
  EXPECT_THROW(compute_metrics(Labels{}, Labels{}, 2), Error);
  EXPECT_THROW(compute_metrics(Labels{5}, Labels{0}, 2), Error);
  EXPECT_THROW(confusion(a, b, 2), Error);
}

TEST(Confusion, HandCount) {
  const Labels golds = {0, 0, 1}, preds = {1, 0, 1};
  const ConfusionMatrix cm = confusion(preds, golds, 2);
  EXPECT_EQ(cm.counts, (std::vector<std::vector<std::size_t>>{{1, 1}, {0, 1}}));
  EXPECT_EQ(cm.total(), 3u);
  EXPECT_EQ(cm.gold_count(0), 2u);
  EXPECT_EQ(cm.predicted_count(1), 2u);
  EXPECT_EQ(confusion_tsv(cm), "gold\\pred\t0\t1\n0\t1\t1\n1\t0\t1\n");
}

TEST(Confusion, RandomProperties) {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t K = 2 + rng() % 5, n = 1 + rng() % 40;
    Labels p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng() % K;
      g[i] = rng() % K;
    }
    const ConfusionMatrix cm = confusion(p, g, K);
    EXPECT_EQ(cm.total(), n);
    for (std::size_t c = 0; c < K; ++c) {
      EXPECT_EQ(cm.gold_count(c), static_cast<std::size_t>(std::count(g.begin(), g.end(), c)));
    }
    const Metrics m = compute_metrics(p, g, K);
    EXPECT_EQ(metrics_from_confusion(cm), m);
    for (double v : {m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    const Metrics self = compute_metrics(g, g, K);
    EXPECT_EQ(self.accuracy, 1.0);

    std::vector<std::size_t> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Labels pp(n), gg(n);
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = perm[p[i]];
      gg[i] = perm[g[i]];
    }
    EXPECT_NEAR(compute_metrics(pp, gg, K).macro_f1, m.macro_f1, 1e-12);
  }
}

TEST(Reports, TsvAndJson) {
  const Labels golds = {0, 0, 1, 1}, preds = {0, 1, 1, 1};
  const Metrics m = compute_metrics(preds, golds, 2);
  const std::string tsv = metrics_tsv(m);
  EXPECT_NE(tsv.find("macro_f1\t"), std::string::npos);
  EXPECT_NE(tsv.find("class_1_f1\t"), std::string::npos);
  const auto j = nlohmann::json::parse(metrics_json(m));
  EXPECT_DOUBLE_EQ(j.at("macro_f1").get<double>(), m.macro_f1);
  EXPECT_EQ(j.at("per_class").size(), 2u);

  test::TempDir dir;
  write_metrics(m, confusion(preds, golds, 2), dir.path());
  EXPECT_EQ(slurp(dir / "metrics.tsv"), tsv);
  EXPECT_TRUE(std::filesystem::exists(dir / "metrics.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "confusion.tsv"));
}

TEST(Heatmap, Opacities) {
  const std::vector<double> w = {0.7, 0.2, 0.1};
  const auto o = attention_opacities(w);
  EXPECT_EQ(o[0], 1.0);
  EXPECT_NEAR(o[1], 0.2857, 1e-4);
  EXPECT_NEAR(o[2], 0.1429, 1e-4);
}

TEST(Heatmap, EscapesAndLabels) {
  const std::vector<double> w = {0.6, 0.4};
  const std::string html = render_attention_html({"i", "<3"}, w, "2", "5");
  EXPECT_EQ(html.find("<3"), std::string::npos);
  EXPECT_NE(html.find("&lt;3"), std::string::npos);
  EXPECT_NE(html.find("predicted: <b>2</b>"), std::string::npos);
  EXPECT_NE(html.find("gold: <b>5</b>"), std::string::npos);
  EXPECT_NE(html.find("1.0000"), std::string::npos);
  EXPECT_EQ(html_escape("a&b\"<>'"), "a&amp;b&quot;&lt;&gt;&#39;");
  EXPECT_THROW(render_attention_html({"a"}, w, "0", "0"), Error);
}
