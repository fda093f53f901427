#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "emopred/baselines.hpp"
#include "emopred/error.hpp"

using namespace emopred;

namespace {

using Docs = std::vector<std::vector<std::string>>;

double entry(const SparseVector& v, std::size_t i) {
  for (std::size_t k = 0; k < v.nnz(); ++k) {
    if (v.index[k] == i) return v.value[k];
  }
  return 0.0;
}

// Three topics, each with its own words plus shared filler.
void topic_corpus(Docs& docs, std::vector<std::size_t>& labels) {
  const std::vector<std::vector<std::string>> topic = {
      {"happy", "joy", "smile", "sun"},
      {"sad", "cry", "tears", "rain"},
      {"car", "road", "drive", "fast"}};
  const std::vector<std::string> filler = {"the", "a", "is", "today", "so"};
  Rng rng(2);
  for (int i = 0; i < 60; ++i) {
    const std::size_t c = i % 3;
    std::vector<std::string> d;
    for (int k = 0; k < 3; ++k) d.push_back(topic[c][rng() % 4]);
    for (int k = 0; k < 3; ++k) d.push_back(filler[rng() % filler.size()]);
    docs.push_back(d);
    labels.push_back(c);
  }
}

WordVectors toy_vectors() {
  WordVectors wv;
  wv.vocab = Vocabulary({"x", "y", "z"}, {3, 2, 1});
  wv.vectors = Tensor::matrix(5, 2, {9, 9, 7, 7, 1, 0, 0, 1, 0.25, -0.5});
  return wv;
}

}  // namespace

TEST(Tfidf, HandMatrix) {
  const Docs docs = {{"a", "b"}, {"a", "a", "c"}};
  const TfidfModel m = TfidfModel::fit(docs);
  ASSERT_EQ(m.terms(), (std::vector<std::string>{"a", "b", "c"}));
  const auto X = m.transform(docs);
  const double d1[] = {0.5797386715376657, 0.8148024746671689, 0.0};
  const double d2[] = {0.8181802073667197, 0.0, 0.5749618667993135};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(entry(X[0], i), d1[i], 1e-9);
    EXPECT_NEAR(entry(X[1], i), d2[i], 1e-9);
  }
  EXPECT_EQ(X[0].nnz(), 2u);
  EXPECT_NEAR(m.idf("b"), std::log(1.5) + 1.0, 1e-15);
}

TEST(Tfidf, UbiquitousTermAndNorm) {
  Docs docs;
  std::vector<std::size_t> labels;
  topic_corpus(docs, labels);
  for (auto& d : docs) d.push_back("everywhere");
  const TfidfModel m = TfidfModel::fit(docs);
  EXPECT_EQ(m.idf("everywhere"), 1.0);
  for (const auto& v : m.transform(docs)) {
    EXPECT_NEAR(v.norm_squared(), 1.0, 1e-9);
    EXPECT_TRUE(std::is_sorted(v.index.begin(), v.index.end()));
  }
  EXPECT_EQ(m.transform(std::vector<std::string>{"unseen"}).nnz(), 0u);
  EXPECT_THROW(TfidfModel::fit({}), Error);
}

TEST(Tfidf, SerializeRoundTrip) {
  const TfidfModel m = TfidfModel::fit({{"b", "a"}, {"c"}});
  const TfidfModel r = TfidfModel::parse(m.serialize());
  EXPECT_EQ(r.terms(), m.terms());
  EXPECT_EQ(r.idf(), m.idf());
  EXPECT_THROW(TfidfModel::parse("b\t1\na\t1\n"), Error);
  EXPECT_THROW(TfidfModel::parse("a 1\n"), Error);
}

TEST(Tfidf, DuplicatedCorpusSamePredictions) {
  Docs docs;
  std::vector<std::size_t> labels;
  topic_corpus(docs, labels);
  const TfidfModel m1 = TfidfModel::fit(docs);
  const auto X1 = m1.transform(docs);
  const auto p1 = svm_predict(X1, svm_train(X1, labels, m1.dim(), 3, BaselineConfig{}));

  Docs dup = docs;
  dup.insert(dup.end(), docs.begin(), docs.end());
  std::vector<std::size_t> dup_labels = labels;
  dup_labels.insert(dup_labels.end(), labels.begin(), labels.end());
  const TfidfModel m2 = TfidfModel::fit(dup);
  const auto X2 = m2.transform(dup);
  const SvmModel svm2 = svm_train(X2, dup_labels, m2.dim(), 3, BaselineConfig{});
  const auto p2 = svm_predict(m2.transform(docs), svm2);
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(p1, labels);
}

TEST(Nbow, Centroids) {
  const WordVectors wv = toy_vectors();
  const auto one = nbow_features(std::vector<std::string>{"x"}, wv);
  EXPECT_EQ(one, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(nbow_features(std::vector<std::string>{"nope", "<pad>", "<unk>"}, wv), (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(nbow_features(std::vector<std::string>{"x", "y"}, wv), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(nbow_features(std::vector<std::string>{"x", "oov", "y"}, wv), (std::vector<double>{0.5, 0.5}));
}

TEST(Nbow, PermutationInvariant) {
  WordVectors wv;
  std::vector<std::string> words;
  for (int i = 0; i < 20; ++i) words.push_back("w" + std::to_string(i));
  wv.vocab = Vocabulary(words, {});
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  wv.vectors = Tensor({wv.vocab.size(), 7});
  for (double& x : wv.vectors.data()) x = u(rng);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> doc;
    for (int k = 0; k < 1 + trial % 12; ++k) doc.push_back(words[rng() % words.size()]);
    const auto base = nbow_features(doc, wv);
    std::shuffle(doc.begin(), doc.end(), rng);
    EXPECT_EQ(nbow_features(doc, wv), base);
  }
}

TEST(Pegasos, ShrinkOnlyStep) {
  PegasosState s(2, 0.1);
  const SparseVector x = SparseVector::from_dense(std::vector<double>{1.0, 0.0});
  EXPECT_TRUE(s.step(x, +1));
  EXPECT_EQ(s.weights(), (std::vector<double>{10.0, 0.0}));
  ASSERT_GE(s.margin(x), 1.0);
  const auto before = s.weights();
  const double eta_lambda = 1.0 / 2.0;
  EXPECT_FALSE(s.step(x, +1));
  const auto after = s.weights();
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_DOUBLE_EQ(after[i], (1.0 - eta_lambda) * before[i]);
  }
  EXPECT_EQ(s.iteration(), 2u);
  EXPECT_THROW(s.step(x, 0), Error);
}

TEST(Pegasos, SeparableToy) {
  Rng rng(4);
  std::normal_distribution<double> n(0.0, 0.5);
  std::vector<std::vector<double>> X;
  std::vector<std::size_t> y;
  for (int i = 0; i < 200; ++i) {
    const std::size_t c = i % 2;
    const double cx = c ? 2.0 : -2.0;
    X.push_back({cx + n(rng), cx + n(rng)});
    y.push_back(c);
  }
  const SvmModel m = svm_train(X, y, 2, BaselineConfig{});
  const auto p = svm_predict(X, m);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.size(); ++i) correct += p[i] == y[i];
  EXPECT_GE(correct / 200.0, 0.98);
}

TEST(Pegasos, ProjectionNormBound) {
  Rng rng(6);
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<SparseVector> X;
  std::vector<std::size_t> y;
  for (int i = 0; i < 150; ++i) {
    X.push_back(SparseVector::from_dense(std::vector<double>{u(rng), u(rng), u(rng)}));
    y.push_back(i % 3);
  }
  BaselineConfig cfg;
  cfg.projection = true;
  const double lambda = 1.0 / (cfg.C * 150);
  std::size_t checks = 0;
  svm_train(X, y, 3, 3, cfg, [&](std::size_t, std::uint64_t, double norm) {
    ++checks;
    EXPECT_LE(norm, 1.0 / std::sqrt(lambda) + 1e-9);
  });
  EXPECT_EQ(checks, 3u * (20 * 150 / 100));
}

TEST(Svm, Errors) {
  const std::vector<std::vector<double>> X = {{1, 0}, {0, 1}, {1, 1}};
  const std::vector<std::size_t> one_class = {2, 2, 2};
  EXPECT_THROW(svm_train(X, one_class, 3, BaselineConfig{}), Error);
  const std::vector<std::size_t> short_y = {0, 1};
  EXPECT_THROW(svm_train(X, short_y, 2, BaselineConfig{}), Error);
  BaselineConfig bad;
  bad.C = 0.0;
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_EQ(BaselineConfig{}.C, 0.6);
}

TEST(Svm, PredictRules) {
  SvmModel m;
  m.dim = 2;
  m.weights = Tensor({5, 3});
  m.weights.at(3, 0) = 2.0;
  m.weights.at(1, 1) = 1.0;
  const SparseVector x = SparseVector::from_dense(std::vector<double>{1.0, 1.0});
  EXPECT_EQ(m.predict(x), 3u);
  m.weights.at(3, 0) = 0.0;
  m.weights.at(4, 1) = 1.0;
  EXPECT_EQ(m.predict(x), 1u);

  SvmModel hand;
  hand.dim = 2;
  hand.weights = Tensor::matrix(2, 3, {1, 0, 0, 0, 1, 0});
  EXPECT_EQ(svm_predict({{2.0, 1.0}}, hand), (std::vector<std::size_t>{0}));
  EXPECT_THROW(svm_predict({{2.0, 1.0, 4.0}}, hand), Error);
  const std::vector<SparseVector> wide = {
      SparseVector::from_dense(std::vector<double>{0, 0, 0, 1})};
  EXPECT_THROW(svm_predict(wide, hand), Error);
}

TEST(Svm, SerializeRoundTrip) {
  SvmModel m;
  m.dim = 2;
  m.weights = Tensor::matrix(2, 3, {0.1, -2.5, 3e-17, 1, 0, -0.3333333333333333});
  const SvmModel r = SvmModel::parse(m.serialize());
  EXPECT_EQ(r.dim, 2u);
  EXPECT_EQ(r.weights, m.weights);
}
