#include "emopred/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "emopred/error.hpp"

namespace emopred {

double SparseVector::dot(std::span<const double> dense) const {
  double s = 0.0;
  for (std::size_t k = 0; k < index.size(); ++k) s += value[k] * dense[index[k]];
  return s;
}

double SparseVector::norm_squared() const {
  double s = 0.0;
  for (double v : value) s += v * v;
  return s;
}

SparseVector SparseVector::from_dense(std::span<const double> dense) {
  SparseVector out;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      out.index.push_back(i);
      out.value.push_back(dense[i]);
    }
  }
  return out;
}

// --- TF-IDF ----------------------------------------------------------------

TfidfModel TfidfModel::fit(const std::vector<std::vector<std::string>>& docs) {
  if (docs.empty()) throw_invalid("tfidf: empty corpus");
  std::map<std::string, std::size_t, std::less<>> df;
  for (const auto& doc : docs) {
    std::vector<std::string> uniq(doc);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto& t : uniq) ++df[t];
  }
  TfidfModel m;
  const double D = static_cast<double>(docs.size());
  for (const auto& [term, n] : df) {
    m.index_.emplace(term, m.terms_.size());
    m.terms_.push_back(term);
    m.idf_.push_back(std::log((1.0 + D) / (1.0 + static_cast<double>(n))) + 1.0);
  }
  return m;
}

double TfidfModel::idf(const std::string& term) const {
  const auto it = index_.find(term);
  if (it == index_.end()) throw_invalid("tfidf: unknown term '" + term + "'");
  return idf_[it->second];
}

SparseVector TfidfModel::transform(const std::vector<std::string>& doc) const {
  std::map<std::size_t, double> tf;
  for (const auto& t : doc) {
    const auto it = index_.find(t);
    if (it != index_.end()) tf[it->second] += 1.0;
  }
  SparseVector out;
  double sq = 0.0;
  for (const auto& [i, n] : tf) {
    const double v = n * idf_[i];
    out.index.push_back(i);
    out.value.push_back(v);
    sq += v * v;
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : out.value) v *= inv;
  }
  return out;
}

std::vector<SparseVector> TfidfModel::transform(
    const std::vector<std::vector<std::string>>& docs) const {
  std::vector<SparseVector> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(transform(d));
  return out;
}

std::string TfidfModel::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    out += terms_[i];
    out += '\t';
    append_double(out, idf_[i]);
    out += '\n';
  }
  return out;
}

TfidfModel TfidfModel::parse(const std::string& bytes) {
  TfidfModel m;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < bytes.size()) {
    std::size_t end = bytes.find('\n', start);
    if (end == std::string::npos) end = bytes.size();
    const std::string_view line(bytes.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.rfind('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw_format("tfidf line " + std::to_string(line_no) + ": expected term TAB idf");
    }
    std::string term(line.substr(0, tab));
    if (!m.terms_.empty() && term <= m.terms_.back()) {
      throw_format("tfidf line " + std::to_string(line_no) + ": terms must be sorted and unique");
    }
    m.index_.emplace(term, m.terms_.size());
    m.terms_.push_back(std::move(term));
    m.idf_.push_back(parse_double(line.substr(tab + 1)));
  }
  return m;
}

// --- N-BOW -----------------------------------------------------------------

std::vector<double> nbow_features(const std::vector<std::string>& doc,
                                  const WordVectors& embeddings) {
  const std::size_t D = embeddings.dim();
  // Summed in vocabulary order so the result does not depend on token order.
  std::map<std::size_t, std::size_t> counts;
  std::size_t n = 0;
  for (const auto& t : doc) {
    const auto i = embeddings.vocab.find(t);
    if (!i || *i == Vocabulary::kPad || *i == Vocabulary::kUnk) continue;
    ++counts[*i];
    ++n;
  }
  std::vector<double> sum(D, 0.0);
  for (const auto& [i, c] : counts) {
    const auto row = embeddings.vectors.row(i);
    for (std::size_t k = 0; k < D; ++k) sum[k] += static_cast<double>(c) * row[k];
  }
  if (n > 0) {
    for (double& v : sum) v /= static_cast<double>(n);
  }
  return sum;
}

std::vector<std::vector<double>> nbow_features(
    const std::vector<std::vector<std::string>>& docs, const WordVectors& embeddings) {
  std::vector<std::vector<double>> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(nbow_features(d, embeddings));
  return out;
}

// --- Pegasos ---------------------------------------------------------------

void BaselineConfig::validate() const {
  if (!(C > 0.0)) throw_invalid("svm: C must be > 0");
}

PegasosState::PegasosState(std::size_t dim, double lambda, bool projection)
    : v_(dim, 0.0), lambda_(lambda), projection_(projection) {
  if (dim == 0) throw_invalid("pegasos: dimension must be >= 1");
  if (!(lambda > 0.0)) throw_invalid("pegasos: lambda must be > 0");
}

double PegasosState::dot(const SparseVector& x) const {
  double s = 0.0;
  for (std::size_t k = 0; k < x.index.size(); ++k) {
    if (x.index[k] >= v_.size()) throw_invalid("pegasos: feature index out of range");
    s += x.value[k] * v_[x.index[k]];
  }
  return s;
}

double PegasosState::margin(const SparseVector& x) const {
  return scale_ * dot(x);
}

double PegasosState::norm() const {
  return std::abs(scale_) * std::sqrt(std::max(v_norm_sq_, 0.0));
}

std::vector<double> PegasosState::weights() const {
  std::vector<double> w(v_);
  for (double& x : w) x *= scale_;
  return w;
}

bool PegasosState::step(const SparseVector& x, int y) {
  if (y != 1 && y != -1) throw_invalid("pegasos: label must be -1 or +1");
  ++t_;
  const double eta = 1.0 / (lambda_ * static_cast<double>(t_));
  const double vx = dot(x);
  const bool active = static_cast<double>(y) * scale_ * vx < 1.0;

  const double shrink = 1.0 - eta * lambda_;
  if (shrink <= 0.0) {
    std::fill(v_.begin(), v_.end(), 0.0);
    scale_ = 1.0;
    v_norm_sq_ = 0.0;
  } else {
    scale_ *= shrink;
  }
  if (active) {
    const double a = eta * static_cast<double>(y) / scale_;
    const double cross = shrink <= 0.0 ? 0.0 : vx;
    v_norm_sq_ += 2.0 * a * cross + a * a * x.norm_squared();
    for (std::size_t k = 0; k < x.index.size(); ++k) v_[x.index[k]] += a * x.value[k];
  }
  if (projection_) {
    const double radius = 1.0 / std::sqrt(lambda_);
    const double n = norm();
    if (n > radius) scale_ *= radius / n;
  }
  if (scale_ < 1e-9) {
    for (double& v : v_) v *= scale_;
    v_norm_sq_ *= scale_ * scale_;
    scale_ = 1.0;
  }
  return active;
}

// --- one-vs-rest SVM -------------------------------------------------------

namespace {

SparseVector with_bias(const SparseVector& x, std::size_t dim) {
  if (!x.index.empty() && x.index.back() >= dim) {
    throw_invalid("svm: feature index " + std::to_string(x.index.back()) +
                  " exceeds dimension " + std::to_string(dim));
  }
  SparseVector out = x;
  out.index.push_back(dim);
  out.value.push_back(1.0);
  return out;
}

}  // namespace

std::vector<double> SvmModel::scores(const SparseVector& x) const {
  const SparseVector xb = with_bias(x, dim);
  std::vector<double> out(num_classes());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = xb.dot(weights.row(c));
  return out;
}

std::size_t SvmModel::predict(const SparseVector& x) const {
  const auto s = scores(x);
  std::size_t best = 0;
  for (std::size_t c = 1; c < s.size(); ++c) {
    if (s[c] > s[best]) best = c;
  }
  return best;
}

std::vector<std::size_t> SvmModel::predict(std::span<const SparseVector> X) const {
  std::vector<std::size_t> out;
  out.reserve(X.size());
  for (const auto& x : X) out.push_back(predict(x));
  return out;
}

std::string SvmModel::serialize() const {
  NamedRows rows;
  for (std::size_t c = 0; c < num_classes(); ++c) rows.names.push_back("class_" + std::to_string(c));
  rows.values = weights;
  return serialize_rows(rows);
}

SvmModel SvmModel::parse(const std::string& bytes) {
  NamedRows rows = parse_rows(bytes);
  for (std::size_t c = 0; c < rows.names.size(); ++c) {
    if (rows.names[c] != "class_" + std::to_string(c)) {
      throw_format("svm model: row " + std::to_string(c) + " is named '" +
                   rows.names[c] + "'");
    }
  }
  if (rows.names.size() < 2) throw_format("svm model: need at least two classes");
  SvmModel m;
  m.dim = rows.values.cols() - 1;
  m.weights = std::move(rows.values);
  return m;
}

SvmModel svm_train(std::span<const SparseVector> X, std::span<const std::size_t> y,
                   std::size_t dim, std::size_t num_classes,
                   const BaselineConfig& cfg, const PegasosObserver& observer) {
  cfg.validate();
  if (X.size() != y.size()) throw_invalid("svm: features and labels differ in length");
  if (X.size() < 2) throw_invalid("svm: need at least two examples");
  std::vector<std::size_t> seen(num_classes, 0);
  for (auto label : y) {
    if (label >= num_classes) throw_invalid("svm: label out of range");
    ++seen[label];
  }
  if (std::count_if(seen.begin(), seen.end(), [](auto n) { return n > 0; }) < 2) {
    throw_invalid("svm: training data contains a single class");
  }
  std::vector<SparseVector> xb;
  xb.reserve(X.size());
  for (const auto& x : X) xb.push_back(with_bias(x, dim));

  const std::size_t n = X.size();
  const double lambda = 1.0 / (cfg.C * static_cast<double>(n));
  const std::size_t T = cfg.iterations ? cfg.iterations : 20 * n;
  SvmModel model;
  model.dim = dim;
  model.weights = Tensor({num_classes, dim + 1});
  for (std::size_t c = 0; c < num_classes; ++c) {
    PegasosState state(dim + 1, lambda, cfg.projection);
    Rng rng(cfg.seed + 0x9E3779B97F4A7C15ULL * (c + 1));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t i = pick(rng);
      state.step(xb[i], y[i] == c ? 1 : -1);
      if (observer && state.iteration() % 100 == 0) observer(c, state.iteration(), state.norm());
    }
    const auto w = state.weights();
    std::copy(w.begin(), w.end(), model.weights.row(c).begin());
  }
  return model;
}

std::vector<SparseVector> to_sparse(const std::vector<std::vector<double>>& X) {
  std::vector<SparseVector> out;
  out.reserve(X.size());
  for (const auto& x : X) out.push_back(SparseVector::from_dense(x));
  return out;
}

SvmModel svm_train(const std::vector<std::vector<double>>& X,
                   std::span<const std::size_t> y, std::size_t num_classes,
                   const BaselineConfig& cfg) {
  if (X.empty()) throw_invalid("svm: need at least two examples");
  const std::size_t dim = X[0].size();
  for (const auto& x : X) {
    if (x.size() != dim) throw_invalid("svm: feature vectors differ in dimension");
  }
  return svm_train(to_sparse(X), y, dim, num_classes, cfg);
}

std::vector<std::size_t> svm_predict(std::span<const SparseVector> X,
                                     const SvmModel& model) {
  return model.predict(X);
}

std::vector<std::size_t> svm_predict(const std::vector<std::vector<double>>& X,
                                     const SvmModel& model) {
  for (const auto& x : X) {
    if (x.size() != model.dim) {
      throw_invalid("svm: feature dimension " + std::to_string(x.size()) +
                    " does not match model dimension " + std::to_string(model.dim));
    }
  }
  return model.predict(to_sparse(X));
}

}  // namespace emopred
