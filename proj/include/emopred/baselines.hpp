#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "emopred/embeddings.hpp"
#include "emopred/tensor.hpp"

namespace emopred {

// Strictly increasing indices with finite non-zero values.
struct SparseVector {
  std::vector<std::size_t> index;
  std::vector<double> value;

  std::size_t nnz() const { return index.size(); }
  double dot(std::span<const double> dense) const;
  double norm_squared() const;
  // Drops zeros.
  static SparseVector from_dense(std::span<const double> dense);
  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

// Raw term counts, idf = ln((1 + D) / (1 + df)) + 1, rows L2-normalized.
// Terms are indexed in lexicographic order.
class TfidfModel {
 public:
  TfidfModel() = default;

  static TfidfModel fit(const std::vector<std::vector<std::string>>& docs);
  SparseVector transform(const std::vector<std::string>& doc) const;
  std::vector<SparseVector> transform(
      const std::vector<std::vector<std::string>>& docs) const;

  std::size_t dim() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  double idf(const std::string& term) const;

  // "term TAB idf" per line.
  std::string serialize() const;
  static TfidfModel parse(const std::string& bytes);

 private:
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Mean of the in-vocabulary word vectors (rows other than <pad>/<unk>); zero
// when no token is known.
std::vector<double> nbow_features(const std::vector<std::string>& doc,
                                  const WordVectors& embeddings);
std::vector<std::vector<double>> nbow_features(
    const std::vector<std::vector<std::string>>& docs, const WordVectors& embeddings);

struct BaselineConfig {
  double C = 0.6;
  // 0 selects 20 * n.
  std::size_t iterations = 0;
  std::uint64_t seed = 1;
  // Pegasos projection onto the ball of radius 1/sqrt(lambda).
  bool projection = false;

  void validate() const;
};

// Primal Pegasos on one binary problem. The weight vector is stored as
// scale * v so the shrink step costs O(1). The last coordinate is the bias
// feature, which is regularized like the rest.
class PegasosState {
 public:
  PegasosState(std::size_t dim, double lambda, bool projection = false);

  // One subgradient step on (x, y) with y in {-1, +1}; returns true when the
  // hinge term was active.
  bool step(const SparseVector& x, int y);
  double margin(const SparseVector& x) const;
  double norm() const;
  std::vector<double> weights() const;
  std::uint64_t iteration() const { return t_; }
  double lambda() const { return lambda_; }

 private:
  double dot(const SparseVector& x) const;

  std::vector<double> v_;
  double scale_ = 1.0;
  double v_norm_sq_ = 0.0;
  double lambda_;
  bool projection_;
  std::uint64_t t_ = 0;
};

struct SvmModel {
  std::size_t dim = 0;  // feature dimension before the bias feature
  Tensor weights;       // K x (dim + 1)

  std::size_t num_classes() const { return weights.rows(); }
  std::vector<double> scores(const SparseVector& x) const;
  std::size_t predict(const SparseVector& x) const;
  std::vector<std::size_t> predict(std::span<const SparseVector> X) const;

  std::string serialize() const;
  static SvmModel parse(const std::string& bytes);
};

// Receives (class, iteration, ||w||) every 100 iterations.
using PegasosObserver = std::function<void(std::size_t, std::uint64_t, double)>;

// One-vs-rest. Labels must name at least two distinct classes below
// num_classes.
SvmModel svm_train(std::span<const SparseVector> X, std::span<const std::size_t> y,
                   std::size_t dim, std::size_t num_classes,
                   const BaselineConfig& cfg, const PegasosObserver& observer = {});
SvmModel svm_train(const std::vector<std::vector<double>>& X,
                   std::span<const std::size_t> y, std::size_t num_classes,
                   const BaselineConfig& cfg);

std::vector<SparseVector> to_sparse(const std::vector<std::vector<double>>& X);

std::vector<std::size_t> svm_predict(std::span<const SparseVector> X,
                                     const SvmModel& model);
std::vector<std::size_t> svm_predict(const std::vector<std::vector<double>>& X,
                                     const SvmModel& model);

}  // namespace emopred
