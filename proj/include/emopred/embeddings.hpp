#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "emopred/autodiff.hpp"
#include "emopred/tensor.hpp"

namespace emopred {

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  // Only the reserved entries.
  Vocabulary();
  // `words` excludes the reserved entries; `counts` is empty or parallel.
  Vocabulary(const std::vector<std::string>& words,
             const std::vector<std::uint64_t>& counts);

  std::size_t size() const { return words_.size(); }
  std::optional<std::size_t> find(std::string_view word) const;
  // kUnk for unknown words.
  std::size_t index(std::string_view word) const;
  const std::string& word(std::size_t i) const { return words_.at(i); }
  std::uint64_t count(std::size_t i) const { return counts_.at(i); }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Words with count >= min_count, ordered by descending count then
// lexicographically, after <pad> and <unk>.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::size_t min_count);

struct SgnsConfig {
  std::size_t dim = 300;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr_start = 0.025;
  double lr_end = 1e-4;
  std::uint64_t seed = 1;
  // word2vec-style frequent-word subsampling threshold; 0 disables it.
  double subsample = 0.0;

  void validate() const;
};

struct EmbeddingMatrix {
  Tensor input;   // |V| x D, exported to the classifier
  Tensor output;  // |V| x D context vectors

  std::size_t dim() const { return input.cols(); }
};

struct SgnsResult {
  EmbeddingMatrix matrix;
  // Mean loss per (center, context) pair for each epoch.
  std::vector<double> epoch_loss;
};

// Draws word indices proportionally to count^power; reserved entries are
// never drawn.
class NegativeSampler {
 public:
  explicit NegativeSampler(const Vocabulary& vocab, double power = 0.75);

  std::size_t sample(Rng& rng) const;
  double probability(std::size_t index) const;

 private:
  std::vector<double> cumulative_;
};

struct PairGradients {
  double loss = 0.0;
  std::vector<double> center;
  // [0] is the positive context, then one entry per negative.
  std::vector<std::vector<double>> targets;
};

// Loss -log s(u.v) - sum_j log s(-u.n_j) and its gradients.
PairGradients sgns_pair_gradients(
    std::span<const double> center, std::span<const double> positive,
    const std::vector<std::span<const double>>& negatives);

// `corpus` holds sentences of vocabulary indices; reserved indices are
// skipped. Single-threaded and deterministic for a given seed.
SgnsResult train_sgns(const std::vector<std::vector<std::size_t>>& corpus,
                      const Vocabulary& vocab, const SgnsConfig& cfg);

struct WordVectors {
  Vocabulary vocab;
  Tensor vectors;

  std::size_t dim() const { return vectors.cols(); }
};

// Text matrix container: "rows cols" header, then "name v1 ... vcols" per
// line.
struct NamedRows {
  std::vector<std::string> names;
  Tensor values;
};
std::string serialize_rows(const NamedRows& rows);
NamedRows parse_rows(const std::string& bytes);

// word2vec text format: "V D" header, then "word v1 ... vD" per line. Values
// use the shortest round-trip decimal form.
void save_embeddings(const Tensor& vectors, const Vocabulary& vocab,
                     const std::filesystem::path& path);
void save_embeddings(const EmbeddingMatrix& m, const Vocabulary& vocab,
                     const std::filesystem::path& path);
std::string serialize_embeddings(const Tensor& vectors, const Vocabulary& vocab);
// Files without leading <pad>/<unk> rows get zero rows prepended for them.
WordVectors load_embeddings(const std::filesystem::path& path);
WordVectors parse_embeddings(const std::string& bytes);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Shared by the embedding and checkpoint writers.
void append_double(std::string& out, double v);
double parse_double(std::string_view s);

}  // namespace emopred
