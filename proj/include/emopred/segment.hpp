#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace emopred {

// Unigram and bigram counts over whitespace-tokenized lines. Bigrams never
// cross line boundaries.
class NgramStats {
 public:
  using BigramKey = std::pair<std::string, std::string>;

  NgramStats() = default;

  void add_line(std::string_view line);

  std::uint64_t count(std::string_view word) const;
  std::uint64_t count(std::string_view first, std::string_view second) const;
  bool contains(std::string_view word) const { return count(word) > 0; }

  std::uint64_t total_tokens() const { return total_tokens_; }
  std::size_t vocab_size() const { return unigram_.size(); }

  // log P(w) with the length-penalized unknown-word fallback
  // P_unk(w) = 1 / (total_tokens * 10^len(w)).
  double log_prob(std::string_view word) const;
  // log(0.7 P(w | prev) + 0.3 P(w)); falls back to log_prob when prev is
  // unseen.
  double log_prob_bigram(std::string_view prev, std::string_view word) const;

  const std::unordered_map<std::string, std::uint64_t>& unigrams() const {
    return unigram_;
  }
  const std::map<BigramKey, std::uint64_t>& bigrams() const { return bigram_; }

  void set_unigram(const std::string& word, std::uint64_t count);
  void set_bigram(const std::string& first, const std::string& second,
                  std::uint64_t count);

  void save(const std::filesystem::path& path) const;
  std::string serialize() const;
  static NgramStats load(const std::filesystem::path& path);
  static NgramStats parse(const std::string& bytes);

  friend bool operator==(const NgramStats&, const NgramStats&) = default;

 private:
  std::unordered_map<std::string, std::uint64_t> unigram_;
  std::map<BigramKey, std::uint64_t> bigram_;
  std::uint64_t total_tokens_ = 0;
};

NgramStats build_ngram_stats(std::istream& corpus);
NgramStats build_ngram_stats(const std::vector<std::string>& lines);

struct Segmentation {
  std::vector<std::string> parts;
  double score = 0.0;
};

inline constexpr std::size_t kDefaultMaxWordLen = 20;

// Log scores closer than this are treated as tied.
inline constexpr double kScoreTieTolerance = 1e-9;

// Maximum-probability split under the unigram model. Ties prefer fewer parts,
// then the lexicographically smaller part sequence.
Segmentation viterbi_segment(std::string_view s, const NgramStats& stats,
                             std::size_t max_word_len = kDefaultMaxWordLen);

// Same search with interpolated bigram scores; state is the last part.
Segmentation viterbi_segment_bigram(
    std::string_view s, const NgramStats& stats,
    std::size_t max_word_len = kDefaultMaxWordLen);

inline constexpr double kEditPenalty = 0.01;

struct SpellOptions {
  std::size_t max_edits = 2;
  // When set, candidate priors use the interpolated bigram probability given
  // this previous word.
  std::optional<std::string> previous;
};

// Noisy-channel correction: argmax over known candidates within max_edits of
// log P(c) + d log(0.01). Returns `word` itself when it is known or no
// candidate exists.
std::string spell_correct(const std::string& word, const NgramStats& stats,
                          const SpellOptions& opts = {});
std::string spell_correct(const std::string& word, const NgramStats& stats,
                          std::size_t max_edits);

// Minimal number of insert/delete/substitute/adjacent-transpose operations
// (unrestricted Damerau-Levenshtein).
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace emopred
