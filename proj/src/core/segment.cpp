#include "emopred/segment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "emopred/data_io.hpp"
#include "emopred/error.hpp"

namespace emopred {
namespace {

constexpr std::string_view kBigramMarker = "[bigrams]";
constexpr std::string_view kHeaderKey = "total_tokens";

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                               line[i] == '\r' || line[i] == '\n')) {
      ++i;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' &&
           line[j] != '\r' && line[j] != '\n') {
      ++j;
    }
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::uint64_t parse_count(std::string_view s, std::size_t line_no) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw_format("stats line " + std::to_string(line_no) +
                 ": malformed count '" + std::string(s) + "'");
  }
  return v;
}

struct Candidate {
  double score = -std::numeric_limits<double>::infinity();
  std::vector<std::string> parts;
  bool valid = false;
};

// Strict "a is preferred over b" under score desc, part count asc,
// lexicographic part order asc. Scores within kScoreTieTolerance are equal:
// splits such as log(0.1) + log(0.1) and log(0.01) tie mathematically but
// not always in floating point.
bool preferred(const Candidate& a, const Candidate& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  if (std::abs(a.score - b.score) > kScoreTieTolerance) return a.score > b.score;
  if (a.parts.size() != b.parts.size()) return a.parts.size() < b.parts.size();
  return a.parts < b.parts;
}

void check_segment_input(std::string_view s, std::size_t max_word_len) {
  if (s.empty()) throw_invalid("viterbi_segment: empty string");
  if (max_word_len == 0) throw_invalid("viterbi_segment: max_word_len is 0");
}

constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz";

template <typename Visit>
void for_each_edit1(const std::string& w, Visit&& visit) {
  const std::size_t n = w.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::string s = w;
    s.erase(i, 1);
    visit(s);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (w[i] == w[i + 1]) continue;
    std::string s = w;
    std::swap(s[i], s[i + 1]);
    visit(s);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (char c : kAlphabet) {
      if (c == w[i]) continue;
      std::string s = w;
      s[i] = c;
      visit(s);
    }
  }
  for (std::size_t i = 0; i <= n; ++i) {
    for (char c : kAlphabet) {
      std::string s = w;
      s.insert(s.begin() + static_cast<std::ptrdiff_t>(i), c);
      visit(s);
    }
  }
}

}  // namespace

void NgramStats::add_line(std::string_view line) {
  const auto words = split_ws(line);
  for (std::size_t i = 0; i < words.size(); ++i) {
    ++unigram_[std::string(words[i])];
    ++total_tokens_;
    if (i > 0) {
      ++bigram_[{std::string(words[i - 1]), std::string(words[i])}];
    }
  }
}

std::uint64_t NgramStats::count(std::string_view word) const {
  const auto it = unigram_.find(std::string(word));
  return it == unigram_.end() ? 0 : it->second;
}

std::uint64_t NgramStats::count(std::string_view first,
                                std::string_view second) const {
  const auto it = bigram_.find({std::string(first), std::string(second)});
  return it == bigram_.end() ? 0 : it->second;
}

double NgramStats::log_prob(std::string_view word) const {
  const double total = static_cast<double>(std::max<std::uint64_t>(total_tokens_, 1));
  const std::uint64_t c = count(word);
  if (c > 0) return std::log(static_cast<double>(c) / total);
  return -(std::log(total) +
           static_cast<double>(word.size()) * std::log(10.0));
}

double NgramStats::log_prob_bigram(std::string_view prev,
                                   std::string_view word) const {
  const std::uint64_t prev_count = count(prev);
  if (prev_count == 0) return log_prob(word);
  const double cond = static_cast<double>(count(prev, word)) /
                      static_cast<double>(prev_count);
  return std::log(0.7 * cond + 0.3 * std::exp(log_prob(word)));
}

void NgramStats::set_unigram(const std::string& word, std::uint64_t count) {
  auto& slot = unigram_[word];
  total_tokens_ = total_tokens_ - slot + count;
  slot = count;
  if (count == 0) unigram_.erase(word);
}

void NgramStats::set_bigram(const std::string& first,
                            const std::string& second, std::uint64_t count) {
  if (!contains(first) || !contains(second)) {
    throw_invalid("bigram words must be present as unigrams");
  }
  if (count == 0) {
    bigram_.erase({first, second});
  } else {
    bigram_[{first, second}] = count;
  }
}

std::string NgramStats::serialize() const {
  std::vector<std::pair<std::string, std::uint64_t>> uni(unigram_.begin(),
                                                         unigram_.end());
  std::sort(uni.begin(), uni.end());
  std::string out;
  out += kHeaderKey;
  out += '\t';
  out += std::to_string(total_tokens_);
  out += '\n';
  for (const auto& [w, c] : uni) {
    out += w;
    out += '\t';
    out += std::to_string(c);
    out += '\n';
  }
  out += kBigramMarker;
  out += '\n';
  for (const auto& [key, c] : bigram_) {
    out += key.first;
    out += ' ';
    out += key.second;
    out += '\t';
    out += std::to_string(c);
    out += '\n';
  }
  return out;
}

void NgramStats::save(const std::filesystem::path& path) const {
  write_file(path, serialize());
}

NgramStats NgramStats::parse(const std::string& bytes) {
  const auto lines = split_lines(bytes);
  if (lines.empty()) throw_format("stats file is empty");
  NgramStats stats;
  const auto header = lines[0];
  const auto htab = header.find('\t');
  if (htab == std::string::npos || header.substr(0, htab) != kHeaderKey) {
    throw_format("stats file: missing total_tokens header");
  }
  const std::uint64_t declared_total =
      parse_count(std::string_view(header).substr(htab + 1), 1);
  bool in_bigrams = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    if (line == kBigramMarker) {
      in_bigrams = true;
      continue;
    }
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw_format("stats line " + std::to_string(i + 1) + ": missing TAB");
    }
    const auto count = parse_count(std::string_view(line).substr(tab + 1), i + 1);
    const std::string key = line.substr(0, tab);
    if (!in_bigrams) {
      stats.unigram_[key] = count;
      stats.total_tokens_ += count;
    } else {
      const auto sp = key.find(' ');
      if (sp == std::string::npos) {
        throw_format("stats line " + std::to_string(i + 1) +
                     ": bigram needs two words");
      }
      std::string first = key.substr(0, sp), second = key.substr(sp + 1);
      if (!stats.contains(first) || !stats.contains(second)) {
        throw_format("stats line " + std::to_string(i + 1) +
                     ": bigram word missing from unigrams");
      }
      stats.bigram_[{std::move(first), std::move(second)}] = count;
    }
  }
  if (stats.total_tokens_ != declared_total) {
    throw_format("stats file: total_tokens header does not match counts");
  }
  return stats;
}

NgramStats NgramStats::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

NgramStats build_ngram_stats(std::istream& corpus) {
  NgramStats stats;
  std::string line;
  while (std::getline(corpus, line)) stats.add_line(line);
  if (stats.total_tokens() == 0) throw_invalid("build_ngram_stats: empty corpus");
  return stats;
}

NgramStats build_ngram_stats(const std::vector<std::string>& lines) {
  NgramStats stats;
  for (const auto& line : lines) stats.add_line(line);
  if (stats.total_tokens() == 0) throw_invalid("build_ngram_stats: empty corpus");
  return stats;
}

Segmentation viterbi_segment(std::string_view s, const NgramStats& stats,
                             std::size_t max_word_len) {
  check_segment_input(s, max_word_len);
  const std::size_t n = s.size();
  std::vector<Candidate> best(n + 1);
  best[0].valid = true;
  best[0].score = 0.0;
  for (std::size_t end = 1; end <= n; ++end) {
    const std::size_t lo = end > max_word_len ? end - max_word_len : 0;
    for (std::size_t start = lo; start < end; ++start) {
      const Candidate& prefix = best[start];
      if (!prefix.valid) continue;
      const std::string_view word = s.substr(start, end - start);
      Candidate cand;
      cand.valid = true;
      cand.score = prefix.score + stats.log_prob(word);
      cand.parts = prefix.parts;
      cand.parts.emplace_back(word);
      if (preferred(cand, best[end])) best[end] = std::move(cand);
    }
  }
  return {std::move(best[n].parts), best[n].score};
}

Segmentation viterbi_segment_bigram(std::string_view s, const NgramStats& stats,
                                    std::size_t max_word_len) {
  check_segment_input(s, max_word_len);
  const std::size_t n = s.size();
  // state[end][start]: best split of s[0, end) whose last part is
  // s[start, end).
  std::vector<std::vector<Candidate>> state(n + 1,
                                            std::vector<Candidate>(n + 1));
  for (std::size_t end = 1; end <= n; ++end) {
    const std::size_t lo = end > max_word_len ? end - max_word_len : 0;
    for (std::size_t start = lo; start < end; ++start) {
      const std::string_view word = s.substr(start, end - start);
      Candidate& slot = state[end][start];
      if (start == 0) {
        slot.valid = true;
        slot.score = stats.log_prob(word);
        slot.parts = {std::string(word)};
        continue;
      }
      const std::size_t plo = start > max_word_len ? start - max_word_len : 0;
      for (std::size_t pstart = plo; pstart < start; ++pstart) {
        const Candidate& prev = state[start][pstart];
        if (!prev.valid) continue;
        Candidate cand;
        cand.valid = true;
        cand.score = prev.score + stats.log_prob_bigram(prev.parts.back(), word);
        cand.parts = prev.parts;
        cand.parts.emplace_back(word);
        if (preferred(cand, slot)) slot = std::move(cand);
      }
    }
  }
  Candidate winner;
  for (std::size_t start = 0; start < n; ++start) {
    if (preferred(state[n][start], winner)) winner = state[n][start];
  }
  return {std::move(winner.parts), winner.score};
}

std::string spell_correct(const std::string& word, const NgramStats& stats,
                          const SpellOptions& opts) {
  if (opts.max_edits < 1 || opts.max_edits > 2) {
    throw_invalid("spell_correct: max_edits must be 1 or 2");
  }
  if (word.empty() || stats.contains(word)) return word;
  for (char c : word) {
    if (c < 'a' || c > 'z') return word;
  }

  const double log_delta = std::log(kEditPenalty);
  std::string best;
  double best_score = -std::numeric_limits<double>::infinity();
  std::uint64_t best_count = 0;
  const auto consider = [&](const std::string& cand, std::size_t edits) {
    const std::uint64_t c = stats.count(cand);
    if (c == 0) return;
    const double prior = opts.previous ? stats.log_prob_bigram(*opts.previous, cand)
                                       : stats.log_prob(cand);
    const double score = prior + static_cast<double>(edits) * log_delta;
    const bool tied = std::abs(score - best_score) <= kScoreTieTolerance;
    const bool better =
        best.empty() || (!tied && score > best_score) ||
        (tied && (c > best_count || (c == best_count && cand < best)));
    if (better) {
      best = cand;
      best_score = score;
      best_count = c;
    }
  };

  std::unordered_set<std::string> level1;
  for_each_edit1(word, [&](const std::string& s) { level1.insert(s); });
  for (const auto& s : level1) consider(s, 1);
  if (opts.max_edits >= 2) {
    std::unordered_set<std::string> seen;
    for (const auto& s1 : level1) {
      for_each_edit1(s1, [&](const std::string& s2) {
        if (s2 == word || level1.count(s2)) return;
        if (!stats.contains(s2) || !seen.insert(s2).second) return;
        consider(s2, 2);
      });
    }
  }
  return best.empty() ? word : best;
}

std::string spell_correct(const std::string& word, const NgramStats& stats,
                          std::size_t max_edits) {
  SpellOptions opts;
  opts.max_edits = max_edits;
  return spell_correct(word, stats, opts);
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  // Lowrance-Wagner over bytes.
  const std::size_t n = a.size(), m = b.size();
  const std::size_t inf = n + m;
  std::vector<std::size_t> last_row(256, 0);
  std::vector<std::vector<std::size_t>> d(n + 2, std::vector<std::size_t>(m + 2));
  d[0][0] = inf;
  for (std::size_t i = 0; i <= n; ++i) {
    d[i + 1][0] = inf;
    d[i + 1][1] = i;
  }
  for (std::size_t j = 0; j <= m; ++j) {
    d[0][j + 1] = inf;
    d[1][j + 1] = j;
  }
  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t last_match_col = 0;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t i1 = last_row[static_cast<unsigned char>(b[j - 1])];
      const std::size_t j1 = last_match_col;
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      if (cost == 0) last_match_col = j;
      d[i + 1][j + 1] = std::min({d[i][j] + cost, d[i + 1][j] + 1,
                                  d[i][j + 1] + 1,
                                  d[i1][j1] + (i - i1 - 1) + 1 + (j - j1 - 1)});
    }
    last_row[static_cast<unsigned char>(a[i - 1])] = i;
  }
  return d[n + 1][m + 1];
}

}  // namespace emopred
