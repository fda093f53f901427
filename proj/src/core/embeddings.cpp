#include "emopred/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "emopred/data_io.hpp"
#include "emopred/error.hpp"

namespace emopred {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow for large |x|.
double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

Vocabulary::Vocabulary() : Vocabulary({}, {}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& words,
                       const std::vector<std::uint64_t>& counts) {
  if (!counts.empty() && counts.size() != words.size()) {
    throw_invalid("vocabulary counts must parallel words");
  }
  words_ = {std::string(kPadToken), std::string(kUnkToken)};
  counts_ = {0, 0};
  index_[words_[0]] = kPad;
  index_[words_[1]] = kUnk;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] == kPadToken || words[i] == kUnkToken) {
      throw_invalid("reserved token '" + words[i] + "' in vocabulary words");
    }
    if (!index_.emplace(words[i], words_.size()).second) {
      throw_invalid("duplicate vocabulary word '" + words[i] + "'");
    }
    words_.push_back(words[i]);
    counts_.push_back(counts.empty() ? 0 : counts[i]);
  }
}

std::optional<std::size_t> Vocabulary::find(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::index(std::string_view word) const {
  return find(word).value_or(kUnk);
}

std::vector<std::size_t> Vocabulary::encode(
    const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index(t));
  return ids;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::size_t min_count) {
  if (min_count < 1) throw_invalid("build_vocab: min_count must be >= 1");
  std::map<std::string, std::uint64_t> counts;
  std::size_t tokens = 0;
  for (const auto& sentence : corpus) {
    for (const auto& w : sentence) {
      ++tokens;
      if (w == Vocabulary::kPadToken || w == Vocabulary::kUnkToken) continue;
      ++counts[w];
    }
  }
  if (tokens == 0) throw_invalid("build_vocab: empty corpus");
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [w, c] : counts) {
    if (c >= min_count) kept.emplace_back(w, c);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  std::vector<std::string> words;
  std::vector<std::uint64_t> cs;
  for (auto& [w, c] : kept) {
    words.push_back(w);
    cs.push_back(c);
  }
  return Vocabulary(words, cs);
}

void SgnsConfig::validate() const {
  if (dim < 1) throw_invalid("sgns: dim must be >= 1");
  if (window < 1) throw_invalid("sgns: window must be >= 1");
  if (negatives < 1) throw_invalid("sgns: negatives must be >= 1");
  if (epochs < 1) throw_invalid("sgns: epochs must be >= 1");
  if (!(lr_start > 0.0) || !(lr_end > 0.0) || lr_end > lr_start) {
    throw_invalid("sgns: learning rates must be positive and non-increasing");
  }
  if (subsample < 0.0) throw_invalid("sgns: subsample must be >= 0");
}

NegativeSampler::NegativeSampler(const Vocabulary& vocab, double power) {
  cumulative_.resize(vocab.size());
  double total = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (i != Vocabulary::kPad && i != Vocabulary::kUnk) {
      total += std::pow(static_cast<double>(vocab.count(i)), power);
    }
    cumulative_[i] = total;
  }
  if (!(total > 0.0)) throw_invalid("negative sampler: vocabulary has no counts");
}

std::size_t NegativeSampler::sample(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, cumulative_.back());
  const double x = u(rng);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
  const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
  return std::min(idx, cumulative_.size() - 1);
}

double NegativeSampler::probability(std::size_t index) const {
  const double prev = index == 0 ? 0.0 : cumulative_.at(index - 1);
  return (cumulative_.at(index) - prev) / cumulative_.back();
}

PairGradients sgns_pair_gradients(
    std::span<const double> center, std::span<const double> positive,
    const std::vector<std::span<const double>>& negatives) {
  const std::size_t d = center.size();
  PairGradients g;
  g.center.assign(d, 0.0);
  const auto term = [&](std::span<const double> target, double label) {
    const double f = dot(center, target);
    // d/df of -log s(f) is s(f) - 1, of -log s(-f) is s(f).
    const double coeff = sigmoid(f) - label;
    g.loss -= label > 0.5 ? log_sigmoid(f) : log_sigmoid(-f);
    std::vector<double> gt(d);
    for (std::size_t k = 0; k < d; ++k) {
      g.center[k] += coeff * target[k];
      gt[k] = coeff * center[k];
    }
    g.targets.push_back(std::move(gt));
  };
  term(positive, 1.0);
  for (const auto& n : negatives) term(n, 0.0);
  return g;
}

SgnsResult train_sgns(const std::vector<std::vector<std::size_t>>& corpus,
                      const Vocabulary& vocab, const SgnsConfig& cfg) {
  cfg.validate();
  const std::size_t V = vocab.size(), D = cfg.dim;
  Rng rng(cfg.seed);
  SgnsResult result;
  result.matrix.input = Tensor({V, D});
  result.matrix.output = Tensor({V, D});
  {
    std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(D),
                                                0.5 / static_cast<double>(D));
    for (std::size_t w = 2; w < V; ++w)
      for (double& v : result.matrix.input.row(w)) v = init(rng);
  }
  const NegativeSampler sampler(vocab);

  std::uint64_t total_count = 0;
  for (std::size_t w = 2; w < V; ++w) total_count += vocab.count(w);

  std::vector<std::vector<std::size_t>> sentences;
  std::size_t words_per_epoch = 0;
  for (const auto& s : corpus) {
    std::vector<std::size_t> kept;
    for (auto w : s) {
      if (w >= V) throw_invalid("train_sgns: corpus index outside vocabulary");
      if (w != Vocabulary::kPad && w != Vocabulary::kUnk) kept.push_back(w);
    }
    words_per_epoch += kept.size();
    sentences.push_back(std::move(kept));
  }
  if (words_per_epoch == 0) throw_invalid("train_sgns: corpus has no known words");
  const double total_words = static_cast<double>(words_per_epoch * cfg.epochs);

  Tensor& in = result.matrix.input;
  Tensor& out = result.matrix.output;
  std::vector<double> neu1e(D);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t processed = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    for (const auto& raw : sentences) {
      std::vector<std::size_t> s;
      if (cfg.subsample > 0.0 && total_count > 0) {
        for (auto w : raw) {
          const double f = static_cast<double>(vocab.count(w)) /
                           static_cast<double>(total_count);
          const double keep =
              (std::sqrt(f / cfg.subsample) + 1.0) * cfg.subsample / f;
          if (keep >= 1.0 || unit(rng) < keep) s.push_back(w);
        }
      } else {
        s = raw;
      }
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double progress = static_cast<double>(processed) / total_words;
        const double lr =
            std::max(cfg.lr_end, cfg.lr_start - (cfg.lr_start - cfg.lr_end) * progress);
        ++processed;
        const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
        const std::size_t hi = std::min(s.size(), i + cfg.window + 1);
        auto u = in.row(s[i]);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          std::fill(neu1e.begin(), neu1e.end(), 0.0);
          for (std::size_t k = 0; k <= cfg.negatives; ++k) {
            std::size_t target;
            double label;
            if (k == 0) {
              target = s[j];
              label = 1.0;
            } else {
              target = sampler.sample(rng);
              if (target == s[j]) continue;
              label = 0.0;
            }
            auto v = out.row(target);
            const double f = dot(u, v);
            loss_sum -= label > 0.5 ? log_sigmoid(f) : log_sigmoid(-f);
            const double g = (label - sigmoid(f)) * lr;
            for (std::size_t c = 0; c < D; ++c) {
              neu1e[c] += g * v[c];
              v[c] += g * u[c];
            }
          }
          for (std::size_t c = 0; c < D; ++c) u[c] += neu1e[c];
          ++pairs;
        }
      }
    }
    result.epoch_loss.push_back(pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
  }
  return result;
}

void append_double(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw_runtime("failed to format number");
  out.append(buf, ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw_format("malformed number '" + std::string(s) + "'");
  }
  return v;
}

std::string serialize_rows(const NamedRows& rows) {
  const Tensor& m = rows.values;
  if (m.rank() != 2 || m.rows() != rows.names.size()) {
    throw_invalid("text matrix: row count must equal the number of names");
  }
  std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const std::string& name = rows.names[r];
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
      throw_invalid("text matrix: row name '" + name + "' contains whitespace");
    }
    out += name;
    for (double v : m.row(r)) {
      out += ' ';
      append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

NamedRows parse_rows(const std::string& bytes) {
  const auto lines = split_lines(bytes);
  if (lines.empty()) throw_format("text matrix: missing header");
  const auto header = split_spaces(lines[0]);
  std::size_t rows = 0, dim = 0;
  const auto parse_size = [](std::string_view s, std::size_t& v) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size();
  };
  if (header.size() != 2 || !parse_size(header[0], rows) ||
      !parse_size(header[1], dim) || dim == 0) {
    throw_format("text matrix: malformed header '" + lines[0] + "'");
  }
  NamedRows out;
  std::vector<double> values;
  values.reserve(rows * dim);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_spaces(lines[i]);
    if (fields.size() != dim + 1) {
      throw_format("text matrix line " + std::to_string(i + 1) + ": expected " +
                   std::to_string(dim) + " values, got " +
                   std::to_string(fields.empty() ? 0 : fields.size() - 1));
    }
    out.names.emplace_back(fields[0]);
    for (std::size_t k = 1; k < fields.size(); ++k) values.push_back(parse_double(fields[k]));
  }
  if (out.names.size() != rows) {
    throw_format("text matrix: header declares " + std::to_string(rows) +
                 " rows, file has " + std::to_string(out.names.size()));
  }
  out.values = Tensor({rows, dim}, std::move(values));
  return out;
}

std::string serialize_embeddings(const Tensor& vectors, const Vocabulary& vocab) {
  if (vectors.rank() != 2 || vectors.rows() != vocab.size()) {
    throw_invalid("save_embeddings: matrix rows must equal vocabulary size");
  }
  return serialize_rows({vocab.words(), vectors});
}

void save_embeddings(const Tensor& vectors, const Vocabulary& vocab,
                     const std::filesystem::path& path) {
  write_file(path, serialize_embeddings(vectors, vocab));
}

void save_embeddings(const EmbeddingMatrix& m, const Vocabulary& vocab,
                     const std::filesystem::path& path) {
  save_embeddings(m.input, vocab, path);
}

WordVectors parse_embeddings(const std::string& bytes) {
  NamedRows rows = parse_rows(bytes);
  const auto& words = rows.names;
  const std::size_t n = words.size(), dim = rows.values.cols();
  const bool reserved_first = n >= 2 && words[0] == Vocabulary::kPadToken &&
                              words[1] == Vocabulary::kUnkToken;
  WordVectors wv;
  if (reserved_first) {
    wv.vocab = Vocabulary(std::vector<std::string>(words.begin() + 2, words.end()), {});
    wv.vectors = std::move(rows.values);
  } else {
    wv.vocab = Vocabulary(words, {});
    std::vector<double> padded(2 * dim, 0.0);
    const auto v = rows.values.data();
    padded.insert(padded.end(), v.begin(), v.end());
    wv.vectors = Tensor({n + 2, dim}, std::move(padded));
  }
  return wv;
}

WordVectors load_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(read_file(path));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace emopred
