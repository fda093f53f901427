#include "emopred/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "emopred/error.hpp"

namespace emopred {
namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::size_t parse_label(std::string_view field, std::size_t num_classes,
                        std::size_t line_no) {
  field = trim(field);
  std::size_t value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end) {
    throw_format("line " + std::to_string(line_no) + ": malformed label '" +
                 std::string(field) + "'");
  }
  if (value >= num_classes) {
    throw_invalid("line " + std::to_string(line_no) + ": label " +
                  std::to_string(value) + " outside [0, " +
                  std::to_string(num_classes) + ")");
  }
  return value;
}

void check_text(std::string_view text, std::size_t line_no) {
  if (trim(text).empty()) {
    throw_format("line " + std::to_string(line_no) + ": empty text");
  }
}

}  // namespace

std::vector<std::string> split_lines(const std::string& bytes) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < bytes.size()) {
    std::size_t nl = bytes.find('\n', start);
    if (nl == std::string::npos) nl = bytes.size();
    std::string line = bytes.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = nl + 1;
  }
  return lines;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw_io("error reading '" + path.string() + "'");
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot open '" + path.string() + "' for writing");
  out << bytes;
  if (!out) throw_io("error writing '" + path.string() + "'");
}

Dataset parse_dataset(const std::string& text_bytes,
                      const std::string& label_bytes,
                      std::size_t num_classes) {
  if (num_classes == 0) throw_invalid("num_classes must be at least 1");
  const auto texts = split_lines(text_bytes);
  const auto labels = split_lines(label_bytes);
  if (texts.size() != labels.size()) {
    throw_format("line-count mismatch: " + std::to_string(texts.size()) +
                 " texts vs " + std::to_string(labels.size()) + " labels");
  }
  Dataset d;
  d.num_classes = num_classes;
  d.examples.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    check_text(texts[i], i + 1);
    d.examples.push_back({texts[i], parse_label(labels[i], num_classes, i + 1)});
  }
  return d;
}

Dataset parse_tsv(const std::string& bytes, std::size_t num_classes) {
  if (num_classes == 0) throw_invalid("num_classes must be at least 1");
  Dataset d;
  d.num_classes = num_classes;
  const auto lines = split_lines(bytes);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tab = lines[i].rfind('\t');
    if (tab == std::string::npos) {
      throw_format("line " + std::to_string(i + 1) + ": missing TAB");
    }
    std::string text = lines[i].substr(0, tab);
    check_text(text, i + 1);
    d.examples.push_back(
        {std::move(text),
         parse_label(std::string_view(lines[i]).substr(tab + 1), num_classes,
                     i + 1)});
  }
  return d;
}

Dataset load_dataset(const std::filesystem::path& text_path,
                     const std::filesystem::path& labels_path,
                     std::size_t num_classes) {
  return parse_dataset(read_file(text_path), read_file(labels_path),
                       num_classes);
}

Dataset load_tsv(const std::filesystem::path& path, std::size_t num_classes) {
  return parse_tsv(read_file(path), num_classes);
}

void save_dataset(const Dataset& d, const std::filesystem::path& text_path,
                  const std::filesystem::path& labels_path) {
  std::string texts, labels;
  for (const auto& ex : d.examples) {
    texts += ex.text;
    texts += '\n';
    labels += std::to_string(ex.label);
    labels += '\n';
  }
  write_file(text_path, texts);
  write_file(labels_path, labels);
}

void save_tsv(const Dataset& d, const std::filesystem::path& path) {
  std::string out;
  for (const auto& ex : d.examples) {
    out += ex.text;
    out += '\t';
    out += std::to_string(ex.label);
    out += '\n';
  }
  write_file(path, out);
}

ClassDistribution class_distribution(const Dataset& d) {
  if (d.empty()) throw_invalid("class_distribution: empty dataset");
  ClassDistribution dist;
  dist.counts.assign(d.num_classes, 0);
  for (const auto& ex : d.examples) {
    if (ex.label >= d.num_classes) throw_invalid("label outside num_classes");
    ++dist.counts[ex.label];
  }
  const double total = static_cast<double>(d.size());
  dist.freqs.reserve(d.num_classes);
  for (auto c : dist.counts) dist.freqs.push_back(static_cast<double>(c) / total);
  return dist;
}

Split stratified_split(const Dataset& d, const std::array<double, 3>& ratios,
                       std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw_invalid("split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw_invalid("split ratios must sum to 1");

  std::vector<std::vector<std::size_t>> by_class(d.num_classes);
  for (std::size_t i = 0; i < d.size(); ++i) {
    by_class.at(d.examples[i].label).push_back(i);
  }

  Split out;
  out.train.num_classes = out.val.num_classes = out.test.num_classes =
      d.num_classes;
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    if (idx.size() < ratios.size()) {
      throw_invalid("class " + std::to_string(c) + " has only " +
                    std::to_string(idx.size()) + " examples for 3 splits");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<double>(idx.size());
    auto n_val = static_cast<std::size_t>(std::round(n * ratios[1]));
    auto n_test = static_cast<std::size_t>(std::round(n * ratios[2]));
    while (n_val + n_test > idx.size()) {
      if (n_test >= n_val) --n_test; else --n_val;
    }
    const std::size_t n_train = idx.size() - n_val - n_test;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Dataset& target = k < n_train              ? out.train
                        : k < n_train + n_val    ? out.val
                                                 : out.test;
      target.examples.push_back(d.examples[idx[k]]);
    }
  }
  return out;
}

}  // namespace emopred
