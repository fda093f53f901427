#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace emopred {

inline constexpr std::size_t kDefaultNumClasses = 20;

struct Example {
  std::string text;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<Example> examples;
  std::size_t num_classes = kDefaultNumClasses;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

struct ClassDistribution {
  std::vector<std::uint64_t> counts;
  std::vector<double> freqs;
};

struct Split {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Parallel files: line i of `text_path` is paired with line i of
// `labels_path`.
Dataset load_dataset(const std::filesystem::path& text_path,
                     const std::filesystem::path& labels_path,
                     std::size_t num_classes = kDefaultNumClasses);

// One example per line as "text TAB label"; the label follows the last tab.
Dataset load_tsv(const std::filesystem::path& path,
                 std::size_t num_classes = kDefaultNumClasses);

// Parses already-read contents. Exposed so loaders stay a pure function of
// the bytes.
Dataset parse_dataset(const std::string& text_bytes,
                      const std::string& label_bytes, std::size_t num_classes);
Dataset parse_tsv(const std::string& bytes, std::size_t num_classes);

void save_dataset(const Dataset& d, const std::filesystem::path& text_path,
                  const std::filesystem::path& labels_path);
void save_tsv(const Dataset& d, const std::filesystem::path& path);

ClassDistribution class_distribution(const Dataset& d);

// Shuffles each class with a seeded generator, then cuts val and test at the
// nearest whole count to their ratio. The remainder goes to train.
Split stratified_split(const Dataset& d, const std::array<double, 3>& ratios,
                       std::uint64_t seed);

// Splits file contents into lines, dropping a trailing '\r' and the empty
// string after a final newline.
std::vector<std::string> split_lines(const std::string& bytes);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace emopred
