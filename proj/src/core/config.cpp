#include "emopred/config.hpp"

#include <charconv>
#include <sstream>
#include <utility>

#include "emopred/data_io.hpp"
#include "emopred/embeddings.hpp"
#include "emopred/error.hpp"

namespace emopred {
namespace {

const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> kDefaults = {
      // data
      {"num_classes", "20"},
      {"input", ""},
      {"output", ""},
      {"text", ""},
      {"labels", ""},
      {"train_text", ""},
      {"train_labels", ""},
      {"val_text", ""},
      {"val_labels", ""},
      {"model", ""},
      {"seed", "1"},
      // preprocessing
      {"stats", ""},
      {"emoticons", ""},
      {"segment_hashtags", "true"},
      {"spell_correct", "false"},
      {"bigram_rescoring", "false"},
      {"max_edits", "2"},
      {"max_word_len", "20"},
      // embeddings
      {"embeddings", ""},
      {"min_count", "1"},
      {"embed_dim", "300"},
      {"window", "5"},
      {"negatives", "5"},
      {"sgns_epochs", "5"},
      {"sgns_lr_start", "0.025"},
      {"sgns_lr_end", "0.0001"},
      {"subsample", "0"},
      // classifier
      {"hidden_size", "300"},
      {"attention", "context"},
      {"noise_sigma", "0.05"},
      {"dropout_embed", "0.1"},
      {"dropout_rnn", "0.3"},
      {"class_weighting", "inverse"},
      {"batch_size", "32"},
      {"max_epochs", "30"},
      {"patience", "3"},
      {"lr", "0.001"},
      {"beta1", "0.9"},
      {"beta2", "0.999"},
      {"epsilon", "1e-08"},
      {"clip_norm", "1"},
      // baselines
      {"features", "bow"},
      {"svm_c", "0.6"},
      {"svm_iterations", "0"},
      {"svm_projection", "false"},
      // search
      {"search_budget", "10"},
      {"search_lr_min", "0.0001"},
      {"search_lr_max", "0.01"},
      {"search_hidden_size", "300"},
      {"search_batch_size", "32"},
      {"search_noise_sigma", "0.05"},
      {"search_dropout_embed", "0.1"},
      {"search_dropout_rnn", "0.3"},
      // predict
      {"heatmaps", ""},
  };
  return kDefaults;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.push_back(trim(std::string_view(s).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_.emplace(k, v);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> kKeys = [] {
    std::vector<std::string> k;
    for (const auto& [key, value] : defaults()) k.push_back(key);
    return k;
  }();
  return kKeys;
}

bool RunConfig::has(std::string_view key) const {
  return values_.find(key) != values_.end();
}

void RunConfig::set(std::string_view key, std::string value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw_invalid("config: unknown key '" + std::string(key) + "'");
  it->second = std::move(value);
}

void RunConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw_invalid("config: expected key=value, got '" + std::string(assignment) + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::parse(const std::string& text, std::string_view source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw_format(std::string(source) + ":" + std::to_string(line_no) +
                   ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (!has(key)) {
      throw_invalid(std::string(source) + ":" + std::to_string(line_no) +
                    ": unknown key '" + key + "'");
    }
    set(key, trim(std::string_view(body).substr(eq + 1)));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  parse(read_file(path), path.string());
}

const std::string& RunConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw_invalid("config: unknown key '" + std::string(key) + "'");
  return it->second;
}

double RunConfig::get_double(std::string_view key) const {
  const std::string& v = get(key);
  try {
    return parse_double(v);
  } catch (const Error&) {
    throw_invalid("config: '" + std::string(key) + "' must be a number, got '" + v + "'");
  }
}

std::int64_t RunConfig::get_int(std::string_view key) const {
  const std::string& v = get(key);
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw_invalid("config: '" + std::string(key) + "' must be an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t RunConfig::get_u64(std::string_view key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw_invalid("config: '" + std::string(key) +
                  "' must be a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t RunConfig::get_size(std::string_view key) const {
  return static_cast<std::size_t>(get_u64(key));
}

bool RunConfig::get_bool(std::string_view key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw_invalid("config: '" + std::string(key) + "' must be true or false, got '" + v + "'");
}

std::vector<double> RunConfig::get_double_list(std::string_view key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get(key))) {
    try {
      out.push_back(parse_double(item));
    } catch (const Error&) {
      throw_invalid("config: '" + std::string(key) + "' must be a comma-separated list of numbers");
    }
  }
  return out;
}

std::vector<std::size_t> RunConfig::get_size_list(std::string_view key) const {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(get(key))) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw_invalid("config: '" + std::string(key) + "' must be a comma-separated list of integers");
    }
    out.push_back(v);
  }
  return out;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::save(const std::filesystem::path& path) const {
  write_file(path, dump());
}

}  // namespace emopred
