#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace emopred {

// Flat key/value run configuration. Every key has a built-in default; files
// and overrides may only set known keys.
class RunConfig {
 public:
  RunConfig();

  // "key = value" lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void parse(const std::string& text, std::string_view source = "<string>");
  void set(std::string_view key, std::string value);
  // "key=value"
  void set_assignment(std::string_view assignment);

  bool has(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  std::string get_string(std::string_view key) const { return get(key); }
  double get_double(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  std::size_t get_size(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::vector<double> get_double_list(std::string_view key) const;
  std::vector<std::size_t> get_size_list(std::string_view key) const;

  // Every key in sorted order, loadable with parse().
  std::string dump() const;
  void save(const std::filesystem::path& path) const;

  static const std::vector<std::string>& keys();

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace emopred
