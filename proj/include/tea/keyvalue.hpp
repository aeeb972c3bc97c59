#pragma once

// Sectioned key/value text files:
//
//   # comment
//   [section]
//   key = value
//
// Used for run configurations and dataset manifests. Keys outside any section
// live in the "" section.

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tea {

class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& source = "<string>");
  static KeyValueFile load(const std::string& path);

  void save(const std::string& path) const;
  std::string to_string() const;

  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);

  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long long get_int(const std::string& section, const std::string& key, long long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  const std::vector<double>& fallback) const;

  // Applies PREFIX_<SECTION>_<KEY>=value variables from the process
  // environment. Section names are matched case-insensitively against the
  // first underscore-delimited token; the remainder is the lowercased key.
  void apply_environment(const std::string& prefix = "TEA");

  const std::map<std::string, std::map<std::string, std::string>>& sections() const { return sections_; }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::string source_ = "<string>";
};

// Parses "a,b,c" or a range "lo..hi" (step 0.1) into doubles.
std::vector<double> parse_double_list(const std::string& text);
std::string join_doubles(const std::vector<double>& values);

}  // namespace tea
