#include "tea/keyvalue.hpp"

#include "tea/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

extern char** environ;

namespace tea {
namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& source) {
  KeyValueFile kv;
  kv.source_ = source;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(source + ":" + std::to_string(line_no) + ": unterminated section");
      section = lower(trim(line.substr(1, line.size() - 2)));
      kv.sections_[section];
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = lower(trim(line.substr(0, eq)));
    if (key.empty()) throw ParseError(source + ":" + std::to_string(line_no) + ": empty key");
    kv.sections_[section][key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void KeyValueFile::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot write");
  out << to_string();
}

std::string KeyValueFile::to_string() const {
  std::ostringstream out;
  auto root = sections_.find("");
  if (root != sections_.end()) {
    for (const auto& [k, v] : root->second) out << k << " = " << v << "\n";
  }
  for (const auto& [name, entries] : sections_) {
    if (name.empty()) continue;
    out << "\n[" << name << "]\n";
    for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
  }
  return out.str();
}

bool KeyValueFile::has(const std::string& section, const std::string& key) const {
  return get(section, key).has_value();
}

std::optional<std::string> KeyValueFile::get(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

void KeyValueFile::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

std::string KeyValueFile::get_string(const std::string& section, const std::string& key,
                                     const std::string& fallback) const {
  return get(section, key).value_or(fallback);
}

double KeyValueFile::get_double(const std::string& section, const std::string& key, double fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ParseError(source_ + ": [" + section + "] " + key + " is not a number: " + *v);
  }
}

long long KeyValueFile::get_int(const std::string& section, const std::string& key, long long fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    long long i = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return i;
  } catch (const std::exception&) {
    throw ParseError(source_ + ": [" + section + "] " + key + " is not an integer: " + *v);
  }
}

bool KeyValueFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  const std::string s = lower(*v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ParseError(source_ + ": [" + section + "] " + key + " is not a boolean: " + *v);
}

std::vector<double> KeyValueFile::get_doubles(const std::string& section, const std::string& key,
                                              const std::vector<double>& fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  try {
    return parse_double_list(*v);
  } catch (const ParseError& e) {
    throw ParseError(source_ + ": [" + section + "] " + key + ": " + e.what());
  }
}

void KeyValueFile::apply_environment(const std::string& prefix) {
  const std::string head = prefix + "_";
  for (char** env = environ; env && *env; ++env) {
    std::string entry(*env);
    if (entry.rfind(head, 0) != 0) continue;
    auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string name = entry.substr(head.size(), eq - head.size());
    auto us = name.find('_');
    if (us == std::string::npos || us == 0 || us + 1 >= name.size()) continue;
    set(lower(name.substr(0, us)), lower(name.substr(us + 1)), entry.substr(eq + 1));
  }
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  const std::string t = trim(text);
  if (t.empty()) return out;
  auto range = t.find("..");
  if (range != std::string::npos) {
    double lo = 0, hi = 0;
    try {
      lo = std::stod(t.substr(0, range));
      hi = std::stod(t.substr(range + 2));
    } catch (const std::exception&) {
      throw ParseError("bad range: " + text);
    }
    const long long steps = std::llround((hi - lo) / 0.1);
    if (steps < 0) throw ParseError("empty range: " + text);
    for (long long i = 0; i <= steps; ++i) out.push_back(std::round((lo + 0.1 * static_cast<double>(i)) * 1e9) / 1e9);
    return out;
  }
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("not a number: " + item);
    }
  }
  return out;
}

std::string join_doubles(const std::vector<double>& values) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ",";
    out << values[i];
  }
  return out.str();
}

}  // namespace tea
