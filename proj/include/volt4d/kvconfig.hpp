#pragma once

// Flat key=value text with optional [section] headers. Keys are addressed as
// "section.key"; keys before any header live in the empty section and are
// addressed by their bare name. Insertion order is preserved on output.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "volt4d/error.hpp"

namespace volt4d {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

class KeyValues {
 public:
  static KeyValues parse(std::string_view text, const std::string& origin = "<text>") {
    KeyValues kv;
    std::string section;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string line = trim(raw.substr(0, raw.find('#')));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(ErrorKind::Config, origin + ":" + std::to_string(line_no) + ": malformed section");
        section = trim(std::string_view(line).substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        fail(ErrorKind::Config, origin + ":" + std::to_string(line_no) + ": expected key=value");
      const std::string key = trim(std::string_view(line).substr(0, eq));
      kv.set(section.empty() ? key : section + "." + key, trim(std::string_view(line).substr(eq + 1)));
    }
    return kv;
  }

  static KeyValues load(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::Io, "cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
  }

  void set(const std::string& key, std::string value) {
    for (auto& [k, v] : entries_)
      if (k == key) {
        v = std::move(value);
        return;
      }
    entries_.emplace_back(key, std::move(value));
  }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  const std::string& get(const std::string& key) const {
    const auto* v = find(key);
    if (!v) fail(ErrorKind::Config, "missing key '" + key + "'");
    return *v;
  }

  std::string get_or(const std::string& key, std::string fallback) const {
    const auto* v = find(key);
    return v ? *v : fallback;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

  /// Renders with [section] headers, grouping keys by their first dotted part.
  std::string to_string() const {
    std::ostringstream os;
    std::string current;
    bool first = true;
    for (const auto& [key, value] : entries_) {
      const auto dot = key.find('.');
      const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
      const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
      if (first || section != current) {
        if (!section.empty()) os << (first ? "" : "\n") << '[' << section << "]\n";
        current = section;
        first = false;
      }
      os << name << '=' << value << '\n';
    }
    return os.str();
  }

 private:
  const std::string* find(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return &v;
    return nullptr;
  }

  std::vector<std::pair<std::string, std::string>> entries_;
};

// ---------------------------------------------------------------------------
// Value conversions shared by config files, manifests and checkpoints.

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T value{};
  const auto st = trim(s);
  const auto* end = st.data() + st.size();
  auto [ptr, ec] = std::from_chars(st.data(), end, value);
  if (ec != std::errc() || ptr != end || st.empty())
    fail(ErrorKind::Config, "cannot parse '" + st + "' as a number for " + std::string(what));
  return value;
}

template <typename T>
std::vector<T> parse_list(std::string_view s, std::string_view what) {
  std::vector<T> out;
  std::string item;
  std::istringstream in{std::string(s)};
  while (std::getline(in, item, ','))
    if (!trim(item).empty()) out.push_back(parse_number<T>(item, what));
  return out;
}

template <typename Range>
std::string join_list(const Range& values) {
  std::ostringstream os;
  bool first = true;
  for (const auto& v : values) {
    os << (first ? "" : ",") << v;
    first = false;
  }
  return os.str();
}

/// Shortest decimal that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + format_double(values[i]);
  return out;
}

}  // namespace volt4d
