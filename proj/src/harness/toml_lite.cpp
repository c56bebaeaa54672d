#include "opera/harness/toml_lite.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "opera/errors.hpp"

namespace opera {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("toml parse error at line " + std::to_string(line) + ": " + what);
}

std::string strip(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Removes a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::vector<std::string> split_dotted(const std::string& name, int line) {
  std::vector<std::string> parts;
  std::string cur;
  for (const char c : name) {
    if (c == '.') {
      if (cur.empty()) fail(line, "empty table-name segment");
      parts.push_back(strip(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cur = strip(cur);
  if (cur.empty()) fail(line, "empty table-name segment");
  parts.push_back(cur);
  return parts;
}

nlohmann::json parse_scalar(const std::string& raw, int line) {
  const std::string s = strip(raw);
  if (s.empty()) fail(line, "missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') fail(line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\') {
        if (i + 2 >= s.size()) fail(line, "dangling escape");
        ++i;
        switch (s[i]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(line, "unsupported escape");
        }
      } else {
        out += s[i];
      }
    }
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;

  // Integer first so that seeds survive without a float round trip.
  {
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() + s.size() && errno == 0) return v;
  }
  {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() + s.size() && errno == 0) return v;
  }
  fail(line, "cannot parse value '" + s + "'");
}

nlohmann::json parse_value(const std::string& raw, int line) {
  const std::string s = strip(raw);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') fail(line, "unterminated array");
    nlohmann::json arr = nlohmann::json::array();
    std::string body = s.substr(1, s.size() - 2);
    std::string item;
    bool quoted = false;
    for (const char c : body) {
      if (c == '"') quoted = !quoted;
      if (c == ',' && !quoted) {
        if (!strip(item).empty()) arr.push_back(parse_scalar(item, line));
        item.clear();
      } else {
        item += c;
      }
    }
    if (!strip(item).empty()) arr.push_back(parse_scalar(item, line));
    return arr;
  }
  return parse_scalar(s, line);
}

nlohmann::json* descend(nlohmann::json& root, const std::vector<std::string>& parts, int line) {
  nlohmann::json* node = &root;
  for (const std::string& p : parts) {
    if (node->is_array()) node = &node->back();
    if (!node->is_object()) fail(line, "'" + p + "' is not a table");
    node = &(*node)[p];
    if (node->is_null()) *node = nlohmann::json::object();
  }
  if (node->is_array()) node = &node->back();
  return node;
}

}  // namespace

nlohmann::json parse_toml_lite(const std::string& text) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* current = &root;

  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = strip(strip_comment(raw));
    if (s.empty()) continue;

    if (s.size() >= 4 && s.substr(0, 2) == "[[") {
      if (s.substr(s.size() - 2) != "]]") fail(line, "unterminated [[table]] header");
      const auto parts = split_dotted(s.substr(2, s.size() - 4), line);
      nlohmann::json* parent = &root;
      for (std::size_t i = 0; i + 1 < parts.size(); ++i)
        parent = descend(*parent, {parts[i]}, line);
      nlohmann::json& arr = (*parent)[parts.back()];
      if (arr.is_null()) arr = nlohmann::json::array();
      if (!arr.is_array()) fail(line, "'" + parts.back() + "' is not an array of tables");
      arr.push_back(nlohmann::json::object());
      current = &arr.back();
      continue;
    }
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated [table] header");
      current = descend(root, split_dotted(s.substr(1, s.size() - 2), line), line);
      continue;
    }

    const std::size_t eq = [&] {
      bool quoted = false;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '=' && !quoted) return i;
      }
      return std::string::npos;
    }();
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = strip(s.substr(0, eq));
    if (key.empty()) fail(line, "empty key");
    if (current->contains(key)) fail(line, "duplicate key '" + key + "'");
    (*current)[key] = parse_value(s.substr(eq + 1), line);
  }
  return root;
}

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();

  const bool toml = path.size() >= 5 && path.substr(path.size() - 5) == ".toml";
  if (toml) return parse_toml_lite(buf.str());
  try {
    return nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("json parse error in '" + path + "': " + e.what());
  }
}

}  // namespace opera
