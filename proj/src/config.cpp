#include "rpf/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace rpf {
namespace {

using nlohmann::json;

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        if (peek() == '[') fail("arrays of tables are not supported");
        skip_inline_ws();
        const auto path = parse_key_path();
        skip_inline_ws();
        expect(']');
        table = &descend(root, path, true);
        finish_line();
        continue;
      }
      const auto path = parse_key_path();
      skip_inline_ws();
      expect('=');
      skip_inline_ws();
      json value = parse_value();
      assign(*table, path, std::move(value));
      finish_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("TOML parse error at line " + std::to_string(line_) + ": " + what);
  }

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }

  void expect(char ch) {
    if (peek() != ch) fail(std::string("expected '") + ch + "'");
    ++pos_;
  }

  void skip_inline_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }

  // Whitespace, comments and newlines (used inside arrays and between statements).
  void skip_blank_lines() {
    while (!eof()) {
      skip_inline_ws();
      skip_comment();
      if (peek() == '\r') {
        ++pos_;
      } else if (peek() == '\n') {
        ++pos_;
        ++line_;
      } else {
        break;
      }
    }
  }

  void finish_line() {
    skip_inline_ws();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (eof()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
    ++pos_;
    ++line_;
  }

  std::string parse_key() {
    if (peek() == '"') return parse_basic_string();
    if (peek() == '\'') return parse_literal_string();
    std::string key;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
      key.push_back(text_[pos_++]);
    }
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path{parse_key()};
    skip_inline_ws();
    while (peek() == '.') {
      ++pos_;
      skip_inline_ws();
      path.push_back(parse_key());
      skip_inline_ws();
    }
    return path;
  }

  json& descend(json& root, const std::vector<std::string>& path, bool whole_path) {
    json* node = &root;
    const std::size_t depth = whole_path ? path.size() : path.size() - 1;
    for (std::size_t i = 0; i < depth; ++i) {
      json& child = (*node)[path[i]];
      if (child.is_null()) child = json::object();
      if (!child.is_object()) fail("key '" + path[i] + "' is not a table");
      node = &child;
    }
    return *node;
  }

  void assign(json& table, const std::vector<std::string>& path, json value) {
    json& parent = descend(table, path, false);
    if (parent.contains(path.back())) fail("duplicate key '" + path.back() + "'");
    parent[path.back()] = std::move(value);
  }

  std::string parse_basic_string() {
    expect('"');
    if (text_.substr(pos_, 2) == "\"\"") fail("multi-line strings are not supported");
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char ch = text_[pos_++];
      if (ch == '"') break;
      if (ch != '\\') {
        out.push_back(ch);
        continue;
      }
      const char esc = text_[pos_++];
      switch (esc) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: fail(std::string("unsupported escape '\\") + esc + "'");
      }
    }
    return out;
  }

  std::string parse_literal_string() {
    expect('\'');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char ch = text_[pos_++];
      if (ch == '\'') break;
      out.push_back(ch);
    }
    return out;
  }

  json parse_array() {
    expect('[');
    json arr = json::array();
    while (true) {
      skip_blank_lines();
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_blank_lines();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_blank_lines();
      expect(']');
      return arr;
    }
  }

  json parse_inline_table() {
    expect('{');
    json table = json::object();
    skip_inline_ws();
    if (peek() == '}') {
      ++pos_;
      return table;
    }
    while (true) {
      skip_inline_ws();
      const auto path = parse_key_path();
      skip_inline_ws();
      expect('=');
      skip_inline_ws();
      assign(table, path, parse_value());
      skip_inline_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect('}');
      return table;
    }
  }

  json parse_scalar_token() {
    std::string token;
    while (!eof() && peek() != ',' && peek() != ']' && peek() != '}' && peek() != '#' && peek() != '\n' &&
           peek() != '\r' && peek() != ' ' && peek() != '\t') {
      token.push_back(text_[pos_++]);
    }
    if (token == "true") return true;
    if (token == "false") return false;
    if (token.empty()) fail("expected a value");
    std::string digits;
    for (char ch : token) {
      if (ch != '_') digits.push_back(ch);
    }
    std::string_view view = digits;
    if (!view.empty() && view.front() == '+') view.remove_prefix(1);
    const bool is_float = view.find_first_of(".eE") != std::string_view::npos || view == "inf" ||
                          view == "-inf" || view == "nan";
    if (!is_float) {
      long long value = 0;
      const auto [ptr, ec] = std::from_chars(view.data(), view.data() + view.size(), value);
      if (ec == std::errc() && ptr == view.data() + view.size()) return value;
      fail("invalid value '" + token + "'");
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(view.data(), view.data() + view.size(), value);
    if (ec != std::errc() || ptr != view.data() + view.size() || !std::isfinite(value)) {
      fail("invalid number '" + token + "'");
    }
    return value;
  }

  json parse_value() {
    switch (peek()) {
      case '"':
        return parse_basic_string();
      case '\'':
        return parse_literal_string();
      case '[':
        return parse_array();
      case '{':
        return parse_inline_table();
      default:
        return parse_scalar_token();
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return TomlParser(text).parse(); }

nlohmann::json load_toml(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_toml(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace rpf
