#include "bisimkit/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "bisimkit/errors.hpp"

namespace bisimkit {

namespace {

using nlohmann::json;

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        if (peek() == '[') fail("arrays of tables are not supported");
        skip_ws();
        std::vector<std::string> path = dotted_key();
        skip_ws();
        expect(']');
        table = &root;
        for (const auto& k : path) {
          json& next = (*table)[k];
          if (next.is_null()) next = json::object();
          if (!next.is_object()) fail("table '" + k + "' redefines a value");
          table = &next;
        }
        if (!defined_tables_.insert(join(path)).second) fail("table [" + join(path) + "] defined twice");
      } else {
        key_value(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("TOML line " + std::to_string(line_) + ": " + msg);
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\r') ++pos_;
      if (peek() != '\n') return;
      ++pos_;
      ++line_;
    }
  }
  // Whitespace, comments and newlines inside arrays and inline tables.
  void skip_space_multiline() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\r') {
        ++pos_;
        continue;
      }
      if (peek() != '\n') return;
      ++pos_;
      ++line_;
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (eof()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
    ++pos_;
    ++line_;
  }

  static std::string join(const std::vector<std::string>& path) {
    std::string out;
    for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
    return out;
  }

  std::string simple_key() {
    if (peek() == '"') return basic_string();
    if (peek() == '\'') return literal_string();
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> path{simple_key()};
    skip_ws();
    while (peek() == '.') {
      ++pos_;
      skip_ws();
      path.push_back(simple_key());
      skip_ws();
    }
    return path;
  }

  void key_value(json& table) {
    std::vector<std::string> path = dotted_key();
    skip_ws();
    expect('=');
    skip_ws();
    json* target = &table;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      json& next = (*target)[path[i]];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) fail("key '" + path[i] + "' is not a table");
      target = &next;
    }
    if (target->contains(path.back())) fail("duplicate key '" + join(path) + "'");
    (*target)[path.back()] = value();
  }

  json value() {
    const char c = peek();
    if (c == '"') {
      if (s_.substr(pos_, 3) == "\"\"\"") fail("multi-line strings are not supported");
      return basic_string();
    }
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (c == '{') return inline_table();
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return number();
  }

  std::string basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = s_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated escape");
      switch (s_[pos_++]) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case 'u': append_utf8(out, hex_code(4)); break;
        case 'U': append_utf8(out, hex_code(8)); break;
        default: fail("unsupported escape sequence");
      }
    }
    return out;
  }

  std::uint32_t hex_code(int digits) {
    if (pos_ + digits > s_.size()) fail("truncated unicode escape");
    std::uint32_t code = 0;
    for (int i = 0; i < digits; ++i) {
      const char h = s_[pos_++];
      code <<= 4;
      if (h >= '0' && h <= '9') code |= static_cast<std::uint32_t>(h - '0');
      else if (h >= 'a' && h <= 'f') code |= static_cast<std::uint32_t>(h - 'a' + 10);
      else if (h >= 'A' && h <= 'F') code |= static_cast<std::uint32_t>(h - 'A' + 10);
      else fail("bad hex digit in unicode escape");
    }
    if (code > 0x10FFFF || (code >= 0xD800 && code <= 0xDFFF)) fail("unicode escape is not a scalar value");
    return code;
  }

  static void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }

  std::string literal_string() {
    expect('\'');
    const std::size_t start = pos_;
    while (!eof() && peek() != '\'' && peek() != '\n') ++pos_;
    if (peek() != '\'') fail("unterminated literal string");
    std::string out(s_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  json array() {
    expect('[');
    json out = json::array();
    skip_space_multiline();
    while (peek() != ']') {
      out.push_back(value());
      skip_space_multiline();
      if (peek() == ',') {
        ++pos_;
        skip_space_multiline();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    ++pos_;
    return out;
  }

  json inline_table() {
    expect('{');
    json out = json::object();
    skip_ws();
    if (peek() == '}') {
      ++pos_;
      return out;
    }
    while (true) {
      skip_ws();
      key_value(out);
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        return out;
      }
      expect(',');
    }
  }

  json number() {
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_'))
      ++pos_;
    std::string tok(s_.substr(start, pos_ - start));
    if (tok.empty()) fail("expected a value");
    std::string clean;
    for (std::size_t i = 0; i < tok.size(); ++i) {
      if (tok[i] == '_') {
        const bool ok = i > 0 && i + 1 < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i - 1])) &&
                        std::isdigit(static_cast<unsigned char>(tok[i + 1]));
        if (!ok) fail("misplaced '_' in number '" + tok + "'");
        continue;
      }
      clean += tok[i];
    }
    std::string body = clean;
    bool negative = false;
    if (!body.empty() && (body[0] == '+' || body[0] == '-')) {
      negative = body[0] == '-';
      body.erase(0, 1);
    }
    if (body == "inf") return negative ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = body.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      if (body.size() > 1 && body[0] == '0') fail("leading zeros in '" + tok + "'");
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
      if (ec != std::errc() || p != body.data() + body.size()) fail("invalid value '" + tok + "'");
      return negative ? -v : v;
    }
    double v = 0.0;
    auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
    if (ec != std::errc() || p != body.data() + body.size() || !std::isdigit(static_cast<unsigned char>(body[0])) ||
        !std::isdigit(static_cast<unsigned char>(body.back())))
      fail("invalid value '" + tok + "'");
    return negative ? -v : v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::set<std::string> defined_tables_;
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return Parser(text).parse(); }

nlohmann::json load_config_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() == ".json") {
    try {
      return nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("invalid JSON config: ") + e.what());
    }
  }
  return parse_toml(buf.str());
}

}  // namespace bisimkit
