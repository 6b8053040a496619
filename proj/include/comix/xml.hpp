#pragma once

// Minimal non-validating XML reader and escaping helpers.
//
// Supports elements, attributes, character data, CDATA, comments, processing
// instructions, a skipped DOCTYPE, the five predefined entities and numeric
// character references. Every element remembers its line/column so schema
// errors can point back into the source.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "comix/error.hpp"

namespace comix::xml {

struct Node {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<Node> children;
  std::string text;  // character data directly inside this element, concatenated
  SourcePos pos;
  bool self_closing = false;

  const std::string* attr(std::string_view key) const {
    for (const auto& [k, v] : attributes)
      if (k == key) return &v;
    return nullptr;
  }

  const Node* child(std::string_view child_name) const {
    for (const auto& c : children)
      if (c.name == child_name) return &c;
    return nullptr;
  }

  /// Character data of this element and all descendants, in document order
  /// as far as this model retains it.
  std::string deep_text() const {
    std::string out = text;
    for (const auto& c : children) out += c.deep_text();
    return out;
  }
};

namespace detail {

inline void append_utf8(std::string& out, std::uint32_t cp) {
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

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < src_.size(); ++i)
      if (src_[i] == '\n') line_starts_.push_back(i + 1);
  }

  Node parse_document() {
    if (src_.substr(0, 3) == "\xEF\xBB\xBF") i_ = 3;
    skip_misc();
    if (at_end() || src_[i_] != '<') fail("expected root element");
    Node root = parse_element();
    skip_misc();
    if (!at_end()) fail("content after root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { fail_at(i_, msg); }

  [[noreturn]] void fail_at(std::size_t offset, const std::string& msg) const {
    throw Error(ErrorCode::parse_malformed, msg, pos_of(offset));
  }

  SourcePos pos_of(std::size_t offset) const {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), offset);
    auto line = static_cast<std::int64_t>(it - line_starts_.begin());
    auto col = static_cast<std::int64_t>(offset - *(it - 1)) + 1;
    return {line, col};
  }

  bool at_end() const { return i_ >= src_.size(); }
  bool starts_with(std::string_view s) const { return src_.substr(i_, s.size()) == s; }

  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
  static bool is_name_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_' || c == ':' || c == '-' || c == '.' || u >= 0x80;
  }

  void skip_space() {
    while (!at_end() && is_space(src_[i_])) ++i_;
  }

  void skip_until(std::string_view terminator, const char* what) {
    auto end = src_.find(terminator, i_);
    if (end == std::string_view::npos) fail(std::string("unterminated ") + what);
    i_ = end + terminator.size();
  }

  void skip_doctype() {
    int depth = 0;
    while (!at_end()) {
      char c = src_[i_++];
      if (c == '[') ++depth;
      else if (c == ']') --depth;
      else if (c == '>' && depth <= 0) return;
    }
    fail("unterminated DOCTYPE");
  }

  void skip_misc() {
    for (;;) {
      skip_space();
      if (starts_with("<?")) skip_until("?>", "processing instruction");
      else if (starts_with("<!--")) skip_until("-->", "comment");
      else if (starts_with("<!DOCTYPE")) skip_doctype();
      else return;
    }
  }

  std::string parse_name() {
    std::size_t start = i_;
    while (!at_end() && is_name_char(src_[i_])) ++i_;
    if (i_ == start) fail("expected name");
    return std::string(src_.substr(start, i_ - start));
  }

  void decode_entity(std::string& out) {
    std::size_t start = i_;
    auto semi = src_.find(';', i_);
    if (semi == std::string_view::npos || semi - i_ > 12) fail_at(start, "bad entity reference");
    auto ent = src_.substr(i_ + 1, semi - i_ - 1);
    i_ = semi + 1;
    if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "amp") out += '&';
    else if (ent == "quot") out += '"';
    else if (ent == "apos") out += '\'';
    else if (!ent.empty() && ent[0] == '#') {
      std::uint32_t cp = 0;
      bool hex = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X');
      auto digits = ent.substr(hex ? 2 : 1);
      if (digits.empty()) fail_at(start, "bad character reference");
      for (char c : digits) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else fail_at(start, "bad character reference");
        cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
        if (cp > 0x10FFFF) fail_at(start, "character reference out of range");
      }
      append_utf8(out, cp);
    } else {
      fail_at(start, "unknown entity '" + std::string(ent) + "'");
    }
  }

  std::string parse_attr_value() {
    if (at_end() || (src_[i_] != '"' && src_[i_] != '\'')) fail("expected quoted attribute value");
    char quote = src_[i_++];
    std::string out;
    while (!at_end() && src_[i_] != quote) {
      char c = src_[i_];
      if (c == '<') fail("'<' in attribute value");
      if (c == '&') {
        decode_entity(out);
      } else {
        // literal whitespace is normalized to a space; references survive
        out += is_space(c) ? ' ' : c;
        ++i_;
      }
    }
    if (at_end()) fail("unterminated attribute value");
    ++i_;
    return out;
  }

  Node parse_element() {
    Node node;
    node.pos = pos_of(i_);
    ++i_;  // '<'
    node.name = parse_name();
    for (;;) {
      bool had_space = !at_end() && is_space(src_[i_]);
      skip_space();
      if (at_end()) fail("unterminated start tag");
      if (src_[i_] == '/') {
        if (!starts_with("/>")) fail("expected '/>'");
        i_ += 2;
        node.self_closing = true;
        return node;
      }
      if (src_[i_] == '>') {
        ++i_;
        break;
      }
      if (!had_space) fail("expected whitespace before attribute");
      std::size_t attr_start = i_;
      std::string key = parse_name();
      skip_space();
      if (at_end() || src_[i_] != '=') fail("expected '=' after attribute name");
      ++i_;
      skip_space();
      std::string value = parse_attr_value();
      if (node.attr(key)) fail_at(attr_start, "duplicate attribute '" + key + "'");
      node.attributes.emplace_back(std::move(key), std::move(value));
    }
    // content
    for (;;) {
      if (at_end()) fail("element <" + node.name + "> is not closed");
      char c = src_[i_];
      if (c == '<') {
        if (starts_with("</")) {
          std::size_t close_at = i_;
          i_ += 2;
          std::string closing = parse_name();
          skip_space();
          if (at_end() || src_[i_] != '>') fail("expected '>'");
          ++i_;
          if (closing != node.name)
            fail_at(close_at, "mismatched closing tag </" + closing + "> for <" + node.name + ">");
          return node;
        }
        if (starts_with("<!--")) {
          skip_until("-->", "comment");
        } else if (starts_with("<![CDATA[")) {
          i_ += 9;
          auto end = src_.find("]]>", i_);
          if (end == std::string_view::npos) fail("unterminated CDATA");
          node.text.append(src_.substr(i_, end - i_));
          i_ = end + 3;
        } else if (starts_with("<?")) {
          skip_until("?>", "processing instruction");
        } else {
          node.children.push_back(parse_element());
        }
      } else if (c == '&') {
        decode_entity(node.text);
      } else {
        node.text += c;
        ++i_;
      }
    }
  }

  std::string_view src_;
  std::size_t i_ = 0;
  std::vector<std::size_t> line_starts_;
};

}  // namespace detail

inline Node parse(std::string_view document) { return detail::Parser(document).parse_document(); }

inline std::string escape_attr(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      case '\t': out += "&#9;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string escape_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '\r': out += "&#13;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Single-line canonical rendering of a subtree. Character data is emitted
/// before child elements; whitespace-only data is dropped.
inline std::string to_string(const Node& node) {
  std::string out = "<" + node.name;
  for (const auto& [k, v] : node.attributes) out += " " + k + "=\"" + escape_attr(v) + "\"";
  bool blank = node.text.find_first_not_of(" \t\r\n") == std::string::npos;
  if (node.children.empty() && blank) return out + "/>";
  out += ">";
  if (!blank) out += escape_text(node.text);
  for (const auto& c : node.children) out += to_string(c);
  return out + "</" + node.name + ">";
}

}  // namespace comix::xml
