#pragma once

// UCA XML dialect.
//
//   <book title=".." dataset="dcm|c100|ebd|m109|pop|other">
//     <characters><character id="0" name=".."/></characters>
//     <stories><story title=".." first="0" last="12"/></stories>     optional
//     <pages>
//       <page index="0" width="W" height="H">
//         <panel id="p0" points="x1,y1 x2,y2 x3,y3 x4,y4"/>
//         <character id="c0" charid="0" points=".."/>
//         <face id="f0" charid="0" points=".."/>
//         <text id="t0" points="..">TRANSCRIPTION</text>
//         <balloon id="b0" points=".."/>
//         <onomatopoeia id="o0" group="g1" points=".."/>
//         <link_sbsc text="t0" speaker="0"/>
//       </page>
//     </pages>
//   </book>
//
// Known attributes come first in the order above; unknown ones follow in
// lexicographic order. Unknown child elements are written last inside their
// parent. A free-form dataset name for `other` travels in `dataset_name`.

#include <set>
#include <string>
#include <string_view>

#include "comix/error.hpp"
#include "comix/text.hpp"
#include "comix/uca.hpp"
#include "comix/xml.hpp"

namespace comix {

namespace uca_detail {

inline bool valid_xml_name(std::string_view name) {
  if (name.empty()) return false;
  auto first = static_cast<unsigned char>(name.front());
  if (!(std::isalpha(first) || name.front() == '_' || name.front() == ':' || first >= 0x80))
    return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_' || c == ':' || c == '-' || c == '.' || u >= 0x80;
  });
}

inline std::string points_attr(const Polygon& polygon) {
  std::string out;
  for (const auto& p : polygon.points()) {
    if (!out.empty()) out += ' ';
    out += text::format_number(p.x) + "," + text::format_number(p.y);
  }
  return out;
}

inline void append_ext_attrs(std::string& out, const Extensions& ext,
                             std::initializer_list<std::string_view> known) {
  for (const auto& [k, v] : ext.attributes) {
    bool clash = std::find(known.begin(), known.end(), k) != known.end();
    if (clash || !valid_xml_name(k))
      throw Error(ErrorCode::serialize_invalid, "extension attribute '" + k + "' is not writable");
    out += " " + k + "=\"" + xml::escape_attr(v) + "\"";
  }
}

inline std::string_view element_name(AnnotationClass cls) { return class_name(cls); }

class Writer {
 public:
  std::string run(const UcaBook& book) {
    out_ = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out_ += "<book title=\"" + xml::escape_attr(book.title) + "\" dataset=\"" +
            std::string(book.dataset.token()) + "\"";
    if (book.dataset.kind == DatasetKind::other && !book.dataset.other_name.empty())
      out_ += " dataset_name=\"" + xml::escape_attr(book.dataset.other_name) + "\"";
    append_ext_attrs(out_, book.ext, {"title", "dataset", "dataset_name"});
    out_ += ">\n";

    if (book.characters.empty()) {
      out_ += "  <characters/>\n";
    } else {
      out_ += "  <characters>\n";
      for (const auto& c : book.characters) {
        out_ += "    <character id=\"" + std::to_string(c.id) + "\" name=\"" +
                xml::escape_attr(c.name) + "\"";
        close_simple(c.ext, {"id", "name"}, "character");
      }
      out_ += "  </characters>\n";
    }

    if (!book.stories.empty()) {
      out_ += "  <stories>\n";
      for (const auto& s : book.stories) {
        out_ += "    <story title=\"" + xml::escape_attr(s.title) + "\" first=\"" +
                std::to_string(s.first) + "\" last=\"" + std::to_string(s.last) + "\"";
        close_simple(s.ext, {"title", "first", "last"}, "story");
      }
      out_ += "  </stories>\n";
    }

    if (book.pages.empty()) {
      out_ += "  <pages/>\n";
    } else {
      out_ += "  <pages>\n";
      for (const auto& page : book.pages) write_page(page);
      out_ += "  </pages>\n";
    }
    for (const auto& e : book.ext.elements) out_ += "  " + e + "\n";
    out_ += "</book>\n";
    return std::move(out_);
  }

 private:
  // Ends an element whose only possible children are extension elements.
  void close_simple(const Extensions& ext, std::initializer_list<std::string_view> known,
                    std::string_view name) {
    append_ext_attrs(out_, ext, known);
    if (ext.elements.empty()) {
      out_ += "/>\n";
      return;
    }
    out_ += ">";
    for (const auto& e : ext.elements) out_ += e;
    out_ += "</" + std::string(name) + ">\n";
  }

  void write_page(const UcaPage& page) {
    out_ += "    <page index=\"" + std::to_string(page.index) + "\" width=\"" +
            std::to_string(page.width) + "\" height=\"" + std::to_string(page.height) + "\"";
    append_ext_attrs(out_, page.ext, {"index", "width", "height"});
    if (page.annotations.empty() && page.links.empty() && page.ext.elements.empty()) {
      out_ += "/>\n";
      return;
    }
    out_ += ">\n";
    for (const auto& a : page.annotations) write_annotation(a);
    for (const auto& l : page.links) {
      out_ += "      <link_sbsc text=\"" + xml::escape_attr(l.text_id) + "\" speaker=\"" +
              std::to_string(l.speaker_char_ref) + "\"";
      append_ext_attrs(out_, l.ext, {"text", "speaker"});
      if (l.ext.elements.empty()) {
        out_ += "/>\n";
      } else {
        out_ += ">";
        for (const auto& e : l.ext.elements) out_ += e;
        out_ += "</link_sbsc>\n";
      }
    }
    for (const auto& e : page.ext.elements) out_ += "      " + e + "\n";
    out_ += "    </page>\n";
  }

  void write_annotation(const AnnotationObject& a) {
    std::string name(element_name(a.cls));
    out_ += "      <" + name + " id=\"" + xml::escape_attr(a.id) + "\"";
    if (a.char_ref) out_ += " charid=\"" + std::to_string(*a.char_ref) + "\"";
    if (a.truncation_group) out_ += " group=\"" + xml::escape_attr(*a.truncation_group) + "\"";
    out_ += " points=\"" + points_attr(a.polygon) + "\"";
    append_ext_attrs(out_, a.ext, {"id", "charid", "group", "points"});
    if (!a.transcription && a.ext.elements.empty()) {
      out_ += "/>\n";
      return;
    }
    out_ += ">";
    if (a.transcription) out_ += xml::escape_text(*a.transcription);
    for (const auto& e : a.ext.elements) out_ += e;
    out_ += "</" + name + ">\n";
  }

  std::string out_;
};

[[noreturn]] inline void schema_error(const xml::Node& node, const std::string& msg) {
  throw Error(ErrorCode::schema_violation, "<" + node.name + ">: " + msg, node.pos);
}

inline const std::string& required_attr(const xml::Node& node, std::string_view key) {
  if (const auto* v = node.attr(key)) return *v;
  schema_error(node, "missing required attribute '" + std::string(key) + "'");
}

inline std::int64_t int_attr(const xml::Node& node, std::string_view key) {
  const auto& raw = required_attr(node, key);
  auto v = text::parse_int(raw);
  if (!v) schema_error(node, "attribute '" + std::string(key) + "' is not an integer: '" + raw + "'");
  return *v;
}

inline Polygon parse_points(const xml::Node& node) {
  const auto& raw = required_attr(node, "points");
  std::vector<Point> pts;
  for (auto token : text::split_ws(raw)) {
    auto comma = token.find(',');
    if (comma == std::string_view::npos || token.find(',', comma + 1) != std::string_view::npos)
      schema_error(node, "bad point '" + std::string(token) + "'");
    auto x = text::parse_double(token.substr(0, comma));
    auto y = text::parse_double(token.substr(comma + 1));
    if (!x || !y) schema_error(node, "bad point '" + std::string(token) + "'");
    pts.push_back({*x, *y});
  }
  if (pts.size() < 3) schema_error(node, "polygon needs at least 3 points");
  return Polygon(std::move(pts));
}

inline Extensions collect_ext(const xml::Node& node, std::initializer_list<std::string_view> known,
                              bool keep_elements) {
  Extensions ext;
  for (const auto& [k, v] : node.attributes)
    if (std::find(known.begin(), known.end(), k) == known.end()) ext.attributes[k] = v;
  if (keep_elements)
    for (const auto& c : node.children) ext.elements.push_back(xml::to_string(c));
  return ext;
}

inline void require_no_text(const xml::Node& node) {
  if (node.text.find_first_not_of(" \t\r\n") != std::string::npos)
    schema_error(node, "unexpected character data");
}

inline AnnotationObject parse_annotation(const xml::Node& node, AnnotationClass cls) {
  AnnotationObject a{.id = required_attr(node, "id"), .cls = cls, .polygon = parse_points(node)};
  if (cls == AnnotationClass::character || cls == AnnotationClass::face) {
    if (node.attr("charid")) a.char_ref = int_attr(node, "charid");
  }
  if (cls == AnnotationClass::onomatopoeia) {
    if (const auto* g = node.attr("group")) a.truncation_group = *g;
  }
  std::initializer_list<std::string_view> known_text = {"id", "points"};
  std::initializer_list<std::string_view> known_char = {"id", "charid", "points"};
  std::initializer_list<std::string_view> known_ono = {"id", "group", "points"};
  auto known = cls == AnnotationClass::character || cls == AnnotationClass::face ? known_char
               : cls == AnnotationClass::onomatopoeia                          ? known_ono
                                                                               : known_text;
  a.ext = collect_ext(node, known, true);
  if (cls == AnnotationClass::text) {
    if (!node.self_closing) a.transcription = node.text;
  } else {
    require_no_text(node);
  }
  return a;
}

inline UcaPage parse_page(const xml::Node& node) {
  UcaPage page;
  page.index = int_attr(node, "index");
  page.width = int_attr(node, "width");
  page.height = int_attr(node, "height");
  page.ext = collect_ext(node, {"index", "width", "height"}, false);
  require_no_text(node);
  for (const auto& child : node.children) {
    if (child.name == "link_sbsc") {
      SpeakerLink link{required_attr(child, "text"), int_attr(child, "speaker"), {}};
      link.ext = collect_ext(child, {"text", "speaker"}, true);
      page.links.push_back(std::move(link));
    } else if (auto cls = class_from_name(child.name)) {
      page.annotations.push_back(parse_annotation(child, *cls));
    } else {
      page.ext.elements.push_back(xml::to_string(child));
    }
  }
  return page;
}

}  // namespace uca_detail

/// Canonical UCA XML for a book that validates without errors.
inline std::string serialize_uca(const UcaBook& book, const ValidationOptions& opts = {}) {
  auto report = validate_book(book, opts);
  if (!report.ok()) {
    const auto& e = report.errors.front();
    throw Error(ErrorCode::serialize_invalid,
                std::to_string(report.errors.size()) + " validation error(s), first: " + e.rule +
                    " " + e.message);
  }
  return uca_detail::Writer{}.run(book);
}

inline UcaBook parse_uca(std::string_view document) {
  using namespace uca_detail;
  xml::Node root = xml::parse(document);
  if (root.name != "book") schema_error(root, "root element must be <book>");

  UcaBook book;
  book.title = required_attr(root, "title");
  const auto& token = required_attr(root, "dataset");
  auto tag = DatasetTag::from_token(token);
  if (!tag) schema_error(root, "unknown dataset tag '" + token + "'");
  book.dataset = *tag;
  if (const auto* name = root.attr("dataset_name")) {
    if (tag->kind != DatasetKind::other) schema_error(root, "dataset_name requires dataset=\"other\"");
    book.dataset.other_name = *name;
  }
  book.ext = collect_ext(root, {"title", "dataset", "dataset_name"}, false);
  require_no_text(root);

  std::set<std::string> seen;
  for (const auto& section : root.children) {
    bool known = section.name == "characters" || section.name == "stories" || section.name == "pages";
    if (!known) {
      book.ext.elements.push_back(xml::to_string(section));
      continue;
    }
    if (!seen.insert(section.name).second) schema_error(section, "duplicate section");
    require_no_text(section);
    if (!section.attributes.empty()) schema_error(section, "unexpected attributes");
    for (const auto& child : section.children) {
      if (section.name == "characters") {
        if (child.name != "character") schema_error(child, "expected <character>");
        CharacterEntry c{int_attr(child, "id"), required_attr(child, "name"), {}};
        c.ext = collect_ext(child, {"id", "name"}, true);
        book.characters.push_back(std::move(c));
      } else if (section.name == "stories") {
        if (child.name != "story") schema_error(child, "expected <story>");
        Story s{required_attr(child, "title"), int_attr(child, "first"), int_attr(child, "last"), {}};
        s.ext = collect_ext(child, {"title", "first", "last"}, true);
        book.stories.push_back(std::move(s));
      } else {
        if (child.name != "page") schema_error(child, "expected <page>");
        book.pages.push_back(parse_page(child));
      }
    }
  }
  return book;
}

}  // namespace comix
